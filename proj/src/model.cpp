#include "rsmgan/model.hpp"

#include "rsmgan/config_json.hpp"
#include "rsmgan/model_impl.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rsmgan {

namespace ag = autograd;
namespace fs = std::filesystem;

void NetworkConfig::validate() const {
    if (conv_channels.empty() || conv_channels.size() != conv_strides.size())
        throw std::invalid_argument("NetworkConfig: conv_channels/conv_strides mismatch");
    for (long c : conv_channels)
        if (c < 1) throw std::invalid_argument("NetworkConfig: conv channels must be positive");
    if (disc_channels.empty())
        throw std::invalid_argument("NetworkConfig: discriminator needs at least one layer");
    if (!(w_contextual > 0.0) || !(w_latent > 0.0) || !(w_adversarial > 0.0))
        throw std::invalid_argument("NetworkConfig: loss weights must be positive");
    if (gp_coefficient < 0.0) throw std::invalid_argument("NetworkConfig: negative gp coefficient");
    if (!(attention_rescale > 0.0))
        throw std::invalid_argument("NetworkConfig: attention rescale must be positive");
    if (epochs < 1 || batch_size < 1 || critic_updates_per_gen < 1)
        throw std::invalid_argument("NetworkConfig: epochs/batch/critic updates must be >= 1");
    if (kernel < 1 || kernel % 2 == 0)
        throw std::invalid_argument("NetworkConfig: kernel must be odd and positive");
}

// ---- losses ----

namespace {

double l2_norm_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("compute_losses: shape mismatch");
    double s = 0.0;
    for (long i = 0; i < a.numel(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

LossBreakdown compute_losses(const std::vector<Tensor>& x, const std::vector<Tensor>& x_rec,
                             const std::vector<Tensor>& z, const std::vector<Tensor>& z_rec,
                             const std::vector<double>& critic_real,
                             const std::vector<double>& critic_fake, double grad_penalty,
                             const NetworkConfig& cfg) {
    if (x.size() != x_rec.size() || z.size() != z_rec.size() || x.empty())
        throw std::invalid_argument("compute_losses: batch size mismatch");
    LossBreakdown lb;
    for (size_t i = 0; i < x.size(); ++i) lb.contextual += l2_norm_diff(x[i], x_rec[i]);
    lb.contextual /= static_cast<double>(x.size());
    for (size_t i = 0; i < z.size(); ++i) lb.latent += l2_norm_diff(z[i], z_rec[i]);
    if (!z.empty()) lb.latent /= static_cast<double>(z.size());
    lb.adversarial = mean_of(critic_fake);
    lb.grad_penalty = grad_penalty;
    lb.loss_g = cfg.w_contextual * lb.contextual + cfg.w_latent * lb.latent +
                cfg.w_adversarial * lb.adversarial;
    lb.loss_d = mean_of(critic_real) - mean_of(critic_fake) - cfg.gp_coefficient * grad_penalty;
    if (!std::isfinite(lb.loss_g) || !std::isfinite(lb.loss_d))
        throw std::runtime_error("compute_losses: non-finite loss");
    return lb;
}

Var gradient_penalty(const std::function<Var(const Var&)>& critic, const Tensor& real_batch,
                     const Tensor& fake_batch, Rng& rng) {
    if (!real_batch.same_shape(fake_batch))
        throw std::invalid_argument("gradient_penalty: batch shape mismatch");
    const long B = real_batch.dim(0);
    const long F = real_batch.numel() / B;

    Tensor mix = real_batch;
    for (long b = 0; b < B; ++b) {
        double eps = rng.uniform();
        for (long i = 0; i < F; ++i) {
            long idx = b * F + i;
            mix[idx] = eps * real_batch[idx] + (1.0 - eps) * fake_batch[idx];
        }
    }
    Var x_hat = ag::leaf(std::move(mix));
    Var f = critic(x_hat);
    if (f->value.numel() != B)
        throw std::invalid_argument("gradient_penalty: critic must emit one value per sample");
    ag::GradMap inner = ag::backward(ag::sum_all(f), /*create_graph=*/true);
    auto it = inner.find(x_hat.get());
    if (it == inner.end())
        throw std::runtime_error("gradient_penalty: critic ignores its input");
    Var g = ag::reshape(it->second, {B, F});
    Var norms = ag::sqrt_op(ag::add_scalar(ag::row_sum(ag::mul(g, g)), 1e-12));
    Var excess = ag::add_scalar(norms, -1.0);
    return ag::scale(ag::sum_all(ag::mul(excess, excess)), 1.0 / static_cast<double>(B));
}

// ---- Adam ----

namespace {

struct Adam {
    AdamConfig cfg;
    std::vector<Var> params;
    std::vector<Tensor> m, v;
    long t = 0;

    Adam(std::vector<Var> ps, AdamConfig c) : cfg(c), params(std::move(ps)) {
        m.reserve(params.size());
        v.reserve(params.size());
        for (const auto& p : params) {
            m.push_back(Tensor::zeros(p->value.shape()));
            v.push_back(Tensor::zeros(p->value.shape()));
        }
    }

    void step(const ag::GradMap& grads) {
        ++t;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (size_t i = 0; i < params.size(); ++i) {
            auto it = grads.find(params[i].get());
            if (it == grads.end()) continue;
            const Tensor& g = it->second->value;
            Tensor& mi = m[i];
            Tensor& vi = v[i];
            Tensor& p = params[i]->value;
            for (long j = 0; j < p.numel(); ++j) {
                mi[j] = cfg.beta1 * mi[j] + (1.0 - cfg.beta1) * g[j];
                vi[j] = cfg.beta2 * vi[j] + (1.0 - cfg.beta2) * g[j] * g[j];
                p[j] -= cfg.lr * (mi[j] / bc1) / (std::sqrt(vi[j] / bc2) + cfg.eps);
            }
        }
    }
};

Var mean_l2_rows(const Var& a, const Var& b) {
    const long B = a->value.dim(0);
    Var diff = ag::sub(a, b);
    Var norms = ag::sqrt_op(ag::add_scalar(ag::row_sum(ag::mul(diff, diff)), 1e-12));
    return ag::scale(ag::sum_all(norms), 1.0 / static_cast<double>(B));
}

Var batch_mean(const Var& v) {
    return ag::scale(ag::sum_all(v), 1.0 / static_cast<double>(v->value.dim(0)));
}

Var flatten_batch(const Var& x) {
    const auto& s = x->value.shape();
    long f = 1;
    for (size_t i = 1; i < s.size(); ++i) f *= s[i];
    return ag::reshape(x, {s[0], f});
}

} // namespace

// ---- model impl ----

ReconstructionModel::ReconstructionModel(NetworkConfig cfg, long n, long channels, long slots,
                                         std::uint64_t seed)
    : cfg_(std::move(cfg)), n_(n), channels_(channels), slots_(slots) {
    cfg_.validate();
    if (n < 1 || channels < 1 || slots < 1)
        throw std::invalid_argument("ReconstructionModel: bad input dimensions");
    impl_ = std::make_shared<Impl>(cfg_, n, channels, seed);
}

namespace {

struct Batch {
    std::vector<Var> slots; // N tensors of (B, C, n, n)
    Var target;             // (B, C, n, n)
    Tensor mask;            // (B, N)
};

Batch make_batch(const std::vector<ModelInput>& inputs, const std::vector<long>& idx,
                 bool holiday_masking) {
    const long B = static_cast<long>(idx.size());
    const long N = static_cast<long>(inputs[0].slots.size());
    const auto& shape = inputs[0].target.shape(); // (C, n, n)
    const long C = shape[0], n = shape[1];
    Batch batch;
    batch.mask = Tensor::ones({B, N});

    std::vector<Tensor> slot_data(static_cast<size_t>(N), Tensor({B, C, n, n}));
    Tensor target({B, C, n, n});
    const long sample = C * n * n;
    for (long b = 0; b < B; ++b) {
        const ModelInput& in = inputs[static_cast<size_t>(idx[static_cast<size_t>(b)])];
        for (long s = 0; s < N; ++s) {
            std::copy_n(in.slots[static_cast<size_t>(s)].data(), sample,
                        slot_data[static_cast<size_t>(s)].data() + b * sample);
            if (holiday_masking && !in.mask[static_cast<size_t>(s)]) batch.mask.at2(b, s) = 0.0;
        }
        std::copy_n(in.target.data(), sample, target.data() + b * sample);
    }
    batch.slots.reserve(static_cast<size_t>(N));
    for (auto& t : slot_data) batch.slots.push_back(ag::constant(std::move(t)));
    batch.target = ag::constant(std::move(target));
    return batch;
}

void check_inputs(const std::vector<ModelInput>& inputs) {
    if (inputs.empty()) throw std::invalid_argument("train: empty training set");
    const auto& shape = inputs[0].target.shape();
    const size_t N = inputs[0].slots.size();
    for (const auto& in : inputs) {
        if (in.slots.size() != N || in.mask.size() != N)
            throw std::invalid_argument("train: inconsistent slot counts");
        if (in.target.shape() != shape)
            throw std::invalid_argument("train: inconsistent target shapes");
    }
}

} // namespace

ReconstructionModel ReconstructionModel::train(const std::vector<ModelInput>& inputs,
                                               const NetworkConfig& cfg, std::uint64_t seed,
                                               const std::function<void(const EpochStats&)>& on_epoch) {
    check_inputs(inputs);
    const auto& shape = inputs[0].target.shape();
    const long C = shape[0], n = shape[1];
    const long N = static_cast<long>(inputs[0].slots.size());

    ReconstructionModel model(cfg, n, C, N, seed);
    Impl& nets = *model.impl_;

    Adam adam_g(nets.generator_params(), cfg.adam);
    Adam adam_d(nets.disc.params.vars(), cfg.adam);

    Rng shuffle_rng = Rng(seed).derive(0x5717);
    Rng gp_rng = Rng(seed).derive(0x69);

    std::vector<long> order(inputs.size());
    std::iota(order.begin(), order.end(), 0);

    auto critic_fn = [&nets](const Var& x) { return nets.disc.forward(x); };

    for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the epoch substream keeps runs reproducible.
        for (long i = static_cast<long>(order.size()) - 1; i > 0; --i) {
            long j = shuffle_rng.uniform_int(0, i);
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
        }

        EpochStats stats;
        stats.epoch = epoch;
        long seen = 0;
        for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(cfg.batch_size)) {
            size_t hi = std::min(order.size(), pos + static_cast<size_t>(cfg.batch_size));
            std::vector<long> idx(order.begin() + static_cast<long>(pos),
                                  order.begin() + static_cast<long>(hi));
            const long B = static_cast<long>(idx.size());
            Batch batch = make_batch(inputs, idx, cfg.holiday_masking);

            // Generator pass (shared by the critic and generator updates).
            Encoder::Output enc = nets.g_enc.forward(batch.slots, batch.mask);
            Var x_rec = nets.decoder.forward(enc.combined);
            Var z = enc.latent;
            Encoder::Output enc2 =
                nets.e_enc.forward({x_rec}, Tensor::ones({B, 1}));
            Var z_rec = enc2.latent;

            // Critic updates on detached reconstructions.
            double d_val = 0.0, pen_val = 0.0;
            for (long u = 0; u < cfg.critic_updates_per_gen; ++u) {
                Var fake = ag::detach(x_rec);
                Var f_real = nets.disc.forward(batch.target);
                Var f_fake = nets.disc.forward(fake);
                Var pen = gradient_penalty(critic_fn, batch.target->value, fake->value, gp_rng);
                Var d_obj = ag::add(ag::sub(batch_mean(f_fake), batch_mean(f_real)),
                                    ag::scale(pen, cfg.gp_coefficient));
                ag::GradMap dgrads = ag::backward(d_obj);
                adam_d.step(dgrads);
                pen_val = ag::scalar_value(pen);
                d_val = ag::scalar_value(batch_mean(f_real)) - ag::scalar_value(batch_mean(f_fake)) -
                        cfg.gp_coefficient * pen_val;
            }

            // Generator/encoder update against the refreshed critic.
            Var f_fake2 = nets.disc.forward(x_rec);
            Var contextual = mean_l2_rows(flatten_batch(x_rec), flatten_batch(batch.target));
            Var latent = mean_l2_rows(z, z_rec);
            Var adversarial = batch_mean(f_fake2);
            Var loss_g = ag::add(ag::add(ag::scale(contextual, cfg.w_contextual),
                                         ag::scale(latent, cfg.w_latent)),
                                 ag::scale(adversarial, cfg.w_adversarial));
            ag::GradMap ggrads = ag::backward(loss_g);
            adam_g.step(ggrads);

            const double ctx_v = ag::scalar_value(contextual);
            const double lat_v = ag::scalar_value(latent);
            const double adv_v = ag::scalar_value(adversarial);
            const double lg_v = ag::scalar_value(loss_g);
            if (!std::isfinite(lg_v) || !std::isfinite(d_val))
                throw TrainingDivergence(epoch, "train: non-finite loss at epoch " +
                                                    std::to_string(epoch) + " (L_G=" +
                                                    std::to_string(lg_v) + ", L_D=" +
                                                    std::to_string(d_val) + ")");

            stats.contextual += ctx_v * B;
            stats.latent += lat_v * B;
            stats.adversarial += adv_v * B;
            stats.loss_g += lg_v * B;
            stats.loss_d += d_val * B;
            stats.grad_penalty += pen_val * B;
            seen += B;
        }
        const double inv = 1.0 / static_cast<double>(seen);
        stats.contextual *= inv;
        stats.latent *= inv;
        stats.adversarial *= inv;
        stats.loss_g *= inv;
        stats.loss_d *= inv;
        stats.grad_penalty *= inv;
        model.history_.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }
    return model;
}

ForwardResult ReconstructionModel::forward_single(const ModelInput& input) const {
    ag::NoGradGuard guard;
    Batch batch = make_batch({input}, {0}, cfg_.holiday_masking);
    Encoder::Output enc = impl_->g_enc.forward(batch.slots, batch.mask);
    Var x_rec = impl_->decoder.forward(enc.combined);

    ForwardResult res;
    res.reconstruction = x_rec->value.reshaped({channels_, n_, n_});
    res.latent = enc.latent->value.reshaped({enc.latent->value.dim(1)});
    for (const auto& a : enc.alphas) res.attention.push_back(a.reshaped({a.dim(1)}));
    return res;
}

ReconstructionResult ReconstructionModel::reconstruct(const std::vector<ModelInput>& inputs) const {
    check_inputs(inputs);
    ag::NoGradGuard guard;
    ReconstructionResult out;
    out.target_steps.reserve(inputs.size());
    out.reconstructions.reserve(inputs.size());
    out.residuals.reserve(inputs.size());

    const long sample = channels_ * n_ * n_;
    for (size_t pos = 0; pos < inputs.size(); pos += static_cast<size_t>(cfg_.batch_size)) {
        size_t hi = std::min(inputs.size(), pos + static_cast<size_t>(cfg_.batch_size));
        std::vector<long> idx;
        for (size_t i = pos; i < hi; ++i) idx.push_back(static_cast<long>(i));
        Batch batch = make_batch(inputs, idx, cfg_.holiday_masking);
        Encoder::Output enc = impl_->g_enc.forward(batch.slots, batch.mask);
        Var x_rec = impl_->decoder.forward(enc.combined);
        for (size_t i = pos; i < hi; ++i) {
            const long b = static_cast<long>(i - pos);
            Tensor rec({channels_, n_, n_});
            std::copy_n(x_rec->value.data() + b * sample, sample, rec.data());
            const ModelInput& in = inputs[i];
            out.target_steps.push_back(in.target_step);
            out.residuals.push_back(residual_first_channel(in.target, rec));
            out.reconstructions.push_back(std::move(rec));
        }
    }
    return out;
}

// ---- persistence ----

namespace {

constexpr char kParamMagic[8] = {'R', 'S', 'M', 'G', 'N', 'P', '0', '1'};

nlohmann::json adam_to_json(const AdamConfig& a) {
    return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}

AdamConfig adam_from_json(const nlohmann::json& j) {
    AdamConfig a;
    a.lr = j.value("lr", a.lr);
    a.beta1 = j.value("beta1", a.beta1);
    a.beta2 = j.value("beta2", a.beta2);
    a.eps = j.value("eps", a.eps);
    return a;
}

} // namespace

nlohmann::json network_config_to_json(const NetworkConfig& c) {
    nlohmann::json j;
    j["conv_channels"] = c.conv_channels;
    j["conv_strides"] = c.conv_strides;
    j["kernel"] = c.kernel;
    j["disc_channels"] = c.disc_channels;
    j["loss_weights"] = {c.w_contextual, c.w_latent, c.w_adversarial};
    j["gp_coefficient"] = c.gp_coefficient;
    j["attention_rescale"] = c.attention_rescale;
    j["adam"] = adam_to_json(c.adam);
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["critic_updates_per_gen"] = c.critic_updates_per_gen;
    j["holiday_masking"] = c.holiday_masking;
    return j;
}

NetworkConfig network_config_from_json(const nlohmann::json& j) {
    NetworkConfig c;
    c.conv_channels = j.value("conv_channels", c.conv_channels);
    c.conv_strides = j.value("conv_strides", c.conv_strides);
    c.kernel = j.value("kernel", c.kernel);
    c.disc_channels = j.value("disc_channels", c.disc_channels);
    if (j.contains("loss_weights")) {
        auto w = j.at("loss_weights").get<std::vector<double>>();
        if (w.size() != 3)
            throw std::invalid_argument("NetworkConfig: loss_weights must have 3 entries");
        c.w_contextual = w[0];
        c.w_latent = w[1];
        c.w_adversarial = w[2];
    }
    c.gp_coefficient = j.value("gp_coefficient", c.gp_coefficient);
    c.attention_rescale = j.value("attention_rescale", c.attention_rescale);
    if (j.contains("adam")) c.adam = adam_from_json(j.at("adam"));
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.critic_updates_per_gen = j.value("critic_updates_per_gen", c.critic_updates_per_gen);
    c.holiday_masking = j.value("holiday_masking", c.holiday_masking);
    c.validate();
    return c;
}

void ReconstructionModel::save(const std::string& dir) const {
    fs::create_directories(dir);

    nlohmann::json meta;
    meta["format_version"] = 1;
    meta["n"] = n_;
    meta["channels"] = channels_;
    meta["slots"] = slots_;
    meta["network"] = network_config_to_json(cfg_);
    std::ofstream cf(fs::path(dir) / "model_config.json");
    if (!cf) throw std::runtime_error("save: cannot write model_config.json");
    cf << meta.dump(2) << "\n";

    auto named = impl_->named_params();
    std::ofstream pf(fs::path(dir) / "params.bin", std::ios::binary);
    if (!pf) throw std::runtime_error("save: cannot write params.bin");
    pf.write(kParamMagic, 8);
    std::uint64_t count = named.size();
    pf.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (const auto& [name, var] : named) {
        std::uint32_t nlen = static_cast<std::uint32_t>(name.size());
        pf.write(reinterpret_cast<const char*>(&nlen), sizeof(nlen));
        pf.write(name.data(), nlen);
        std::uint32_t rank = static_cast<std::uint32_t>(var->value.rank());
        pf.write(reinterpret_cast<const char*>(&rank), sizeof(rank));
        for (long d : var->value.shape()) {
            std::int64_t dd = d;
            pf.write(reinterpret_cast<const char*>(&dd), sizeof(dd));
        }
        pf.write(reinterpret_cast<const char*>(var->value.data()),
                 static_cast<std::streamsize>(var->value.numel() * sizeof(double)));
    }
    if (!pf) throw std::runtime_error("save: write failed for params.bin");

    std::ofstream hf(fs::path(dir) / "history.csv");
    hf << "epoch,contextual,latent,adversarial,loss_g,loss_d,grad_penalty\n";
    hf.precision(12);
    for (const auto& s : history_)
        hf << s.epoch << "," << s.contextual << "," << s.latent << "," << s.adversarial << ","
           << s.loss_g << "," << s.loss_d << "," << s.grad_penalty << "\n";
}

ReconstructionModel ReconstructionModel::load(const std::string& dir) {
    std::ifstream cf(fs::path(dir) / "model_config.json");
    if (!cf) throw std::runtime_error("load: cannot open model_config.json in " + dir);
    nlohmann::json meta;
    cf >> meta;
    if (meta.value("format_version", 0) != 1)
        throw std::runtime_error("load: unsupported checkpoint version");

    NetworkConfig cfg = network_config_from_json(meta.at("network"));
    ReconstructionModel model(cfg, meta.at("n").get<long>(), meta.at("channels").get<long>(),
                              meta.at("slots").get<long>(), /*seed=*/0);

    std::ifstream pf(fs::path(dir) / "params.bin", std::ios::binary);
    if (!pf) throw std::runtime_error("load: cannot open params.bin in " + dir);
    char magic[8];
    pf.read(magic, 8);
    if (std::memcmp(magic, kParamMagic, 8) != 0)
        throw std::runtime_error("load: bad params.bin magic");
    std::uint64_t count = 0;
    pf.read(reinterpret_cast<char*>(&count), sizeof(count));

    std::map<std::string, Var> by_name;
    for (const auto& [name, var] : model.impl_->named_params()) by_name[name] = var;
    if (count != by_name.size())
        throw std::runtime_error("load: parameter count mismatch");

    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint32_t nlen = 0;
        pf.read(reinterpret_cast<char*>(&nlen), sizeof(nlen));
        std::string name(nlen, '\0');
        pf.read(name.data(), nlen);
        std::uint32_t rank = 0;
        pf.read(reinterpret_cast<char*>(&rank), sizeof(rank));
        std::vector<long> shape(rank);
        for (auto& d : shape) {
            std::int64_t dd = 0;
            pf.read(reinterpret_cast<char*>(&dd), sizeof(dd));
            d = static_cast<long>(dd);
        }
        auto it = by_name.find(name);
        if (it == by_name.end()) throw std::runtime_error("load: unknown parameter " + name);
        if (it->second->value.shape() != shape)
            throw std::runtime_error("load: shape mismatch for " + name);
        pf.read(reinterpret_cast<char*>(it->second->value.data()),
                static_cast<std::streamsize>(it->second->value.numel() * sizeof(double)));
    }
    if (!pf) throw std::runtime_error("load: truncated params.bin");

    // History is informational; tolerate a missing file.
    std::ifstream hf(fs::path(dir) / "history.csv");
    if (hf) {
        std::string line;
        std::getline(hf, line); // header
        while (std::getline(hf, line)) {
            if (line.empty()) continue;
            EpochStats s;
            std::stringstream ss(line);
            char comma;
            ss >> s.epoch >> comma >> s.contextual >> comma >> s.latent >> comma >> s.adversarial >>
                comma >> s.loss_g >> comma >> s.loss_d >> comma >> s.grad_penalty;
            model.history_.push_back(s);
        }
    }
    return model;
}

} // namespace rsmgan
