#include "rsmgan/nets.hpp"

#include "rsmgan/model.hpp"

#include <stdexcept>

namespace rsmgan {

namespace ag = autograd;

namespace {
constexpr double kLeakySlope = 0.2;
}

Encoder::Encoder(const std::string& name, const NetworkConfig& cfg, long n, long in_c, Rng rng)
    : in_channels(in_c), input_hw(n), rescale(cfg.attention_rescale) {
    const long L = static_cast<long>(cfg.conv_channels.size());
    long prev_c = in_c;
    long hw = n;
    for (long l = 0; l < L; ++l) {
        long c = cfg.conv_channels[static_cast<size_t>(l)];
        long stride = cfg.conv_strides[static_cast<size_t>(l)];
        long pad = cfg.kernel / 2;
        hw = Conv2d::out_size(hw, cfg.kernel, stride, pad);
        if (hw < 1)
            throw std::invalid_argument("Encoder: spatial size collapsed at layer " +
                                        std::to_string(l + 1));
        convs.emplace_back(params, name + ".conv" + std::to_string(l + 1), prev_c, c, cfg.kernel,
                           stride, pad, rng);
        lstms.emplace_back(params, name + ".lstm" + std::to_string(l + 1), c, c, rng);
        spatial.push_back(hw);
        prev_c = c;
    }
}

Encoder::Output Encoder::forward(const std::vector<Var>& slots, const Tensor& mask) const {
    if (slots.empty()) throw std::invalid_argument("Encoder: no input slots");
    const long L = static_cast<long>(convs.size());
    Output out;
    out.combined.reserve(static_cast<size_t>(L));
    out.alphas.reserve(static_cast<size_t>(L));

    std::vector<Var> features = slots;
    for (long l = 0; l < L; ++l) {
        std::vector<Var> conv_out;
        conv_out.reserve(features.size());
        for (const auto& f : features)
            conv_out.push_back(ag::leaky_relu(convs[static_cast<size_t>(l)].forward(f), kLeakySlope));
        std::vector<Var> hidden = lstms[static_cast<size_t>(l)].run(conv_out, &mask);
        AttentionResult att = attention_combine(hidden, mask, rescale);
        out.combined.push_back(att.combined);
        out.alphas.push_back(att.weights);
        features = std::move(conv_out);
    }
    const auto& last = out.combined.back();
    const auto& s = last->value.shape();
    out.latent = ag::reshape(last, {s[0], s[1] * s[2] * s[3]});
    return out;
}

Decoder::Decoder(const std::string& name, const NetworkConfig& cfg, long n, long out_c, Rng rng)
    : out_channels(out_c) {
    const long L = static_cast<long>(cfg.conv_channels.size());
    spatial.push_back(n);
    long hw = n;
    for (long l = 0; l < L; ++l) {
        long stride = cfg.conv_strides[static_cast<size_t>(l)];
        long pad = cfg.kernel / 2;
        hw = Conv2d::out_size(hw, cfg.kernel, stride, pad);
        spatial.push_back(hw);
    }
    deconvs.resize(static_cast<size_t>(L));
    for (long l = L - 1; l >= 0; --l) {
        long c_in = cfg.conv_channels[static_cast<size_t>(l)];
        if (l != L - 1) c_in *= 2; // concatenated with the encoder's combined map
        long c_out = l > 0 ? cfg.conv_channels[static_cast<size_t>(l - 1)] : out_c;
        long stride = cfg.conv_strides[static_cast<size_t>(l)];
        long pad = cfg.kernel / 2;
        deconvs[static_cast<size_t>(l)] = ConvTranspose2d(
            params, name + ".deconv" + std::to_string(l + 1), c_in, c_out, cfg.kernel, stride, pad,
            rng);
    }
}

Var Decoder::forward(const std::vector<Var>& combined) const {
    const long L = static_cast<long>(deconvs.size());
    if (static_cast<long>(combined.size()) != L)
        throw std::invalid_argument("Decoder: expected one combined map per layer");
    Var cur = combined.back();
    for (long l = L - 1; l >= 0; --l) {
        if (l != L - 1) cur = ag::concat_channels(cur, combined[static_cast<size_t>(l)]);
        Var up = deconvs[static_cast<size_t>(l)].forward(cur, spatial[static_cast<size_t>(l)],
                                                         spatial[static_cast<size_t>(l)]);
        cur = l > 0 ? ag::leaky_relu(up, kLeakySlope) : up; // final layer stays linear
    }
    return cur;
}

Discriminator::Discriminator(const std::string& name, const NetworkConfig& cfg, long n, long in_c,
                             Rng rng)
    : in_channels(in_c), input_hw(n) {
    long prev_c = in_c;
    long hw = n;
    for (size_t l = 0; l < cfg.disc_channels.size(); ++l) {
        long c = cfg.disc_channels[l];
        long pad = cfg.kernel / 2;
        hw = Conv2d::out_size(hw, cfg.kernel, 2, pad);
        if (hw < 1) throw std::invalid_argument("Discriminator: spatial size collapsed");
        convs.emplace_back(params, name + ".conv" + std::to_string(l + 1), prev_c, c, cfg.kernel, 2,
                           pad, rng);
        prev_c = c;
    }
    head = Dense(params, name + ".head", prev_c * hw * hw, 1, rng);
}

Var Discriminator::forward(const Var& x) const {
    Var cur = x;
    for (const auto& conv : convs) cur = ag::leaky_relu(conv.forward(cur), kLeakySlope);
    const auto& s = cur->value.shape();
    Var flat = ag::reshape(cur, {s[0], s[1] * s[2] * s[3]});
    return head.forward(flat);
}

} // namespace rsmgan
