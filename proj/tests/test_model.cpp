#include "rsmgan/model.hpp"

#include "rsmgan/model_impl.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace rsmgan;
namespace ag = rsmgan::autograd;

namespace {

NetworkConfig tiny_config() {
    NetworkConfig cfg;
    cfg.conv_channels = {4, 8};
    cfg.conv_strides = {1, 2};
    cfg.disc_channels = {4, 8};
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.adam.lr = 1e-3;
    return cfg;
}

std::vector<ModelInput> toy_inputs(long count, long slots, long n, long C, std::uint64_t seed,
                                   bool structured = true) {
    Rng rng(seed);
    std::vector<ModelInput> inputs;
    for (long k = 0; k < count; ++k) {
        ModelInput in;
        in.target_step = k;
        // A smooth pattern plus noise so a small model can learn it.
        Tensor base({C, n, n});
        double phase = structured ? 0.35 * static_cast<double>(k) : 0.0;
        for (long c = 0; c < C; ++c)
            for (long i = 0; i < n; ++i)
                for (long j = 0; j < n; ++j)
                    base.at3(c, i, j) = std::sin(phase + 0.5 * static_cast<double>(i + j) +
                                                 0.2 * static_cast<double>(c)) +
                                        0.05 * rng.normal();
        for (long s = 0; s < slots; ++s) {
            in.slots.push_back(base);
            in.mask.push_back(1);
        }
        in.target = base;
        inputs.push_back(std::move(in));
    }
    return inputs;
}

} // namespace

TEST_CASE("defaults match the reference training setup") {
    NetworkConfig net;
    CHECK(net.epochs == 300);
    CHECK(net.batch_size == 32);
    CHECK(net.w_contextual == 50.0);
    CHECK(net.w_latent == 1.0);
    CHECK(net.w_adversarial == 1.0);
    CHECK(net.gp_coefficient == 10.0);
    CHECK(net.attention_rescale == 5.0);
    CHECK(net.conv_channels == std::vector<long>{32, 64, 128, 256});
    CHECK(net.critic_updates_per_gen == 1);

    McmConfig mcm;
    CHECK(mcm.windows == std::vector<long>{5, 10, 30});
    CHECK(mcm.step == 5);
    CHECK(mcm.history == 4);
    CHECK(mcm.smoothing_width == 6);
}

TEST_CASE("network config validation") {
    NetworkConfig cfg = tiny_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.conv_strides = {1};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.w_contextual = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.kernel = 4;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("generator forward shape and determinism for n=10") {
    NetworkConfig cfg;
    cfg.conv_channels = {8, 16, 16, 16};
    cfg.conv_strides = {1, 2, 2, 2};
    cfg.disc_channels = {8, 16, 16};
    ReconstructionModel model(cfg, /*n=*/10, /*channels=*/3, /*slots=*/5, /*seed=*/7);
    auto inputs = toy_inputs(1, 5, 10, 3, 3);
    ForwardResult a = model.forward_single(inputs[0]);
    CHECK(a.reconstruction.shape() == std::vector<long>{3, 10, 10});
    CHECK(a.reconstruction.all_finite());
    CHECK(a.latent.rank() == 1);

    // Attention weights sum to one per recurrent layer.
    REQUIRE(a.attention.size() == 4);
    for (const auto& alpha : a.attention) {
        double sum = 0;
        for (long i = 0; i < alpha.numel(); ++i) sum += alpha[i];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }

    ReconstructionModel model2(cfg, 10, 3, 5, /*seed=*/7);
    ForwardResult b = model2.forward_single(inputs[0]);
    for (long i = 0; i < a.reconstruction.numel(); ++i)
        CHECK(a.reconstruction[i] == b.reconstruction[i]); // same seed, same output

    ModelInput bad = inputs[0];
    bad.target = Tensor({3, 6, 6});
    bad.slots.assign(5, bad.target);
    CHECK_THROWS(model.forward_single(bad));
}

TEST_CASE("compute_losses: perfect reconstruction and zero critic") {
    NetworkConfig cfg = tiny_config();
    Rng rng(5);
    std::vector<Tensor> x, z;
    for (int i = 0; i < 3; ++i) {
        Tensor t({2, 4, 4});
        for (long j = 0; j < t.numel(); ++j) t[j] = rng.normal();
        x.push_back(t);
        Tensor zt({6});
        for (long j = 0; j < 6; ++j) zt[j] = rng.normal();
        z.push_back(zt);
    }
    LossBreakdown lb = compute_losses(x, x, z, z, {0, 0, 0}, {0, 0, 0}, 0.0, cfg);
    CHECK(lb.contextual == 0.0);
    CHECK(lb.latent == 0.0);
    CHECK(lb.adversarial == 0.0);
    CHECK(lb.loss_g == 0.0);
    CHECK(lb.loss_d == 0.0);
}

TEST_CASE("compute_losses: weighted decomposition and contextual linearity") {
    NetworkConfig cfg = tiny_config();
    cfg.w_contextual = 50.0;
    cfg.w_latent = 1.0;
    cfg.w_adversarial = 1.0;
    Rng rng(6);
    std::vector<Tensor> x, xr, z, zr;
    for (int i = 0; i < 4; ++i) {
        Tensor a({2, 3, 3}), b({2, 3, 3}), c({5}), d({5});
        for (long j = 0; j < a.numel(); ++j) {
            a[j] = rng.normal();
            b[j] = rng.normal();
        }
        for (long j = 0; j < 5; ++j) {
            c[j] = rng.normal();
            d[j] = rng.normal();
        }
        x.push_back(a);
        xr.push_back(b);
        z.push_back(c);
        zr.push_back(d);
    }
    std::vector<double> cr{0.3, -0.2, 0.5, 0.1}, cf{0.4, 0.1, -0.3, 0.2};
    LossBreakdown lb = compute_losses(x, xr, z, zr, cr, cf, 0.25, cfg);
    CHECK(lb.loss_g ==
          doctest::Approx(50.0 * lb.contextual + lb.latent + lb.adversarial).epsilon(1e-6));
    CHECK(lb.loss_d == doctest::Approx((0.3 - 0.2 + 0.5 + 0.1) / 4.0 -
                                       (0.4 + 0.1 - 0.3 + 0.2) / 4.0 - cfg.gp_coefficient * 0.25)
                           .epsilon(1e-9));

    // Scaling only the contextual error moves L_G by 50x the increment.
    std::vector<Tensor> xr2 = xr;
    for (size_t i = 0; i < xr2.size(); ++i)
        for (long j = 0; j < xr2[i].numel(); ++j)
            xr2[i][j] = x[i][j] + 2.0 * (xr[i][j] - x[i][j]); // double each deviation
    LossBreakdown lb2 = compute_losses(x, xr2, z, zr, cr, cf, 0.25, cfg);
    CHECK(lb2.contextual == doctest::Approx(2.0 * lb.contextual).epsilon(1e-9));
    CHECK(lb2.loss_g - lb.loss_g == doctest::Approx(50.0 * lb.contextual).epsilon(1e-6));
}

TEST_CASE("training changes parameters and reduces contextual loss on toy data") {
    NetworkConfig cfg = tiny_config();
    cfg.epochs = 5;
    cfg.batch_size = 16;
    cfg.adam.lr = 2e-3;
    auto inputs = toy_inputs(96, 3, 6, 2, 11);

    std::vector<EpochStats> history;
    ReconstructionModel model = ReconstructionModel::train(
        inputs, cfg, /*seed=*/21, [&history](const EpochStats& s) { history.push_back(s); });
    REQUIRE(history.size() == 5);
    CHECK(history.back().contextual < history.front().contextual);
    for (const auto& s : history) {
        CHECK(std::isfinite(s.loss_g));
        CHECK(std::isfinite(s.loss_d));
        CHECK(s.grad_penalty >= 0.0); // non-negative penalty every epoch
    }

    // One epoch on one batch moves parameters.
    NetworkConfig cfg1 = tiny_config();
    cfg1.epochs = 1;
    cfg1.batch_size = 8;
    auto small = toy_inputs(8, 3, 6, 2, 12);
    ReconstructionModel before(cfg1, 6, 2, 3, 33);
    auto before_params = before.impl().named_params();
    std::vector<Tensor> snapshot;
    for (const auto& e : before_params) snapshot.push_back(e.second->value);
    ReconstructionModel after = ReconstructionModel::train(small, cfg1, 33);
    auto after_params = after.impl().named_params();
    REQUIRE(snapshot.size() == after_params.size());
    double total_delta = 0.0;
    for (size_t i = 0; i < snapshot.size(); ++i)
        for (long j = 0; j < snapshot[i].numel(); ++j)
            total_delta += std::abs(snapshot[i][j] - after_params[i].second->value[j]);
    CHECK(total_delta > 0.0);
}

TEST_CASE("training is deterministic under a fixed seed") {
    NetworkConfig cfg = tiny_config();
    cfg.epochs = 2;
    auto inputs = toy_inputs(24, 3, 5, 2, 14);
    ReconstructionModel a = ReconstructionModel::train(inputs, cfg, 5);
    ReconstructionModel b = ReconstructionModel::train(inputs, cfg, 5);
    ReconstructionResult ra = a.reconstruct(inputs);
    ReconstructionResult rb = b.reconstruct(inputs);
    for (size_t i = 0; i < ra.reconstructions.size(); ++i)
        for (long j = 0; j < ra.reconstructions[i].numel(); ++j)
            CHECK(ra.reconstructions[i][j] == rb.reconstructions[i][j]);
}

TEST_CASE("empty training set is rejected") {
    CHECK_THROWS_AS(ReconstructionModel::train({}, tiny_config(), 1), std::invalid_argument);
}

TEST_CASE("batch-of-one reconstruction equals batched") {
    NetworkConfig cfg = tiny_config();
    cfg.epochs = 1;
    auto inputs = toy_inputs(10, 3, 5, 2, 15);
    ReconstructionModel model = ReconstructionModel::train(inputs, cfg, 9);

    ReconstructionResult batched = model.reconstruct(inputs);
    for (size_t i = 0; i < inputs.size(); ++i) {
        ReconstructionResult single = model.reconstruct({inputs[i]});
        for (long j = 0; j < single.reconstructions[0].numel(); ++j)
            CHECK(single.reconstructions[0][j] ==
                  doctest::Approx(batched.reconstructions[i][j]).epsilon(1e-5));
    }
}

TEST_CASE("residuals equal target minus reconstruction on channel zero") {
    NetworkConfig cfg = tiny_config();
    ReconstructionModel model(cfg, 5, 2, 3, 77);
    auto inputs = toy_inputs(4, 3, 5, 2, 16);
    ReconstructionResult rec = model.reconstruct(inputs);
    for (size_t i = 0; i < inputs.size(); ++i)
        for (long r = 0; r < 5; ++r)
            for (long c = 0; c < 5; ++c)
                CHECK(rec.residuals[i].at2(r, c) ==
                      doctest::Approx(inputs[i].target.at3(0, r, c) -
                                      rec.reconstructions[i].at3(0, r, c)));
}

TEST_CASE("masked slot perturbation does not change the reconstruction") {
    NetworkConfig cfg = tiny_config();
    cfg.holiday_masking = true;
    ReconstructionModel model(cfg, 5, 2, 4, 31);
    auto inputs = toy_inputs(1, 4, 5, 2, 17);
    inputs[0].mask[1] = 0;

    ForwardResult base = model.forward_single(inputs[0]);
    ModelInput perturbed = inputs[0];
    for (long j = 0; j < perturbed.slots[1].numel(); ++j) perturbed.slots[1][j] += 50.0;
    ForwardResult moved = model.forward_single(perturbed);
    for (long j = 0; j < base.reconstruction.numel(); ++j)
        CHECK(base.reconstruction[j] == moved.reconstruction[j]); // exact nullity

    // With masking disabled the same perturbation must matter.
    NetworkConfig cfg2 = tiny_config();
    cfg2.holiday_masking = false;
    ReconstructionModel unmasked(cfg2, 5, 2, 4, 31);
    ForwardResult u1 = unmasked.forward_single(inputs[0]);
    ForwardResult u2 = unmasked.forward_single(perturbed);
    double delta = 0;
    for (long j = 0; j < u1.reconstruction.numel(); ++j)
        delta += std::abs(u1.reconstruction[j] - u2.reconstruction[j]);
    CHECK(delta > 0.0);
}

TEST_CASE("checkpoint round trip preserves behavior") {
    NetworkConfig cfg = tiny_config();
    cfg.epochs = 2;
    auto inputs = toy_inputs(16, 3, 5, 2, 18);
    ReconstructionModel model = ReconstructionModel::train(inputs, cfg, 4);

    const std::string dir = "/tmp/rsmgan_test_checkpoint";
    std::filesystem::remove_all(dir);
    model.save(dir);
    ReconstructionModel loaded = ReconstructionModel::load(dir);
    CHECK(loaded.history().size() == model.history().size());
    CHECK(loaded.input_size() == model.input_size());

    ReconstructionResult a = model.reconstruct(inputs);
    ReconstructionResult b = loaded.reconstruct(inputs);
    for (size_t i = 0; i < a.reconstructions.size(); ++i)
        for (long j = 0; j < a.reconstructions[i].numel(); ++j)
            CHECK(a.reconstructions[i][j] == b.reconstructions[i][j]);

    CHECK_THROWS(ReconstructionModel::load("/tmp/rsmgan_no_such_checkpoint"));
}

TEST_CASE("analytic gradients of the reconstruction objective match finite differences") {
    // Tiny network; w1*contextual + w2*latent path (the adversarial path is
    // covered by the critic finite-difference test).
    NetworkConfig cfg;
    cfg.conv_channels = {2, 3};
    cfg.conv_strides = {1, 2};
    cfg.disc_channels = {2};
    ReconstructionModel model(cfg, 4, 2, 3, 51);
    auto& impl = model.impl();

    auto inputs = toy_inputs(2, 3, 4, 2, 19);

    auto loss_value = [&]() {
        std::vector<ag::Var> slots;
        const long B = 2, C = 2, n = 4;
        for (long s = 0; s < 3; ++s) {
            Tensor t({B, C, n, n});
            for (long b = 0; b < B; ++b)
                std::copy_n(inputs[static_cast<size_t>(b)].slots[static_cast<size_t>(s)].data(),
                            C * n * n, t.data() + b * C * n * n);
            slots.push_back(ag::constant(t));
        }
        Tensor target({B, C, n, n});
        for (long b = 0; b < B; ++b)
            std::copy_n(inputs[static_cast<size_t>(b)].target.data(), C * n * n,
                        target.data() + b * C * n * n);

        Encoder::Output enc = impl.g_enc.forward(slots, Tensor::ones({B, 3}));
        ag::Var x_rec = impl.decoder.forward(enc.combined);
        Encoder::Output enc2 = impl.e_enc.forward({x_rec}, Tensor::ones({B, 1}));

        ag::Var diff = ag::sub(ag::reshape(x_rec, {B, C * n * n}),
                               ag::reshape(ag::constant(target), {B, C * n * n}));
        ag::Var ctx = ag::scale(
            ag::sum_all(ag::sqrt_op(ag::add_scalar(ag::row_sum(ag::mul(diff, diff)), 1e-12))),
            1.0 / B);
        ag::Var zdiff = ag::sub(enc.latent, enc2.latent);
        ag::Var lat = ag::scale(
            ag::sum_all(ag::sqrt_op(ag::add_scalar(ag::row_sum(ag::mul(zdiff, zdiff)), 1e-12))),
            1.0 / B);
        return ag::add(ag::scale(ctx, cfg.w_contextual), ag::scale(lat, cfg.w_latent));
    };

    ag::Var loss = loss_value();
    ag::GradMap grads = ag::backward(loss);

    long checked = 0;
    for (const auto& entry : impl.named_params()) {
        if (entry.first.rfind("disc", 0) == 0) continue;
        Tensor analytic = ag::grad_of(grads, entry.second);
        for (long i = 0; i < std::min<long>(entry.second->value.numel(), 3); ++i) {
            const double orig = entry.second->value[i];
            const double eps = 1e-6;
            entry.second->value[i] = orig + eps;
            double up = ag::scalar_value(loss_value());
            entry.second->value[i] = orig - eps;
            double down = ag::scalar_value(loss_value());
            entry.second->value[i] = orig;
            double numeric = (up - down) / (2.0 * eps);
            double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-3});
            CHECK(std::abs(numeric - analytic[i]) / denom < 1e-4);
            ++checked;
        }
    }
    CHECK(checked > 30);
}
