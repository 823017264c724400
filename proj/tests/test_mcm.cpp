#include "rsmgan/mcm.hpp"

#include "rsmgan/rng.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace rsmgan;

namespace {

SeriesFrame random_frame(long n, long T, std::uint64_t seed) {
    SeriesFrame f(n, T);
    Rng rng(seed);
    for (long i = 0; i < n; ++i)
        for (long t = 0; t < T; ++t) f.at(i, t) = rng.normal();
    return f;
}

McmConfig small_config() {
    McmConfig c;
    c.windows = {3, 5, 8};
    c.step = 2;
    c.history = 2;
    c.smoothing_width = 6;
    return c;
}

} // namespace

TEST_CASE("McmConfig validation") {
    McmConfig c;
    CHECK_NOTHROW(c.validate());
    c.windows = {10, 5};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = McmConfig{};
    c.step = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = McmConfig{};
    c.seasonal = {{3, 1}}; // shorter than p=5
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = McmConfig{};
    c.seasonal = {{1441, 1}}; // not a multiple of p
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = McmConfig{};
    CHECK(c.slot_count() == 5); // h=4 + current, no seasonal patterns
}

TEST_CASE("build_mcm: all-zero input gives all-zero matrices") {
    SeriesFrame f(3, 40);
    McmSequence seq = build_mcm(f, small_config());
    for (const auto& m : seq.matrices)
        for (long i = 0; i < m.numel(); ++i) CHECK(m[i] == 0.0);
}

TEST_CASE("build_mcm: constant ones give unit diagonal") {
    SeriesFrame f(4, 60);
    for (auto& v : f.values) v = 1.0;
    McmConfig cfg = small_config();
    McmSequence seq = build_mcm(f, cfg);
    for (long k = seq.first_full_step; k < seq.M; ++k)
        for (long c = 0; c < seq.C; ++c)
            for (long i = 0; i < seq.n; ++i)
                CHECK(seq.matrices[static_cast<size_t>(k)].at3(c, i, i) == doctest::Approx(1.0));
}

TEST_CASE("build_mcm: hand-evaluated window") {
    SeriesFrame f(2, 5);
    for (long t = 0; t < 5; ++t) {
        f.at(0, t) = static_cast<double>(t + 1); // 1..5
        f.at(1, t) = 2.0;
    }
    McmConfig cfg;
    cfg.windows = {5};
    cfg.step = 5;
    McmSequence seq = build_mcm(f, cfg);
    REQUIRE(seq.M == 1);
    // (2 + 4 + 6 + 8 + 10) / 5
    CHECK(seq.matrices[0].at3(0, 0, 1) == doctest::Approx(6.0));
    CHECK(seq.matrices[0].at3(0, 1, 0) == doctest::Approx(6.0));
    CHECK(seq.matrices[0].at3(0, 1, 1) == doctest::Approx(4.0));
}

TEST_CASE("build_mcm: step count and short-series error") {
    McmConfig cfg = small_config();
    for (long T : {16L, 17L, 23L, 64L}) {
        SeriesFrame f = random_frame(3, T, 5);
        McmSequence seq = build_mcm(f, cfg);
        CHECK(seq.M == T / cfg.step);
    }
    SeriesFrame tiny = random_frame(3, 7, 6); // shorter than the largest window (8)
    CHECK_THROWS_AS(build_mcm(tiny, cfg), std::invalid_argument);
}

TEST_CASE("build_mcm: symmetry and positive semidefiniteness") {
    McmConfig cfg = small_config();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SeriesFrame f = random_frame(4, 50, seed);
        McmSequence seq = build_mcm(f, cfg);
        for (const auto& m : seq.matrices)
            for (long c = 0; c < seq.C; ++c) {
                Eigen::MatrixXd s(seq.n, seq.n);
                for (long i = 0; i < seq.n; ++i)
                    for (long j = 0; j < seq.n; ++j) {
                        CHECK(m.at3(c, i, j) == m.at3(c, j, i)); // exact symmetry
                        s(i, j) = m.at3(c, i, j);
                    }
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
                CHECK(es.eigenvalues().minCoeff() >= -1e-8);
            }
    }
}

TEST_CASE("assemble_inputs: five slots with plain history") {
    McmConfig cfg;
    cfg.windows = {2, 4};
    cfg.step = 2;
    cfg.history = 4;
    SeriesFrame f = random_frame(3, 60, 9);
    McmSequence seq = build_mcm(f, cfg);
    auto inputs = assemble_inputs(seq, cfg);
    REQUIRE(!inputs.empty());
    for (const auto& in : inputs) {
        CHECK(in.slots.size() == 5);
        CHECK(in.mask.size() == 5);
        // target equals the current (last) slot for plain history
        for (long i = 0; i < in.target.numel(); ++i) CHECK(in.target[i] == in.slots[4][i]);
    }
    // first target leaves room for h steps of full MCMs
    CHECK(inputs.front().target_step == seq.first_full_step + 4);
}

TEST_CASE("assemble_inputs: width-1 smoothing is the raw seasonal step") {
    McmConfig cfg;
    cfg.windows = {2};
    cfg.step = 2;
    cfg.history = 1;
    cfg.seasonal = {{12, 1}}; // one pattern, m=1, period 12 points = 6 steps
    cfg.smoothing_width = 1;
    SeriesFrame f = random_frame(2, 80, 11);
    McmSequence seq = build_mcm(f, cfg);
    auto inputs = assemble_inputs(seq, cfg);
    REQUIRE(!inputs.empty());
    for (const auto& in : inputs) {
        long t = in.target_step;
        const Tensor& seasonal = in.slots[0];
        const Tensor& expect = seq.matrices[static_cast<size_t>(t - 6)];
        for (long i = 0; i < seasonal.numel(); ++i) CHECK(seasonal[i] == expect[i]);
    }
}

TEST_CASE("assemble_inputs: width-6 smoothing averages the neighborhood") {
    McmConfig cfg;
    cfg.windows = {2};
    cfg.step = 2;
    cfg.history = 1;
    cfg.seasonal = {{20, 1}}; // period 10 steps
    cfg.smoothing_width = 6;
    SeriesFrame f = random_frame(2, 120, 13);
    McmSequence seq = build_mcm(f, cfg);
    auto inputs = assemble_inputs(seq, cfg);
    REQUIRE(!inputs.empty());
    for (const auto& in : inputs) {
        long s = in.target_step - 10;
        Tensor mean(seq.matrices[0].shape());
        long cnt = 0;
        for (long k = s - 3; k <= s + 2; ++k) {
            if (k < seq.first_full_step || k >= seq.M) continue;
            mean.array() += seq.matrices[static_cast<size_t>(k)].array();
            ++cnt;
        }
        mean.array() /= static_cast<double>(cnt);
        const Tensor& seasonal = in.slots[0];
        for (long i = 0; i < seasonal.numel(); ++i)
            CHECK(seasonal[i] == doctest::Approx(mean[i]).epsilon(1e-12));
    }
}

TEST_CASE("assemble_inputs: holiday slots are masked, current never is") {
    McmConfig cfg;
    cfg.windows = {2};
    cfg.step = 2;
    cfg.history = 2;
    SeriesFrame f = random_frame(2, 60, 17);
    // Flag raw points 20..21 (step 10) as a holiday.
    f.holiday_steps = {20, 21};
    McmSequence seq = build_mcm(f, cfg);
    REQUIRE(seq.holiday_bits[10] == 1);
    auto inputs = assemble_inputs(seq, cfg);
    for (const auto& in : inputs) {
        long t = in.target_step;
        // Immediate history slots covering step 10 must be masked.
        for (long j = 0; j < 2; ++j) {
            long slot_step = t - 2 + j;
            bool is_holiday = seq.holiday_bits[static_cast<size_t>(slot_step)] != 0;
            CHECK(static_cast<bool>(in.mask[static_cast<size_t>(j)]) == !is_holiday);
        }
        CHECK(in.mask.back() == 1); // current slot stays unmasked
    }
}

TEST_CASE("residual_first_channel") {
    Tensor target({3, 3, 3});
    Tensor rec({3, 3, 3});
    Rng rng(3);
    for (long i = 0; i < target.numel(); ++i) {
        target[i] = rng.normal();
        rec[i] = rng.normal();
    }
    Tensor r = residual_first_channel(target, rec);
    for (long i = 0; i < 3; ++i)
        for (long j = 0; j < 3; ++j)
            CHECK(r.at2(i, j) == doctest::Approx(target.at3(0, i, j) - rec.at3(0, i, j)));

    Tensor same = residual_first_channel(target, target);
    for (long i = 0; i < same.numel(); ++i) CHECK(same[i] == 0.0);

    Tensor zero({3, 3, 3});
    Tensor sign = residual_first_channel(zero, target);
    for (long i = 0; i < 3; ++i)
        for (long j = 0; j < 3; ++j) CHECK(sign.at2(i, j) == doctest::Approx(-target.at3(0, i, j)));

    Tensor bad({2, 3, 3});
    CHECK_THROWS_AS(residual_first_channel(target, bad), std::invalid_argument);
}

TEST_CASE("mcm binary round trip") {
    McmConfig cfg = small_config();
    SeriesFrame f = random_frame(3, 50, 19);
    f.holiday_steps = {10, 11};
    McmSequence seq = build_mcm(f, cfg);
    write_mcm_binary(seq, "/tmp/rsmgan_test_mcm.bin", "/tmp/rsmgan_test_mcm.json");
    McmSequence back = read_mcm_binary("/tmp/rsmgan_test_mcm.bin", "/tmp/rsmgan_test_mcm.json");
    CHECK(back.M == seq.M);
    CHECK(back.n == seq.n);
    CHECK(back.C == seq.C);
    CHECK(back.p == seq.p);
    CHECK(back.raw_T == seq.raw_T);
    CHECK(back.first_full_step == seq.first_full_step);
    CHECK(back.holiday_bits == seq.holiday_bits);
    CHECK(back.step_epochs == seq.step_epochs);
    for (long k = 0; k < seq.M; ++k)
        for (long i = 0; i < seq.matrices[0].numel(); ++i)
            CHECK(back.matrices[static_cast<size_t>(k)][i] ==
                  seq.matrices[static_cast<size_t>(k)][i]);
}
