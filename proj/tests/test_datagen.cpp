#include "rsmgan/datagen.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace rsmgan;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("season_value: pure sine peaks at quarter period") {
    SeasonSpec spec = SeasonSpec::random_kind(1.0, 10, /*cosine=*/false, /*noise=*/0.0);
    spec.phase_shift = 0;
    CHECK(season_value(spec, kPi / 2.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("season_value: pure cosine at origin") {
    SeasonSpec spec = SeasonSpec::random_kind(1.0, 10, /*cosine=*/true, 0.0);
    spec.phase_shift = 0;
    CHECK(season_value(spec, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("daily seasonality constant for minute sampling") {
    // 2*pi/(60*24) radians per minute, one day period.
    SeasonSpec spec = SeasonSpec::calendar(SeasonKind::daily, 60 * 24, 20, false, 0.0);
    CHECK(spec.omega == doctest::Approx(2.0 * kPi / (60.0 * 24.0)).epsilon(1e-15));
    CHECK(season_value(spec, 20.0) ==
          doctest::Approx(season_value(spec, 20.0 + 60 * 24)).epsilon(1e-9));
}

TEST_CASE("generate_component rejects non-positive length") {
    SeasonSpec spec = SeasonSpec::random_kind(80.0, 10, false);
    CHECK_THROWS_AS(generate_component(0, spec, 1), std::invalid_argument);
}

TEST_CASE("generate_component deterministic under seed") {
    SeasonSpec spec = SeasonSpec::random_kind(70.0, 42, false, 0.3);
    auto a = generate_component(500, spec, 77);
    auto b = generate_component(500, spec, 77);
    CHECK(a == b);
}

TEST_CASE("generate_mts shape and pattern errors") {
    SeriesFrame f = generate_mts(3, 1000, {SeasonKind::random}, 5);
    CHECK(f.n == 3);
    CHECK(f.T == 1000);
    CHECK_THROWS_AS(generate_mts(0, 10, {SeasonKind::random}, 1), std::invalid_argument);
    CHECK_THROWS_AS(generate_mts(2, 10, {}, 1), std::invalid_argument);
    CHECK_THROWS_AS(season_kind_from_string("fortnightly"), std::invalid_argument);
}

TEST_CASE("noise-free single pattern is a shifted sinusoid") {
    SeriesFrame f = generate_mts(2, 400, {SeasonKind::random}, 9, 60, /*noise=*/0.0);
    auto plans = plan_components(2, {SeasonKind::random}, 9, 60, 0.0);
    for (long i = 0; i < 2; ++i) {
        const SeasonSpec& spec = plans[static_cast<size_t>(i)][0].spec;
        for (long t = 0; t < 400; ++t)
            CHECK(f.at(i, t) ==
                  doctest::Approx(season_value(spec, static_cast<double>(t))).epsilon(1e-12));
    }
}

TEST_CASE("multi-pattern series equals the sum of its components") {
    const long T = 600;
    std::vector<SeasonKind> pats{SeasonKind::random, SeasonKind::daily, SeasonKind::weekly};
    SeriesFrame f = generate_mts(4, T, pats, 123, 60, 0.3);
    auto plans = plan_components(4, pats, 123, 60, 0.3);
    for (long i = 0; i < 4; ++i) {
        std::vector<double> sum(static_cast<size_t>(T), 0.0);
        for (const auto& plan : plans[static_cast<size_t>(i)]) {
            auto comp = generate_component(T, plan.spec, plan.noise_seed);
            for (long t = 0; t < T; ++t)
                sum[static_cast<size_t>(t)] += comp[static_cast<size_t>(t)];
        }
        for (long t = 0; t < T; ++t) CHECK(f.at(i, t) == sum[static_cast<size_t>(t)]);
    }
}

TEST_CASE("sampled spec parameters stay in the documented ranges") {
    auto plans = plan_components(20, {SeasonKind::random}, 7, 60);
    for (const auto& per_series : plans)
        for (const auto& plan : per_series) {
            CHECK(plan.spec.phase_shift >= 10);
            CHECK(plan.spec.phase_shift <= 100);
            // omega = 1/F with F in [60,100]
            CHECK(plan.spec.omega <= 1.0 / 60.0 + 1e-12);
            CHECK(plan.spec.omega >= 1.0 / 100.0 - 1e-12);
        }
}

TEST_CASE("inject_anomalies: count zero is a no-op") {
    SeriesFrame f = generate_mts(3, 400, {SeasonKind::random}, 11);
    InjectResult r = inject_anomalies(f, 0, true, 5);
    CHECK(r.labels.empty());
    CHECK(r.frame.values == f.values);
}

TEST_CASE("inject_anomalies: locality and label consistency") {
    SeriesFrame f = generate_mts(8, 4000, {SeasonKind::random}, 21);
    InjectResult r = inject_anomalies(f, 6, /*train=*/true, 99);
    REQUIRE(r.labels.size() == 6);
    SplitSpec split = compute_split(f.T);

    // Changed cells are exactly the labeled root-cause cells.
    for (long i = 0; i < f.n; ++i)
        for (long t = 0; t < f.T; ++t) {
            bool changed = r.frame.at(i, t) != f.at(i, t);
            bool labeled = false;
            for (const auto& a : r.labels)
                if (t >= a.start && t < a.end() &&
                    std::find(a.root_causes.begin(), a.root_causes.end(), i) !=
                        a.root_causes.end())
                    labeled = true;
            CHECK(changed == labeled);
        }

    for (const auto& a : r.labels) {
        CHECK(a.duration >= 5);
        CHECK(a.duration <= 60);
        CHECK(a.root_causes.size() >= 2);
        CHECK(a.root_causes.size() <= 6);
        CHECK(a.magnitude >= 1.5);
        CHECK(a.magnitude <= 4.0);
        CHECK(a.start >= 0);
        CHECK(a.end() <= split.train_end); // train split windows stay in range
    }

    // Non-overlap.
    for (size_t i = 0; i < r.labels.size(); ++i)
        for (size_t j = i + 1; j < r.labels.size(); ++j) {
            bool disjoint = r.labels[i].end() <= r.labels[j].start ||
                            r.labels[j].end() <= r.labels[i].start;
            CHECK(disjoint);
        }
}

TEST_CASE("inject_anomalies: test split honors the validation quota") {
    SeriesFrame f = generate_mts(6, 6000, {SeasonKind::random}, 31);
    SplitSpec split = compute_split(f.T);
    InjectResult r = inject_anomalies(f, 10, /*train=*/false, 7);
    long in_val = 0, in_test = 0;
    for (const auto& a : r.labels) {
        CHECK(a.start >= split.train_end);
        if (a.end() <= split.val_end)
            ++in_val;
        else if (a.start >= split.val_end)
            ++in_test;
    }
    CHECK(in_val == 2); // max(1, 10/5)
    CHECK(in_test == 8);
}

TEST_CASE("inject_anomalies: impossible placement errors out") {
    SeriesFrame f = generate_mts(4, 300, {SeasonKind::random}, 3);
    CHECK_THROWS_AS(inject_anomalies(f, 100, true, 1), std::runtime_error);
}

TEST_CASE("inject_anomalies deterministic") {
    SeriesFrame f = generate_mts(5, 2000, {SeasonKind::random}, 13);
    InjectResult a = inject_anomalies(f, 4, true, 55);
    InjectResult b = inject_anomalies(f, 4, true, 55);
    CHECK(a.frame.values == b.frame.values);
    REQUIRE(a.labels.size() == b.labels.size());
    for (size_t i = 0; i < a.labels.size(); ++i) {
        CHECK(a.labels[i].start == b.labels[i].start);
        CHECK(a.labels[i].root_causes == b.labels[i].root_causes);
    }
}

TEST_CASE("inject_holidays: empty set is identity, diffs stay inside windows") {
    SeriesFrame f = generate_mts(3, 24 * 14, {SeasonKind::daily}, 17, 3600);
    SeriesFrame same = inject_holidays(f, {}, 1);
    CHECK(same.values == f.values);

    auto steps = holiday_days_to_steps({3, 9}, 24, f.T);
    CHECK(steps.size() == 48);
    SeriesFrame h = inject_holidays(f, steps, 1, 3.0);
    std::set<long> hs(steps.begin(), steps.end());
    for (long i = 0; i < f.n; ++i)
        for (long t = 0; t < f.T; ++t) {
            if (hs.count(t))
                CHECK(h.at(i, t) == doctest::Approx(3.0 * f.at(i, t)));
            else
                CHECK(h.at(i, t) == f.at(i, t));
        }
    CHECK_THROWS_AS(inject_holidays(f, {f.T}, 1), std::invalid_argument);
}

TEST_CASE("three years of hourly data spans 26280 steps") {
    CHECK(3 * 365 * 24 == 26280);
    auto steps = holiday_days_to_steps({0}, 24, 26280);
    CHECK(steps.size() == 24);
}

TEST_CASE("labels and holidays survive a JSON round trip") {
    SeriesFrame f = generate_mts(5, 3000, {SeasonKind::random}, 41);
    InjectResult tr = inject_anomalies(f, 3, true, 8);
    InjectResult te = inject_anomalies(tr.frame, 4, false, 9);

    write_labels_json(tr.labels, te.labels, f, "/tmp/rsmgan_test_labels.json");
    std::vector<AnomalySpec> train2, test2;
    read_labels_json("/tmp/rsmgan_test_labels.json", f, &train2, &test2);
    REQUIRE(train2.size() == tr.labels.size());
    REQUIRE(test2.size() == te.labels.size());
    for (size_t i = 0; i < train2.size(); ++i) {
        CHECK(train2[i].start == tr.labels[i].start);
        CHECK(train2[i].duration == tr.labels[i].duration);
        CHECK(train2[i].dip == tr.labels[i].dip);
        CHECK(train2[i].root_causes == tr.labels[i].root_causes);
    }

    auto steps = holiday_days_to_steps({1}, 1440, f.T);
    write_holidays_json(steps, f, "/tmp/rsmgan_test_holidays.json");
    CHECK(read_holidays_json("/tmp/rsmgan_test_holidays.json", f) == steps);
}

TEST_CASE("series CSV round trip") {
    SeriesFrame f = generate_mts(4, 128, {SeasonKind::random}, 23);
    write_series_csv(f, "/tmp/rsmgan_test_series.csv");
    SeriesFrame g = read_series_csv("/tmp/rsmgan_test_series.csv");
    REQUIRE(g.n == f.n);
    REQUIRE(g.T == f.T);
    CHECK(g.step_seconds == f.step_seconds);
    for (long i = 0; i < f.n; ++i)
        for (long t = 0; t < f.T; ++t) CHECK(g.at(i, t) == f.at(i, t));
}

TEST_CASE("zscore uses training statistics only") {
    SeriesFrame f(2, 100);
    for (long t = 0; t < 100; ++t) {
        f.at(0, t) = t < 50 ? 2.0 : 100.0;
        f.at(1, t) = static_cast<double>(t);
    }
    SeriesStats stats;
    SeriesFrame z = zscore_by_train(f, 50, &stats);
    CHECK(stats.mean[0] == doctest::Approx(2.0));
    CHECK(stats.stddev[0] == doctest::Approx(0.0));
    // Constant training series: centered but not scaled.
    CHECK(z.at(0, 0) == doctest::Approx(0.0));
    CHECK(z.at(0, 99) == doctest::Approx(98.0));
    // Non-constant: unit variance over the training half.
    double mean = 0, var = 0;
    for (long t = 0; t < 50; ++t) mean += z.at(1, t);
    mean /= 50;
    for (long t = 0; t < 50; ++t) var += (z.at(1, t) - mean) * (z.at(1, t) - mean);
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(var / 50 == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("split follows the half / fifth convention") {
    SplitSpec s = compute_split(10080);
    CHECK(s.train_end == 5040);
    CHECK(s.val_end == 5040 + 1008);
    CHECK(s.T == 10080);
}

TEST_CASE("two months of minute data has the full-scale shape") {
    SeriesFrame f = generate_mts(10, 80640, {SeasonKind::random}, 1);
    CHECK(f.n == 10);
    CHECK(f.T == 80640);
    CHECK(static_cast<long>(f.values.size()) == 10 * 80640);
}

TEST_CASE("15 training anomalies contaminate about 1.2 percent of the train span") {
    SeriesFrame f = generate_mts(10, 80640, {SeasonKind::random}, 2);
    InjectResult r = inject_anomalies(f, 15, /*train=*/true, 4);
    long contaminated = 0;
    for (const auto& a : r.labels) contaminated += a.duration;
    double frac = static_cast<double>(contaminated) / static_cast<double>(80640 / 2);
    // Durations are uniform on [5,60], so 15 windows average ~1.2%.
    CHECK(frac > 0.006);
    CHECK(frac < 0.020);
}
