#ifndef RSMGAN_DATAGEN_HPP
#define RSMGAN_DATAGEN_HPP

#include "rsmgan/rng.hpp"
#include "rsmgan/series.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rsmgan {

enum class SeasonKind { random, daily, weekly, monthly };

SeasonKind season_kind_from_string(const std::string& s);
std::string to_string(SeasonKind k);

/// One sinusoidal component of a synthetic series:
///   value(t) = waveform(omega * (t - phase_shift)) + noise_scale * eps_t
/// with waveform = sin when cosine_wave is false, cos otherwise.
///
/// For the random kind omega = 1/F with F drawn from [60,100] (the divisor
/// form); for calendar kinds omega = 2*pi/period_steps, which for daily
/// minute data equals 2*pi/(60*24).
struct SeasonSpec {
    SeasonKind kind = SeasonKind::random;
    double omega = 1.0;      // radians per step
    long phase_shift = 10;   // t0, steps, sampled in [10,100]
    bool cosine_wave = false;
    double noise_scale = 0.3;

    void validate() const;

    static SeasonSpec random_kind(double F_divisor, long t0, bool cosine, double noise = 0.3);
    static SeasonSpec calendar(SeasonKind kind, long period_steps, long t0, bool cosine,
                               double noise = 0.3);
};

/// Steps per period for a calendar kind at a given sampling interval.
long season_period_steps(SeasonKind kind, long step_seconds);

struct AnomalySpec {
    long start = 0;     // raw step index
    long duration = 0;  // steps, auto-sampled in [5,60]
    bool dip = false;   // direction: spike (false) or dip (true)
    std::vector<long> root_causes; // series indices, auto-sampled size in [2,6]
    double magnitude = 0.0;        // in units of per-series training stddev

    long end() const { return start + duration; }
};

struct GeneratedDataset {
    SeriesFrame frame;
    std::vector<AnomalySpec> train_labels;
    std::vector<AnomalySpec> test_labels;
    std::vector<long> holiday_steps;
};

/// Noise-free waveform value at (possibly fractional) position t.
double season_value(const SeasonSpec& spec, double t);

/// Eq-5 style component. Deterministic under a fixed seed; the seed drives
/// only the per-step noise.
std::vector<double> generate_component(long T, const SeasonSpec& spec, std::uint64_t seed);

/// Specs sampled for one series, one per requested pattern. Exposed so a
/// multi-pattern series can be regenerated component-by-component.
struct ComponentPlan {
    SeasonSpec spec;
    std::uint64_t noise_seed;
};

std::vector<std::vector<ComponentPlan>> plan_components(long n,
                                                        const std::vector<SeasonKind>& patterns,
                                                        std::uint64_t seed, long step_seconds,
                                                        double noise_scale = 0.3);

/// Sum of one component per requested pattern, per series. Components are
/// seeded independently so each can be regenerated alone.
SeriesFrame generate_mts(long n, long T, const std::vector<SeasonKind>& patterns,
                         std::uint64_t seed, long step_seconds = 60,
                         double noise_scale = 0.3);

/// Injects `count` non-overlapping shock windows into the chosen split of
/// the frame. Shocks are constant offsets of magnitude * train-stddev with
/// sign set by direction, applied only to the sampled root-cause series.
/// validation_quota > 0 reserves that many of the windows for the
/// validation zone of a test-split injection.
struct InjectResult {
    SeriesFrame frame;
    std::vector<AnomalySpec> labels;
};

InjectResult inject_anomalies(const SeriesFrame& frame, long count, bool train_split,
                              std::uint64_t seed, long validation_quota = -1);

/// Multiplies all series by the holiday surge factor over each holiday step.
SeriesFrame inject_holidays(const SeriesFrame& frame, const std::vector<long>& holiday_steps,
                            std::uint64_t seed, double surge = 3.0);

/// Expands whole holiday days into raw step indices.
std::vector<long> holiday_days_to_steps(const std::vector<long>& day_indices, long steps_per_day,
                                        long T);

void write_labels_json(const std::vector<AnomalySpec>& train, const std::vector<AnomalySpec>& test,
                       const SeriesFrame& frame, const std::string& path);
void read_labels_json(const std::string& path, const SeriesFrame& frame,
                      std::vector<AnomalySpec>* train, std::vector<AnomalySpec>* test);

void write_holidays_json(const std::vector<long>& holiday_steps, const SeriesFrame& frame,
                         const std::string& path);
std::vector<long> read_holidays_json(const std::string& path, const SeriesFrame& frame);

} // namespace rsmgan

#endif
