#ifndef RSMGAN_SERIES_HPP
#define RSMGAN_SERIES_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rsmgan {

/// An n-by-T multivariate time series. Values are stored series-major
/// (values[i*T + t]); timestamps are derived from a start epoch and a
/// fixed sampling interval.
struct SeriesFrame {
    std::vector<std::string> names;
    std::vector<double> values; // n * T, series-major
    long n = 0;
    long T = 0;
    std::int64_t start_epoch_sec = 1704067200; // 2024-01-01T00:00:00Z
    std::int64_t step_seconds = 60;
    std::vector<long> holiday_steps; // sorted raw step indices, optional

    SeriesFrame() = default;
    SeriesFrame(long n_, long T_);

    double& at(long i, long t) { return values[static_cast<size_t>(i * T + t)]; }
    double at(long i, long t) const { return values[static_cast<size_t>(i * T + t)]; }

    std::int64_t epoch_at(long t) const { return start_epoch_sec + t * step_seconds; }
    std::string timestamp_at(long t) const;
};

/// First half trains; the remainder splits 1/5 validation, 4/5 test.
struct SplitSpec {
    long train_end = 0; // [0, train_end) trains
    long val_end = 0;   // [train_end, val_end) validates, [val_end, T) tests
    long T = 0;
};

SplitSpec compute_split(long T);

/// Per-series mean/stddev fitted on the training range.
struct SeriesStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

SeriesStats fit_train_stats(const SeriesFrame& frame, long train_end);

/// Z-score every series with training-range statistics. Constant series
/// (stddev 0) are centered only.
SeriesFrame zscore_by_train(const SeriesFrame& frame, long train_end,
                            SeriesStats* out_stats = nullptr);

std::string format_iso8601(std::int64_t epoch_sec);
std::int64_t parse_iso8601(const std::string& s);

void write_series_csv(const SeriesFrame& frame, const std::string& path);
SeriesFrame read_series_csv(const std::string& path);

} // namespace rsmgan

#endif
