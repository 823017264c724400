#include "rsmgan/series.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rsmgan {

SeriesFrame::SeriesFrame(long n_, long T_) : n(n_), T(T_) {
    if (n_ <= 0 || T_ <= 0) throw std::invalid_argument("SeriesFrame: n and T must be positive");
    names.resize(static_cast<size_t>(n_));
    for (long i = 0; i < n_; ++i) names[static_cast<size_t>(i)] = "series_" + std::to_string(i);
    values.assign(static_cast<size_t>(n_ * T_), 0.0);
}

std::string SeriesFrame::timestamp_at(long t) const { return format_iso8601(epoch_at(t)); }

SplitSpec compute_split(long T) {
    if (T < 4) throw std::invalid_argument("compute_split: series too short");
    SplitSpec s;
    s.T = T;
    s.train_end = T / 2;
    long rest = T - s.train_end;
    s.val_end = s.train_end + rest / 5;
    return s;
}

SeriesStats fit_train_stats(const SeriesFrame& frame, long train_end) {
    if (train_end <= 1 || train_end > frame.T)
        throw std::invalid_argument("fit_train_stats: bad training range");
    SeriesStats st;
    st.mean.resize(static_cast<size_t>(frame.n));
    st.stddev.resize(static_cast<size_t>(frame.n));
    for (long i = 0; i < frame.n; ++i) {
        double sum = 0.0;
        for (long t = 0; t < train_end; ++t) sum += frame.at(i, t);
        double mean = sum / static_cast<double>(train_end);
        double sq = 0.0;
        for (long t = 0; t < train_end; ++t) {
            double d = frame.at(i, t) - mean;
            sq += d * d;
        }
        st.mean[static_cast<size_t>(i)] = mean;
        st.stddev[static_cast<size_t>(i)] = std::sqrt(sq / static_cast<double>(train_end));
    }
    return st;
}

SeriesFrame zscore_by_train(const SeriesFrame& frame, long train_end, SeriesStats* out_stats) {
    SeriesStats st = fit_train_stats(frame, train_end);
    SeriesFrame out = frame;
    for (long i = 0; i < frame.n; ++i) {
        double m = st.mean[static_cast<size_t>(i)];
        double s = st.stddev[static_cast<size_t>(i)];
        double inv = s > 0.0 ? 1.0 / s : 1.0;
        for (long t = 0; t < frame.T; ++t) out.at(i, t) = (frame.at(i, t) - m) * inv;
    }
    if (out_stats) *out_stats = std::move(st);
    return out;
}

std::string format_iso8601(std::int64_t epoch_sec) {
    std::time_t tt = static_cast<std::time_t>(epoch_sec);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

std::int64_t parse_iso8601(const std::string& s) {
    std::tm tm{};
    int y, mo, d, h, mi, se;
    if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &se) != 6)
        throw std::invalid_argument("parse_iso8601: bad timestamp '" + s + "'");
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = se;
    return static_cast<std::int64_t>(timegm(&tm));
}

void write_series_csv(const SeriesFrame& frame, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_series_csv: cannot open " + path);
    out << "timestamp";
    for (const auto& name : frame.names) out << "," << name;
    out << "\n";
    out.precision(17);
    for (long t = 0; t < frame.T; ++t) {
        out << frame.timestamp_at(t);
        for (long i = 0; i < frame.n; ++i) out << "," << frame.at(i, t);
        out << "\n";
    }
    if (!out) throw std::runtime_error("write_series_csv: write failed for " + path);
}

SeriesFrame read_series_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_series_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("read_series_csv: empty file " + path);

    std::vector<std::string> names;
    {
        std::stringstream ss(line);
        std::string cell;
        bool first = true;
        while (std::getline(ss, cell, ',')) {
            if (first) {
                first = false;
                continue;
            }
            names.push_back(cell);
        }
    }
    if (names.empty()) throw std::runtime_error("read_series_csv: no series columns in " + path);

    std::vector<std::int64_t> stamps;
    std::vector<std::vector<double>> cols(names.size());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        stamps.push_back(parse_iso8601(cell));
        for (size_t i = 0; i < names.size(); ++i) {
            if (!std::getline(ss, cell, ','))
                throw std::runtime_error("read_series_csv: short row in " + path);
            cols[i].push_back(std::stod(cell));
        }
    }
    if (stamps.size() < 2) throw std::runtime_error("read_series_csv: need at least 2 rows");

    SeriesFrame frame(static_cast<long>(names.size()), static_cast<long>(stamps.size()));
    frame.names = names;
    frame.start_epoch_sec = stamps[0];
    frame.step_seconds = stamps[1] - stamps[0];
    if (frame.step_seconds <= 0)
        throw std::runtime_error("read_series_csv: non-increasing timestamps");
    for (long i = 0; i < frame.n; ++i)
        for (long t = 0; t < frame.T; ++t)
            frame.at(i, t) = cols[static_cast<size_t>(i)][static_cast<size_t>(t)];
    return frame;
}

} // namespace rsmgan
