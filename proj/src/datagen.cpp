#include "rsmgan/datagen.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace rsmgan {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

// Stream ids for substream derivation; keeps the per-purpose RNG streams
// independent of call order.
enum Stream : std::uint64_t {
    kComponentBase = 0x1000,
    kAnomalyPlacement = 0x2000,
};
} // namespace

SeasonKind season_kind_from_string(const std::string& s) {
    if (s == "random") return SeasonKind::random;
    if (s == "daily") return SeasonKind::daily;
    if (s == "weekly") return SeasonKind::weekly;
    if (s == "monthly") return SeasonKind::monthly;
    throw std::invalid_argument("unknown seasonal pattern kind: '" + s + "'");
}

std::string to_string(SeasonKind k) {
    switch (k) {
    case SeasonKind::random: return "random";
    case SeasonKind::daily: return "daily";
    case SeasonKind::weekly: return "weekly";
    case SeasonKind::monthly: return "monthly";
    }
    return "?";
}

void SeasonSpec::validate() const {
    // The [10,100] range on t0 is a property of auto-sampled specs
    // (plan_components keeps it); manual construction may use any shift.
    if (!(omega > 0.0)) throw std::invalid_argument("SeasonSpec: omega must be positive");
    if (noise_scale < 0.0) throw std::invalid_argument("SeasonSpec: negative noise scale");
}

double season_value(const SeasonSpec& spec, double t) {
    double phase = spec.omega * (t - static_cast<double>(spec.phase_shift));
    return spec.cosine_wave ? std::cos(phase) : std::sin(phase);
}

SeasonSpec SeasonSpec::random_kind(double F_divisor, long t0, bool cosine, double noise) {
    if (!(F_divisor > 0.0)) throw std::invalid_argument("SeasonSpec: F must be positive");
    SeasonSpec s;
    s.kind = SeasonKind::random;
    s.omega = 1.0 / F_divisor;
    s.phase_shift = t0;
    s.cosine_wave = cosine;
    s.noise_scale = noise;
    s.validate();
    return s;
}

SeasonSpec SeasonSpec::calendar(SeasonKind kind, long period_steps, long t0, bool cosine,
                                double noise) {
    if (kind == SeasonKind::random)
        throw std::invalid_argument("SeasonSpec::calendar: use random_kind for random seasonality");
    if (period_steps <= 0) throw std::invalid_argument("SeasonSpec: period must be positive");
    SeasonSpec s;
    s.kind = kind;
    s.omega = kTwoPi / static_cast<double>(period_steps);
    s.phase_shift = t0;
    s.cosine_wave = cosine;
    s.noise_scale = noise;
    s.validate();
    return s;
}

long season_period_steps(SeasonKind kind, long step_seconds) {
    if (step_seconds <= 0) throw std::invalid_argument("season_period_steps: bad interval");
    const long day = 86400 / step_seconds;
    switch (kind) {
    case SeasonKind::daily: return day;
    case SeasonKind::weekly: return 7 * day;
    case SeasonKind::monthly: return 30 * day;
    case SeasonKind::random: break;
    }
    throw std::invalid_argument("season_period_steps: random kind has no calendar period");
}

std::vector<double> generate_component(long T, const SeasonSpec& spec, std::uint64_t seed) {
    if (T <= 0) throw std::invalid_argument("generate_component: T must be positive");
    spec.validate();
    Rng rng(seed);
    std::vector<double> out(static_cast<size_t>(T));
    for (long t = 0; t < T; ++t) {
        double eps = spec.noise_scale > 0.0 ? spec.noise_scale * rng.normal() : 0.0;
        out[static_cast<size_t>(t)] = season_value(spec, static_cast<double>(t)) + eps;
    }
    return out;
}

std::vector<std::vector<ComponentPlan>> plan_components(long n,
                                                        const std::vector<SeasonKind>& patterns,
                                                        std::uint64_t seed, long step_seconds,
                                                        double noise_scale) {
    if (n < 1) throw std::invalid_argument("plan_components: need at least one series");
    if (patterns.empty()) throw std::invalid_argument("plan_components: no patterns requested");

    std::vector<std::vector<ComponentPlan>> plans(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
        plans[static_cast<size_t>(i)].reserve(patterns.size());
        for (size_t j = 0; j < patterns.size(); ++j) {
            std::uint64_t sub = Rng::mix(seed, kComponentBase + static_cast<std::uint64_t>(i) * 64 +
                                                   static_cast<std::uint64_t>(j));
            Rng rng(sub);
            long t0 = rng.uniform_int(10, 100);
            bool cosine = rng.bernoulli(0.5);
            SeasonSpec spec;
            if (patterns[j] == SeasonKind::random) {
                double F = rng.uniform(60.0, 100.0);
                spec = SeasonSpec::random_kind(F, t0, cosine, noise_scale);
            } else {
                spec = SeasonSpec::calendar(patterns[j], season_period_steps(patterns[j], step_seconds),
                                            t0, cosine, noise_scale);
            }
            // Noise stream is separate from the parameter stream so the
            // component can be regenerated from (spec, noise_seed) alone.
            plans[static_cast<size_t>(i)].push_back({spec, Rng::mix(sub, 0xabcd)});
        }
    }
    return plans;
}

SeriesFrame generate_mts(long n, long T, const std::vector<SeasonKind>& patterns,
                         std::uint64_t seed, long step_seconds, double noise_scale) {
    auto plans = plan_components(n, patterns, seed, step_seconds, noise_scale);
    SeriesFrame frame(n, T);
    frame.step_seconds = step_seconds;
    for (long i = 0; i < n; ++i) {
        for (const auto& plan : plans[static_cast<size_t>(i)]) {
            auto comp = generate_component(T, plan.spec, plan.noise_seed);
            for (long t = 0; t < T; ++t) frame.at(i, t) += comp[static_cast<size_t>(t)];
        }
    }
    return frame;
}

InjectResult inject_anomalies(const SeriesFrame& frame, long count, bool train_split,
                              std::uint64_t seed, long validation_quota) {
    if (count < 0) throw std::invalid_argument("inject_anomalies: negative count");
    InjectResult res{frame, {}};
    if (count == 0) return res;

    SplitSpec split = compute_split(frame.T);
    // Shock magnitudes scale with the training stddev of the uncontaminated input.
    SeriesStats stats = fit_train_stats(frame, split.train_end);

    struct Zone {
        long lo, hi; // [lo, hi)
        long quota;  // how many windows must land here
    };
    std::vector<Zone> zones;
    if (train_split) {
        zones.push_back({0, split.train_end, count});
    } else {
        long vq = validation_quota;
        if (vq < 0) vq = std::max<long>(1, count / 5);
        vq = std::min(vq, count);
        if (vq > 0) zones.push_back({split.train_end, split.val_end, vq});
        zones.push_back({split.val_end, frame.T, count - vq});
    }

    Rng rng = Rng(seed).derive(kAnomalyPlacement);
    std::vector<std::pair<long, long>> taken; // occupied [start,end)

    auto overlaps = [&taken](long s, long e) {
        for (auto& w : taken)
            if (s < w.second && w.first < e) return true;
        return false;
    };

    for (const auto& zone : zones) {
        for (long c = 0; c < zone.quota; ++c) {
            AnomalySpec a;
            a.duration = rng.uniform_int(5, 60);
            a.dip = rng.bernoulli(0.5);
            a.magnitude = rng.uniform(1.5, 4.0);
            long span = zone.hi - zone.lo - a.duration;
            if (span <= 0)
                throw std::runtime_error("inject_anomalies: zone too small for a window");
            bool placed = false;
            for (int attempt = 0; attempt < 1000; ++attempt) {
                long s = zone.lo + rng.uniform_int(0, span - 1);
                if (!overlaps(s, s + a.duration)) {
                    a.start = s;
                    placed = true;
                    break;
                }
            }
            if (!placed)
                throw std::runtime_error(
                    "inject_anomalies: could not place non-overlapping windows; reduce count");
            taken.emplace_back(a.start, a.end());

            long n_causes = rng.uniform_int(2, std::min<long>(6, frame.n));
            std::vector<long> all(static_cast<size_t>(frame.n));
            for (long i = 0; i < frame.n; ++i) all[static_cast<size_t>(i)] = i;
            for (long i = 0; i < n_causes; ++i) { // partial Fisher-Yates
                long j = i + rng.uniform_int(0, frame.n - 1 - i);
                std::swap(all[static_cast<size_t>(i)], all[static_cast<size_t>(j)]);
            }
            a.root_causes.assign(all.begin(), all.begin() + n_causes);
            std::sort(a.root_causes.begin(), a.root_causes.end());

            double sign = a.dip ? -1.0 : 1.0;
            for (long i : a.root_causes) {
                double shock = sign * a.magnitude * std::max(stats.stddev[static_cast<size_t>(i)], 1e-12);
                for (long t = a.start; t < a.end(); ++t) res.frame.at(i, t) += shock;
            }
            res.labels.push_back(std::move(a));
        }
    }
    std::sort(res.labels.begin(), res.labels.end(),
              [](const AnomalySpec& x, const AnomalySpec& y) { return x.start < y.start; });
    return res;
}

SeriesFrame inject_holidays(const SeriesFrame& frame, const std::vector<long>& holiday_steps,
                            std::uint64_t /*seed*/, double surge) {
    SeriesFrame out = frame;
    for (long t : holiday_steps) {
        if (t < 0 || t >= frame.T)
            throw std::invalid_argument("inject_holidays: step out of range");
        for (long i = 0; i < frame.n; ++i) out.at(i, t) = frame.at(i, t) * surge;
    }
    out.holiday_steps = holiday_steps;
    std::sort(out.holiday_steps.begin(), out.holiday_steps.end());
    out.holiday_steps.erase(std::unique(out.holiday_steps.begin(), out.holiday_steps.end()),
                            out.holiday_steps.end());
    return out;
}

std::vector<long> holiday_days_to_steps(const std::vector<long>& day_indices, long steps_per_day,
                                        long T) {
    std::vector<long> steps;
    for (long d : day_indices)
        for (long s = d * steps_per_day; s < (d + 1) * steps_per_day && s < T; ++s)
            if (s >= 0) steps.push_back(s);
    std::sort(steps.begin(), steps.end());
    return steps;
}

// ---- label / holiday files ----

namespace {
nlohmann::json label_to_json(const AnomalySpec& a, const SeriesFrame& frame, const char* split) {
    nlohmann::json j;
    j["start"] = frame.timestamp_at(a.start);
    j["end"] = frame.timestamp_at(a.end() - 1);
    j["start_step"] = a.start;
    j["end_step"] = a.end();
    j["direction"] = a.dip ? "dip" : "spike";
    j["magnitude"] = a.magnitude;
    j["root_causes"] = a.root_causes;
    j["split"] = split;
    return j;
}

AnomalySpec label_from_json(const nlohmann::json& j) {
    AnomalySpec a;
    a.start = j.at("start_step").get<long>();
    a.duration = j.at("end_step").get<long>() - a.start;
    a.dip = j.at("direction").get<std::string>() == "dip";
    a.magnitude = j.value("magnitude", 0.0);
    a.root_causes = j.at("root_causes").get<std::vector<long>>();
    return a;
}
} // namespace

void write_labels_json(const std::vector<AnomalySpec>& train, const std::vector<AnomalySpec>& test,
                       const SeriesFrame& frame, const std::string& path) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& a : train) j.push_back(label_to_json(a, frame, "train"));
    for (const auto& a : test) j.push_back(label_to_json(a, frame, "test"));
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_labels_json: cannot open " + path);
    out << j.dump(2) << "\n";
}

void read_labels_json(const std::string& path, const SeriesFrame& /*frame*/,
                      std::vector<AnomalySpec>* train, std::vector<AnomalySpec>* test) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_labels_json: cannot open " + path);
    nlohmann::json j;
    in >> j;
    train->clear();
    test->clear();
    for (const auto& item : j) {
        if (item.at("split").get<std::string>() == "train")
            train->push_back(label_from_json(item));
        else
            test->push_back(label_from_json(item));
    }
}

void write_holidays_json(const std::vector<long>& holiday_steps, const SeriesFrame& frame,
                         const std::string& path) {
    nlohmann::json j = nlohmann::json::array();
    for (long s : holiday_steps) {
        nlohmann::json item;
        item["step"] = s;
        item["timestamp"] = frame.timestamp_at(s);
        j.push_back(item);
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_holidays_json: cannot open " + path);
    out << j.dump(2) << "\n";
}

std::vector<long> read_holidays_json(const std::string& path, const SeriesFrame& /*frame*/) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_holidays_json: cannot open " + path);
    nlohmann::json j;
    in >> j;
    std::vector<long> steps;
    for (const auto& item : j) steps.push_back(item.at("step").get<long>());
    std::sort(steps.begin(), steps.end());
    return steps;
}

} // namespace rsmgan
