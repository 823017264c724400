#include "rsmgan/mcm.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rsmgan {

void McmConfig::validate() const {
    if (windows.empty()) throw std::invalid_argument("McmConfig: no windows");
    for (size_t i = 0; i < windows.size(); ++i) {
        if (windows[i] <= 0) throw std::invalid_argument("McmConfig: windows must be positive");
        if (i > 0 && windows[i] <= windows[i - 1])
            throw std::invalid_argument("McmConfig: windows must be strictly increasing");
    }
    if (step < 1) throw std::invalid_argument("McmConfig: step p must be >= 1");
    if (history < 0) throw std::invalid_argument("McmConfig: history h must be >= 0");
    if (smoothing_width < 1) throw std::invalid_argument("McmConfig: smoothing width must be >= 1");
    for (const auto& s : seasonal) {
        if (s.count < 0) throw std::invalid_argument("McmConfig: seasonal count m_i must be >= 0");
        if (s.count > 0) {
            if (s.period_points < step)
                throw std::invalid_argument("McmConfig: seasonal period shorter than step p");
            if (s.period_points % step != 0)
                throw std::invalid_argument("McmConfig: seasonal period must be a multiple of p");
        }
    }
}

long McmConfig::slot_count() const {
    long m_total = 0;
    for (const auto& s : seasonal) m_total += s.count;
    return history + 1 + m_total;
}

McmSequence build_mcm(const SeriesFrame& frame, const McmConfig& config) {
    config.validate();
    const long n = frame.n;
    const long T = frame.T;
    const long p = config.step;
    const long C = config.channels();
    if (T < config.max_window())
        throw std::invalid_argument("build_mcm: series shorter than the largest window");

    McmSequence seq;
    seq.n = n;
    seq.C = C;
    seq.p = p;
    seq.M = T / p;
    seq.raw_T = T;
    seq.matrices.reserve(static_cast<size_t>(seq.M));
    seq.step_epochs.reserve(static_cast<size_t>(seq.M));
    seq.holiday_bits.assign(static_cast<size_t>(seq.M), 0);

    // Receptive-field holiday bits: a step is flagged when any point of its
    // trailing max-window block is a holiday.
    const long reach = config.max_window();
    std::vector<char> holiday_point(static_cast<size_t>(T), 0);
    for (long h : frame.holiday_steps)
        if (h >= 0 && h < T) holiday_point[static_cast<size_t>(h)] = 1;

    RowMat values(n, T);
    for (long i = 0; i < n; ++i)
        for (long t = 0; t < T; ++t) values(i, t) = frame.at(i, t);

    for (long k = 0; k < seq.M; ++k) {
        const long t_end = (k + 1) * p - 1; // last point covered by this step
        Tensor mcm(std::vector<long>{C, n, n});
        for (long c = 0; c < C; ++c) {
            const long w = config.windows[static_cast<size_t>(c)];
            if (t_end < w - 1) continue; // window does not fit yet; leave zero
            const long t0 = t_end - w + 1;
            // Upper triangle mirrored so the matrix is symmetric exactly.
            for (long i = 0; i < n; ++i)
                for (long j = i; j < n; ++j) {
                    double acc = 0.0;
                    for (long t = t0; t <= t_end; ++t) acc += values(i, t) * values(j, t);
                    double v = acc / static_cast<double>(w);
                    mcm.at3(c, i, j) = v;
                    mcm.at3(c, j, i) = v;
                }
        }
        seq.matrices.push_back(std::move(mcm));
        seq.step_epochs.push_back(frame.epoch_at(t_end));

        long lo = std::max<long>(0, t_end - reach + 1);
        for (long t = lo; t <= t_end && !seq.holiday_bits[static_cast<size_t>(k)]; ++t)
            if (holiday_point[static_cast<size_t>(t)]) seq.holiday_bits[static_cast<size_t>(k)] = 1;
    }

    // (k+1)*p - 1 >= max_w - 1  <=>  k >= max_w/p - 1, rounded up
    seq.first_full_step = (config.max_window() + p - 1) / p - 1;
    return seq;
}

namespace {

Tensor smoothed_step(const McmSequence& seq, long center, long width, long lo_clip) {
    // Centered neighborhood: floor(width/2) before, the step itself, the rest after.
    long before = width / 2;
    long lo = std::max(center - before, lo_clip);
    long hi = std::min(center + (width - 1 - before), seq.M - 1);
    Tensor acc(seq.matrices[static_cast<size_t>(center)].shape());
    long cnt = 0;
    for (long s = lo; s <= hi; ++s) {
        acc.array() += seq.matrices[static_cast<size_t>(s)].array();
        ++cnt;
    }
    if (cnt > 1) acc.array() /= static_cast<double>(cnt);
    return acc;
}

bool window_touches_holiday(const McmSequence& seq, long center, long width, long lo_clip) {
    long before = width / 2;
    long lo = std::max(center - before, lo_clip);
    long hi = std::min(center + (width - 1 - before), seq.M - 1);
    for (long s = lo; s <= hi; ++s)
        if (seq.holiday_bits[static_cast<size_t>(s)]) return true;
    return false;
}

} // namespace

std::vector<ModelInput> assemble_inputs(const McmSequence& seq, const McmConfig& config) {
    config.validate();
    if (seq.p != config.step)
        throw std::invalid_argument("assemble_inputs: sequence built with a different step");

    struct SlotRef {
        long step;      // nominal step index
        bool seasonal;  // smoothed when true
    };

    // Seasonal lags in ascending nominal time, i.e. most distant first.
    std::vector<long> seasonal_lags;
    for (const auto& s : config.seasonal) {
        const long period_steps = s.count > 0 ? s.period_points / config.step : 0;
        for (long j = s.count; j >= 1; --j) seasonal_lags.push_back(j * period_steps);
    }
    std::sort(seasonal_lags.begin(), seasonal_lags.end(), std::greater<long>());

    long max_lag = config.history;
    for (long lag : seasonal_lags) max_lag = std::max(max_lag, lag);
    const long smooth_reach = config.smoothing_width / 2;

    // Every slot step (and its smoothing window) must land on a fully
    // populated MCM; earlier targets are dropped.
    const long first_target = seq.first_full_step + max_lag + (seasonal_lags.empty() ? 0 : smooth_reach);

    std::vector<ModelInput> inputs;
    for (long t = first_target; t < seq.M; ++t) {
        std::vector<SlotRef> refs;
        refs.reserve(static_cast<size_t>(config.slot_count()));
        for (long lag : seasonal_lags) refs.push_back({t - lag, true});
        for (long j = config.history; j >= 1; --j) refs.push_back({t - j, false});
        refs.push_back({t, false}); // current step, always last

        ModelInput in;
        in.target_step = t;
        in.slots.reserve(refs.size());
        in.mask.reserve(refs.size());
        for (size_t r = 0; r < refs.size(); ++r) {
            const auto& ref = refs[r];
            bool is_current = (r + 1 == refs.size());
            if (ref.seasonal) {
                in.slots.push_back(
                    smoothed_step(seq, ref.step, config.smoothing_width, seq.first_full_step));
                bool hol = window_touches_holiday(seq, ref.step, config.smoothing_width,
                                                  seq.first_full_step);
                in.mask.push_back(hol ? 0 : 1);
            } else {
                in.slots.push_back(seq.matrices[static_cast<size_t>(ref.step)]);
                bool hol = seq.holiday_bits[static_cast<size_t>(ref.step)] != 0;
                // The current slot is the attention query and is never masked.
                in.mask.push_back((hol && !is_current) ? 0 : 1);
            }
        }
        in.target = seq.matrices[static_cast<size_t>(t)];
        inputs.push_back(std::move(in));
    }
    return inputs;
}

Tensor residual_first_channel(const Tensor& target, const Tensor& reconstruction) {
    if (!target.same_shape(reconstruction))
        throw std::invalid_argument("residual_first_channel: shape mismatch " +
                                    Tensor::shape_str(target.shape()) + " vs " +
                                    Tensor::shape_str(reconstruction.shape()));
    if (target.rank() != 3) throw std::invalid_argument("residual_first_channel: expected (C,n,n)");
    const long n = target.dim(1);
    Tensor r(std::vector<long>{n, n});
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) r.at2(i, j) = target.at3(0, i, j) - reconstruction.at3(0, i, j);
    return r;
}

void write_mcm_binary(const McmSequence& seq, const std::string& data_path,
                      const std::string& sidecar_path) {
    std::ofstream out(data_path, std::ios::binary);
    if (!out) throw std::runtime_error("write_mcm_binary: cannot open " + data_path);
    const char magic[8] = {'R', 'S', 'M', 'C', 'M', '0', '0', '1'};
    out.write(magic, 8);
    std::int64_t dims[4] = {seq.M, seq.C, seq.n, seq.n};
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    for (const auto& m : seq.matrices)
        out.write(reinterpret_cast<const char*>(m.data()),
                  static_cast<std::streamsize>(m.numel() * sizeof(double)));
    if (!out) throw std::runtime_error("write_mcm_binary: write failed for " + data_path);

    nlohmann::json j;
    j["shape"] = {seq.M, seq.C, seq.n, seq.n};
    j["step"] = seq.p;
    j["raw_T"] = seq.raw_T;
    j["first_full_step"] = seq.first_full_step;
    j["step_epochs"] = seq.step_epochs;
    j["holiday_bits"] = std::vector<int>(seq.holiday_bits.begin(), seq.holiday_bits.end());
    std::ofstream side(sidecar_path);
    if (!side) throw std::runtime_error("write_mcm_binary: cannot open " + sidecar_path);
    side << j.dump(2) << "\n";
}

McmSequence read_mcm_binary(const std::string& data_path, const std::string& sidecar_path) {
    std::ifstream side(sidecar_path);
    if (!side) throw std::runtime_error("read_mcm_binary: cannot open " + sidecar_path);
    nlohmann::json j;
    side >> j;

    McmSequence seq;
    auto shape = j.at("shape").get<std::vector<long>>();
    seq.M = shape.at(0);
    seq.C = shape.at(1);
    seq.n = shape.at(2);
    seq.p = j.at("step").get<long>();
    seq.raw_T = j.value("raw_T", seq.M * seq.p);
    seq.first_full_step = j.at("first_full_step").get<long>();
    seq.step_epochs = j.at("step_epochs").get<std::vector<std::int64_t>>();
    auto bits = j.at("holiday_bits").get<std::vector<int>>();
    seq.holiday_bits.assign(bits.begin(), bits.end());

    std::ifstream in(data_path, std::ios::binary);
    if (!in) throw std::runtime_error("read_mcm_binary: cannot open " + data_path);
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "RSMCM001", 8) != 0)
        throw std::runtime_error("read_mcm_binary: bad magic in " + data_path);
    std::int64_t dims[4];
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (dims[0] != seq.M || dims[1] != seq.C || dims[2] != seq.n || dims[3] != seq.n)
        throw std::runtime_error("read_mcm_binary: sidecar/data shape mismatch");
    seq.matrices.reserve(static_cast<size_t>(seq.M));
    for (long k = 0; k < seq.M; ++k) {
        Tensor m(std::vector<long>{seq.C, seq.n, seq.n});
        in.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(m.numel() * sizeof(double)));
        seq.matrices.push_back(std::move(m));
    }
    if (!in) throw std::runtime_error("read_mcm_binary: truncated data in " + data_path);
    return seq;
}

} // namespace rsmgan
