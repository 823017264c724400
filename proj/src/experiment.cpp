#include "rsmgan/experiment.hpp"

#include "rsmgan/config_json.hpp"
#include "rsmgan/plot.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace rsmgan {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- config (de)serialization ----

namespace {

json data_to_json(const DataConfig& d) {
    json j;
    j["kind"] = d.kind;
    if (d.kind == "synthetic") {
        j["n"] = d.n;
        j["T"] = d.T;
        j["step_seconds"] = d.step_seconds;
        std::vector<std::string> pats;
        for (auto k : d.patterns) pats.push_back(to_string(k));
        j["patterns"] = pats;
        j["noise_scale"] = d.noise_scale;
        j["train_anomalies"] = d.train_anomalies;
        j["test_anomalies"] = d.test_anomalies;
        j["holiday_days"] = d.holiday_days;
        j["holiday_surge"] = d.holiday_surge;
    } else {
        j["csv"] = d.csv_path;
        j["labels"] = d.labels_path;
        j["holidays"] = d.holidays_path;
    }
    return j;
}

DataConfig data_from_json(const json& j) {
    DataConfig d;
    d.kind = j.value("kind", d.kind);
    if (d.kind == "synthetic") {
        d.n = j.value("n", d.n);
        d.T = j.value("T", d.T);
        d.step_seconds = j.value("step_seconds", d.step_seconds);
        if (j.contains("patterns")) {
            d.patterns.clear();
            for (const auto& s : j.at("patterns"))
                d.patterns.push_back(season_kind_from_string(s.get<std::string>()));
        }
        d.noise_scale = j.value("noise_scale", d.noise_scale);
        d.train_anomalies = j.value("train_anomalies", d.train_anomalies);
        d.test_anomalies = j.value("test_anomalies", d.test_anomalies);
        d.holiday_days = j.value("holiday_days", d.holiday_days);
        d.holiday_surge = j.value("holiday_surge", d.holiday_surge);
    } else if (d.kind == "csv") {
        d.csv_path = j.at("csv").get<std::string>();
        d.labels_path = j.value("labels", std::string());
        d.holidays_path = j.value("holidays", std::string());
    } else {
        throw std::invalid_argument("data config: unknown kind '" + d.kind + "'");
    }
    return d;
}

json mcm_to_json(const McmConfig& m) {
    json j;
    j["windows"] = m.windows;
    j["step"] = m.step;
    j["history"] = m.history;
    j["smoothing_width"] = m.smoothing_width;
    json seasonal = json::array();
    for (const auto& s : m.seasonal)
        seasonal.push_back({{"period_points", s.period_points}, {"count", s.count}});
    j["seasonal"] = seasonal;
    return j;
}

McmConfig mcm_from_json(const json& j) {
    McmConfig m;
    m.windows = j.value("windows", m.windows);
    m.step = j.value("step", m.step);
    m.history = j.value("history", m.history);
    m.smoothing_width = j.value("smoothing_width", m.smoothing_width);
    if (j.contains("seasonal")) {
        m.seasonal.clear();
        for (const auto& s : j.at("seasonal"))
            m.seasonal.push_back(
                {s.at("period_points").get<long>(), s.at("count").get<long>()});
    }
    m.validate();
    return m;
}

json detect_to_json(const DetectConfig& d) {
    return {{"beta_grid", d.beta_grid}, {"objective", d.objective}, {"method", to_string(d.method)}};
}

DetectConfig detect_from_json(const json& j) {
    DetectConfig d;
    d.beta_grid = j.value("beta_grid", d.beta_grid);
    d.objective = j.value("objective", d.objective);
    if (j.contains("method")) d.method = score_method_from_string(j.at("method").get<std::string>());
    return d;
}

json experiment_to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["seed"] = c.seed;
    if (!c.seeds.empty()) j["seeds"] = c.seeds;
    j["output_dir"] = c.output_dir;
    j["data"] = data_to_json(c.data);
    j["mcm"] = mcm_to_json(c.mcm);
    j["network"] = network_config_to_json(c.network);
    j["detect"] = detect_to_json(c.detect);
    j["rootcause"] = {{"method", to_string(c.rc_method)}};
    j["nab"] = {{"tp", c.nab.tp_weight}, {"fp", c.nab.fp_weight}, {"fn", c.nab.fn_weight}};
    return j;
}

ExperimentConfig experiment_from_json(const json& j) {
    ExperimentConfig c;
    c.name = j.value("name", c.name);
    c.seed = j.value("seed", c.seed);
    c.seeds = j.value("seeds", c.seeds);
    c.output_dir = j.value("output_dir", c.output_dir);
    if (j.contains("data")) c.data = data_from_json(j.at("data"));
    if (j.contains("mcm")) c.mcm = mcm_from_json(j.at("mcm"));
    if (j.contains("network")) c.network = network_config_from_json(j.at("network"));
    if (j.contains("detect")) c.detect = detect_from_json(j.at("detect"));
    if (j.contains("rootcause"))
        c.rc_method = root_cause_method_from_string(j.at("rootcause").at("method").get<std::string>());
    if (j.contains("nab")) {
        c.nab.tp_weight = j.at("nab").value("tp", c.nab.tp_weight);
        c.nab.fp_weight = j.at("nab").value("fp", c.nab.fp_weight);
        c.nab.fn_weight = j.at("nab").value("fn", c.nab.fn_weight);
    }
    return c;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

ExperimentConfig experiment_config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("experiment config: cannot open " + path);
    json j;
    in >> j;
    return experiment_from_json(j);
}

ExperimentConfig experiment_config_from_json_text(const std::string& text) {
    return experiment_from_json(json::parse(text));
}

std::string experiment_config_to_json_text(const ExperimentConfig& cfg) {
    return experiment_to_json(cfg).dump(2);
}

std::string config_hash(const ExperimentConfig& cfg) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(experiment_to_json(cfg).dump())));
    return buf;
}

// ---- run-dir bookkeeping ----

namespace {

struct Paths {
    fs::path dir;
    fs::path data_csv, labels, holidays;
    fs::path mcm_bin, mcm_json;
    fs::path checkpoint;
    fs::path residuals_bin, residuals_json;
    fs::path scores_b, scores_h, thresholds;
    fs::path rootcause, eval, manifest;
    fs::path plots;

    explicit Paths(const std::string& d) : dir(d) {
        data_csv = dir / "data.csv";
        labels = dir / "labels.json";
        holidays = dir / "holidays.json";
        mcm_bin = dir / "mcm.bin";
        mcm_json = dir / "mcm.json";
        checkpoint = dir / "checkpoint";
        residuals_bin = dir / "residuals.bin";
        residuals_json = dir / "residuals.json";
        scores_b = dir / "scores_context_b.csv";
        scores_h = dir / "scores_context_h.csv";
        thresholds = dir / "thresholds.json";
        rootcause = dir / "rootcause.json";
        eval = dir / "eval.json";
        manifest = dir / "manifest.json";
        plots = dir / "plots";
    }
};

void update_manifest(const ExperimentConfig& cfg, const Paths& p, const std::string& stage,
                     const std::string& status) {
    json m;
    if (fs::exists(p.manifest)) {
        std::ifstream in(p.manifest);
        in >> m;
    } else {
        m["config_hash"] = config_hash(cfg);
        m["seed"] = cfg.seed;
        m["versions"] = {{"artifact", "0.1.0"}, {"mcm_format", 1}, {"checkpoint_format", 1}};
        m["stages"] = json::object();
    }
    m["stages"][stage] = status;
    std::ofstream out(p.manifest);
    out << m.dump(2) << "\n";
}

void require_file(const fs::path& f, const std::string& stage) {
    if (!fs::exists(f))
        throw std::runtime_error(stage + ": missing input artifact " + f.string() +
                                 " (run the earlier stages first)");
}

// Residual archive: step-aligned channel-0 residual matrices.
void write_residuals(const fs::path& bin, const fs::path& side, const ResidualTrace& trace,
                     long T, const SplitSpec& split) {
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw std::runtime_error("write_residuals: cannot open " + bin.string());
    const char magic[8] = {'R', 'S', 'M', 'R', 'E', 'S', '0', '1'};
    out.write(magic, 8);
    std::int64_t count = static_cast<std::int64_t>(trace.steps.size());
    std::int64_t n = trace.residuals.empty() ? 0 : trace.residuals[0].dim(0);
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    for (size_t i = 0; i < trace.steps.size(); ++i) {
        std::int64_t step = trace.steps[i];
        out.write(reinterpret_cast<const char*>(&step), sizeof(step));
        out.write(reinterpret_cast<const char*>(trace.residuals[i].data()),
                  static_cast<std::streamsize>(trace.residuals[i].numel() * sizeof(double)));
    }
    json j;
    j["p"] = trace.p;
    j["T"] = T;
    j["train_end"] = split.train_end;
    j["val_end"] = split.val_end;
    std::ofstream sj(side);
    sj << j.dump(2) << "\n";
}

struct ResidualArchive {
    ResidualTrace trace;
    long T = 0;
    SplitSpec split;
};

ResidualArchive read_residuals(const fs::path& bin, const fs::path& side) {
    ResidualArchive arch;
    std::ifstream sj(side);
    if (!sj) throw std::runtime_error("read_residuals: cannot open " + side.string());
    json j;
    sj >> j;
    arch.trace.p = j.at("p").get<long>();
    arch.T = j.at("T").get<long>();
    arch.split.T = arch.T;
    arch.split.train_end = j.at("train_end").get<long>();
    arch.split.val_end = j.at("val_end").get<long>();

    std::ifstream in(bin, std::ios::binary);
    if (!in) throw std::runtime_error("read_residuals: cannot open " + bin.string());
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "RSMRES01", 8) != 0)
        throw std::runtime_error("read_residuals: bad magic");
    std::int64_t count = 0, n = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    for (std::int64_t i = 0; i < count; ++i) {
        std::int64_t step = 0;
        in.read(reinterpret_cast<char*>(&step), sizeof(step));
        Tensor r(std::vector<long>{n, n});
        in.read(reinterpret_cast<char*>(r.data()),
                static_cast<std::streamsize>(r.numel() * sizeof(double)));
        arch.trace.steps.push_back(static_cast<long>(step));
        arch.trace.residuals.push_back(std::move(r));
    }
    if (!in) throw std::runtime_error("read_residuals: truncated file");
    return arch;
}

ResidualTrace subset_trace(const ResidualTrace& all, const std::vector<long>& steps) {
    std::vector<long> want = steps;
    std::sort(want.begin(), want.end());
    ResidualTrace out;
    out.p = all.p;
    for (size_t i = 0; i < all.steps.size(); ++i)
        if (std::binary_search(want.begin(), want.end(), all.steps[i])) {
            out.steps.push_back(all.steps[i]);
            out.residuals.push_back(all.residuals[i]);
        }
    return out;
}

std::vector<Window> label_windows_within(const std::vector<AnomalySpec>& labels, long lo, long hi) {
    std::vector<Window> out;
    for (const auto& a : labels)
        if (a.start >= lo && a.end() <= hi) out.push_back({a.start, a.end()});
    return out;
}

} // namespace

StepSplit split_steps(long T, long p, long first_input_step) {
    StepSplit out;
    out.raw = compute_split(T);
    const long M = T / p;
    for (long k = first_input_step; k < M; ++k) {
        const long lo = k * p, hi = (k + 1) * p;
        if (hi <= out.raw.train_end)
            out.train_steps.push_back(k);
        else if (lo >= out.raw.train_end && hi <= out.raw.val_end)
            out.val_steps.push_back(k);
        else if (lo >= out.raw.val_end)
            out.test_steps.push_back(k);
        // boundary-straddling steps are dropped
    }
    return out;
}

// ---- stages ----

void stage_generate(const ExperimentConfig& cfg, const std::string& dir) {
    Paths p(dir);
    fs::create_directories(p.dir);
    {
        std::ofstream cf(p.dir / "config.json");
        cf << experiment_config_to_json_text(cfg) << "\n";
    }

    if (cfg.data.kind == "csv") {
        // External dataset: normalize into the run directory.
        SeriesFrame frame = read_series_csv(cfg.data.csv_path);
        std::vector<AnomalySpec> train, test;
        if (!cfg.data.labels_path.empty()) read_labels_json(cfg.data.labels_path, frame, &train, &test);
        std::vector<long> holidays;
        if (!cfg.data.holidays_path.empty())
            holidays = read_holidays_json(cfg.data.holidays_path, frame);
        frame.holiday_steps = holidays;
        write_series_csv(frame, p.data_csv.string());
        write_labels_json(train, test, frame, p.labels.string());
        write_holidays_json(holidays, frame, p.holidays.string());
        update_manifest(cfg, p, "generate", "done");
        return;
    }

    SeriesFrame frame = generate_mts(cfg.data.n, cfg.data.T, cfg.data.patterns, cfg.seed,
                                     cfg.data.step_seconds, cfg.data.noise_scale);
    std::vector<long> holiday_steps;
    if (!cfg.data.holiday_days.empty()) {
        const long steps_per_day = 86400 / cfg.data.step_seconds;
        holiday_steps = holiday_days_to_steps(cfg.data.holiday_days, steps_per_day, cfg.data.T);
        frame = inject_holidays(frame, holiday_steps, cfg.seed, cfg.data.holiday_surge);
    }

    std::vector<AnomalySpec> train_labels, test_labels;
    if (cfg.data.train_anomalies > 0) {
        InjectResult r = inject_anomalies(frame, cfg.data.train_anomalies, /*train=*/true,
                                          Rng::mix(cfg.seed, 0x7e57));
        frame = std::move(r.frame);
        train_labels = std::move(r.labels);
    }
    if (cfg.data.test_anomalies > 0) {
        InjectResult r = inject_anomalies(frame, cfg.data.test_anomalies, /*train=*/false,
                                          Rng::mix(cfg.seed, 0x7e58));
        frame = std::move(r.frame);
        test_labels = std::move(r.labels);
    }
    frame.holiday_steps = holiday_steps;

    write_series_csv(frame, p.data_csv.string());
    write_labels_json(train_labels, test_labels, frame, p.labels.string());
    write_holidays_json(holiday_steps, frame, p.holidays.string());
    update_manifest(cfg, p, "generate", "done");
}

void stage_featurize(const ExperimentConfig& cfg, const std::string& dir) {
    Paths p(dir);
    require_file(p.data_csv, "featurize");
    SeriesFrame frame = read_series_csv(p.data_csv.string());
    if (fs::exists(p.holidays))
        frame.holiday_steps = read_holidays_json(p.holidays.string(), frame);

    SplitSpec split = compute_split(frame.T);
    SeriesFrame z = zscore_by_train(frame, split.train_end);
    McmSequence seq = build_mcm(z, cfg.mcm);
    write_mcm_binary(seq, p.mcm_bin.string(), p.mcm_json.string());
    update_manifest(cfg, p, "featurize", "done");
}

void stage_train(const ExperimentConfig& cfg, const std::string& dir) {
    Paths p(dir);
    require_file(p.mcm_bin, "train");
    McmSequence seq = read_mcm_binary(p.mcm_bin.string(), p.mcm_json.string());
    std::vector<ModelInput> inputs = assemble_inputs(seq, cfg.mcm);
    if (inputs.empty()) throw std::runtime_error("train: no assembled inputs");

    StepSplit sp = split_steps(seq.raw_T, seq.p, inputs.front().target_step);
    std::vector<ModelInput> train_inputs;
    for (auto& in : inputs)
        if (!sp.train_steps.empty() && in.target_step <= sp.train_steps.back() &&
            in.target_step >= sp.train_steps.front())
            train_inputs.push_back(std::move(in));
    if (train_inputs.empty()) throw std::runtime_error("train: no training-range inputs");

    ReconstructionModel model = ReconstructionModel::train(
        train_inputs, cfg.network, cfg.seed, [](const EpochStats& s) {
            if (s.epoch % 10 == 0)
                std::cerr << "[train] epoch " << s.epoch << " contextual=" << s.contextual
                          << " latent=" << s.latent << " L_D=" << s.loss_d << "\n";
        });
    model.save(p.checkpoint.string());
    update_manifest(cfg, p, "train", "done");
}

void stage_detect(const ExperimentConfig& cfg, const std::string& dir) {
    Paths p(dir);
    require_file(p.mcm_bin, "detect");
    require_file(p.checkpoint / "params.bin", "detect");
    McmSequence seq = read_mcm_binary(p.mcm_bin.string(), p.mcm_json.string());
    std::vector<ModelInput> inputs = assemble_inputs(seq, cfg.mcm);
    ReconstructionModel model = ReconstructionModel::load(p.checkpoint.string());

    ReconstructionResult rec = model.reconstruct(inputs);
    ResidualTrace all;
    all.p = seq.p;
    all.steps = rec.target_steps;
    all.residuals = std::move(rec.residuals);

    SplitSpec split = compute_split(seq.raw_T);
    write_residuals(p.residuals_bin, p.residuals_json, all, seq.raw_T, split);

    StepSplit sp = split_steps(seq.raw_T, seq.p, all.steps.front());
    ResidualTrace train_trace = subset_trace(all, sp.train_steps);
    ResidualTrace val_trace = subset_trace(all, sp.val_steps);

    std::vector<AnomalySpec> train_labels, test_labels;
    SeriesFrame dummy;
    read_labels_json(p.labels.string(), dummy, &train_labels, &test_labels);
    std::vector<Window> val_windows =
        label_windows_within(test_labels, split.train_end, split.val_end);

    ThresholdFit fit =
        fit_thresholds(train_trace, val_trace, val_windows, cfg.detect.beta_grid,
                       cfg.detect.objective);
    write_threshold_json(fit, p.thresholds.string());

    for (ScoreMethod m : {ScoreMethod::context_b, ScoreMethod::context_h}) {
        double theta = m == ScoreMethod::context_b ? fit.theta_b : fit.theta_h;
        ScoreTrace t = score_trace(all, m, theta);
        t.step_epochs.reserve(t.steps.size());
        for (long s : t.steps) t.step_epochs.push_back(seq.step_epochs[static_cast<size_t>(s)]);
        write_score_trace_csv(t, (m == ScoreMethod::context_b ? p.scores_b : p.scores_h).string());
    }
    update_manifest(cfg, p, "detect", "done");
}

void stage_rootcause(const ExperimentConfig& cfg, const std::string& dir) {
    Paths p(dir);
    require_file(p.residuals_bin, "rootcause");
    require_file(p.thresholds, "rootcause");
    ResidualArchive arch = read_residuals(p.residuals_bin, p.residuals_json);

    json tj;
    {
        std::ifstream in(p.thresholds);
        in >> tj;
    }
    const double theta_b = tj.at("theta_b").get<double>();
    const double theta = cfg.detect.method == ScoreMethod::context_b
                             ? theta_b
                             : tj.at("theta_h").get<double>();

    StepSplit sp = split_steps(arch.T, arch.trace.p, arch.trace.steps.front());
    ResidualTrace test_trace = subset_trace(arch.trace, sp.test_steps);
    ScoreTrace trace = score_trace(test_trace, cfg.detect.method, theta);

    // Consecutive detected steps form one anomaly window.
    std::vector<RootCauseReport> reports;
    size_t i = 0;
    while (i < trace.steps.size()) {
        if (!trace.detections[i]) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j + 1 < trace.steps.size() && trace.detections[j + 1] &&
               trace.steps[j + 1] == trace.steps[j] + 1)
            ++j;
        std::vector<Tensor> window;
        for (size_t k = i; k <= j; ++k) window.push_back(test_trace.residuals[k]);

        RootCauseReport r;
        r.window_steps = {trace.steps[i], trace.steps[j] + 1};
        r.window_raw = {trace.steps[i] * trace.p, (trace.steps[j] + 1) * trace.p};
        r.method = cfg.rc_method;
        r.scores = score_series(window, cfg.rc_method, theta_b);
        ElbowResult elbow = select_elbow(r.scores);
        r.selected = elbow.selected;
        r.elbow_index = elbow.elbow_index;
        r.distinguished = elbow.distinguished;
        reports.push_back(std::move(r));
        i = j + 1;
    }
    write_root_cause_reports_json(reports, p.rootcause.string());
    update_manifest(cfg, p, "rootcause", "done");
}

RunSummary stage_evaluate(const ExperimentConfig& cfg, const std::string& dir) {
    Paths p(dir);
    require_file(p.residuals_bin, "evaluate");
    require_file(p.thresholds, "evaluate");
    ResidualArchive arch = read_residuals(p.residuals_bin, p.residuals_json);

    json tj;
    {
        std::ifstream in(p.thresholds);
        in >> tj;
    }
    RunSummary sum;
    sum.seed = cfg.seed;
    sum.thresholds.eta996 = tj.at("eta996").get<double>();
    sum.thresholds.beta_b = tj.at("beta_b").get<double>();
    sum.thresholds.beta_h = tj.at("beta_h").get<double>();
    sum.thresholds.theta_b = tj.at("theta_b").get<double>();
    sum.thresholds.theta_h = tj.at("theta_h").get<double>();
    sum.thresholds.objective = tj.value("objective", "f1");
    sum.thresholds.from_grid_search = tj.value("from_grid_search", false);

    std::vector<AnomalySpec> train_labels, test_labels;
    SeriesFrame dummy;
    read_labels_json(p.labels.string(), dummy, &train_labels, &test_labels);

    StepSplit sp = split_steps(arch.T, arch.trace.p, arch.trace.steps.front());
    ResidualTrace test_trace = subset_trace(arch.trace, sp.test_steps);
    std::vector<Window> eval_range = step_blocks(sp.test_steps, arch.trace.p);
    std::vector<Window> test_windows =
        label_windows_within(test_labels, arch.split.val_end, arch.T);

    for (ScoreMethod m : {ScoreMethod::context_b, ScoreMethod::context_h}) {
        double theta = m == ScoreMethod::context_b ? sum.thresholds.theta_b
                                                   : sum.thresholds.theta_h;
        ScoreTrace t = score_trace(test_trace, m, theta);
        std::vector<long> dets = detected_raw_points(t);
        MethodEval ev;
        ev.points = point_metrics(dets, test_windows, eval_range);
        ev.nab = test_windows.empty() ? 0.0 : nab_score(dets, test_windows, cfg.nab);
        (m == ScoreMethod::context_b ? sum.context_b : sum.context_h) = ev;
    }

    // Root-cause recall against the chosen method's reports.
    if (fs::exists(p.rootcause)) {
        json rj;
        std::ifstream in(p.rootcause);
        in >> rj;
        std::vector<RootCausePrediction> preds;
        for (const auto& r : rj) {
            RootCausePrediction pr;
            pr.window = {r.at("window_raw")[0].get<long>(), r.at("window_raw")[1].get<long>()};
            pr.series = r.at("selected").get<std::vector<long>>();
            preds.push_back(std::move(pr));
        }
        sum.detected_windows = static_cast<long>(preds.size());
        std::vector<RootCauseTruth> truth;
        for (const auto& a : test_labels)
            if (a.start >= arch.split.val_end)
                truth.push_back({{a.start, a.end()}, a.root_causes});
        sum.rc_recall = root_cause_recall(preds, truth);
    }

    json out;
    out["seed"] = sum.seed;
    out["thresholds"] = tj;
    auto method_json = [](const MethodEval& ev) {
        return json{{"precision", ev.points.precision}, {"recall", ev.points.recall},
                    {"f1", ev.points.f1},               {"fpr", ev.points.fpr},
                    {"nab", ev.nab},                    {"tp", ev.points.tp},
                    {"fp", ev.points.fp},               {"fn", ev.points.fn},
                    {"tn", ev.points.tn}};
    };
    out["context_b"] = method_json(sum.context_b);
    out["context_h"] = method_json(sum.context_h);
    if (sum.rc_recall)
        out["root_cause_recall"] = *sum.rc_recall;
    else
        out["root_cause_recall"] = nullptr;
    out["detected_windows"] = sum.detected_windows;
    std::ofstream ef(p.eval);
    ef << out.dump(2) << "\n";
    update_manifest(cfg, p, "evaluate", "done");
    return sum;
}

void stage_plot(const ExperimentConfig& cfg, const std::string& dir) {
    Paths p(dir);
    require_file(p.residuals_bin, "plot");
    require_file(p.thresholds, "plot");
    ResidualArchive arch = read_residuals(p.residuals_bin, p.residuals_json);
    json tj;
    {
        std::ifstream in(p.thresholds);
        in >> tj;
    }
    std::vector<AnomalySpec> train_labels, test_labels;
    SeriesFrame dummy;
    read_labels_json(p.labels.string(), dummy, &train_labels, &test_labels);
    std::vector<Window> truth;
    for (const auto& a : test_labels) truth.push_back({a.start, a.end()});

    fs::create_directories(p.plots);
    for (ScoreMethod m : {ScoreMethod::context_b, ScoreMethod::context_h}) {
        double theta = m == ScoreMethod::context_b ? tj.at("theta_b").get<double>()
                                                   : tj.at("theta_h").get<double>();
        ScoreTrace t = score_trace(arch.trace, m, theta);
        write_score_plot_svg(t, truth, to_string(m) + " anomaly score",
                             (p.plots / (to_string(m) + ".svg")).string());
    }
    update_manifest(cfg, p, "plot", "done");
}

RunSummary run_single(const ExperimentConfig& cfg, const std::string& dir) {
    Paths p(dir);
    const char* stage = "generate";
    try {
        stage_generate(cfg, dir);
        stage = "featurize";
        stage_featurize(cfg, dir);
        stage = "train";
        stage_train(cfg, dir);
        stage = "detect";
        stage_detect(cfg, dir);
        stage = "rootcause";
        stage_rootcause(cfg, dir);
        stage = "evaluate";
        RunSummary sum = stage_evaluate(cfg, dir);
        stage = "plot";
        stage_plot(cfg, dir);
        return sum;
    } catch (...) {
        // Partial artifacts stay in place with a failure marker.
        try {
            update_manifest(cfg, p, stage, "failed");
        } catch (...) {
        }
        throw;
    }
}

SweepResult run_experiment(const ExperimentConfig& cfg) {
    SweepResult result;
    result.output_dir = cfg.output_dir;
    if (cfg.seeds.empty()) {
        result.runs.push_back(run_single(cfg, cfg.output_dir));
        return result;
    }
    for (std::uint64_t s : cfg.seeds) {
        ExperimentConfig child = cfg;
        child.seed = s;
        child.seeds.clear();
        fs::path child_dir = fs::path(cfg.output_dir) / ("seed_" + std::to_string(s));
        child.output_dir = child_dir.string();
        result.runs.push_back(run_single(child, child.output_dir));
    }

    // Mean report across seeds.
    json mean;
    auto acc_method = [&](auto get) {
        json m;
        double pr = 0, rc = 0, f1 = 0, fpr = 0, nab = 0;
        for (const auto& r : result.runs) {
            const MethodEval& ev = get(r);
            pr += ev.points.precision;
            rc += ev.points.recall;
            f1 += ev.points.f1;
            fpr += ev.points.fpr;
            nab += ev.nab;
        }
        double n = static_cast<double>(result.runs.size());
        m["precision"] = pr / n;
        m["recall"] = rc / n;
        m["f1"] = f1 / n;
        m["fpr"] = fpr / n;
        m["nab"] = nab / n;
        return m;
    };
    mean["runs"] = result.runs.size();
    mean["context_b"] = acc_method([](const RunSummary& r) -> const MethodEval& { return r.context_b; });
    mean["context_h"] = acc_method([](const RunSummary& r) -> const MethodEval& { return r.context_h; });
    double rc_sum = 0;
    long rc_n = 0;
    for (const auto& r : result.runs)
        if (r.rc_recall) {
            rc_sum += *r.rc_recall;
            ++rc_n;
        }
    if (rc_n > 0)
        mean["root_cause_recall"] = rc_sum / static_cast<double>(rc_n);
    else
        mean["root_cause_recall"] = nullptr;
    fs::create_directories(cfg.output_dir);
    std::ofstream mf(fs::path(cfg.output_dir) / "mean_eval.json");
    mf << mean.dump(2) << "\n";
    return result;
}

void write_comparison_csv(const std::vector<std::pair<std::string, RunSummary>>& rows,
                          const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_comparison_csv: cannot open " + path);
    out << "run,method,precision,recall,f1,fpr,nab_score,root_cause_recall\n";
    out.precision(6);
    for (const auto& [name, sum] : rows) {
        auto row = [&](const char* method, const MethodEval& ev) {
            out << name << "," << method << "," << ev.points.precision << "," << ev.points.recall
                << "," << ev.points.f1 << "," << ev.points.fpr << "," << ev.nab << ",";
            if (sum.rc_recall)
                out << *sum.rc_recall;
            else
                out << "";
            out << "\n";
        };
        row("context_b", sum.context_b);
        row("context_h", sum.context_h);
    }
}

RunSummary read_run_summary(const std::string& dir) {
    Paths p(dir);
    std::ifstream in(p.eval);
    if (!in) throw std::runtime_error("read_run_summary: missing eval.json in " + dir);
    json j;
    in >> j;
    RunSummary sum;
    sum.seed = j.value("seed", 0ULL);
    auto read_method = [&](const json& m) {
        MethodEval ev;
        ev.points.precision = m.at("precision").get<double>();
        ev.points.recall = m.at("recall").get<double>();
        ev.points.f1 = m.at("f1").get<double>();
        ev.points.fpr = m.at("fpr").get<double>();
        ev.nab = m.at("nab").get<double>();
        ev.points.tp = m.value("tp", 0L);
        ev.points.fp = m.value("fp", 0L);
        ev.points.fn = m.value("fn", 0L);
        ev.points.tn = m.value("tn", 0L);
        return ev;
    };
    sum.context_b = read_method(j.at("context_b"));
    sum.context_h = read_method(j.at("context_h"));
    if (!j.at("root_cause_recall").is_null())
        sum.rc_recall = j.at("root_cause_recall").get<double>();
    sum.detected_windows = j.value("detected_windows", 0L);
    const json& tj = j.at("thresholds");
    sum.thresholds.eta996 = tj.at("eta996").get<double>();
    sum.thresholds.beta_b = tj.at("beta_b").get<double>();
    sum.thresholds.beta_h = tj.at("beta_h").get<double>();
    sum.thresholds.theta_b = tj.at("theta_b").get<double>();
    sum.thresholds.theta_h = tj.at("theta_h").get<double>();
    return sum;
}

} // namespace rsmgan
