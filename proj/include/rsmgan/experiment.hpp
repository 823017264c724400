#ifndef RSMGAN_EXPERIMENT_HPP
#define RSMGAN_EXPERIMENT_HPP

#include "rsmgan/datagen.hpp"
#include "rsmgan/detect.hpp"
#include "rsmgan/evalkit.hpp"
#include "rsmgan/mcm.hpp"
#include "rsmgan/model.hpp"
#include "rsmgan/rootcause.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rsmgan {

struct DataConfig {
    std::string kind = "synthetic"; // "synthetic" or "csv"
    long n = 10;
    long T = 10080;
    long step_seconds = 60;
    std::vector<SeasonKind> patterns{SeasonKind::random};
    double noise_scale = 0.3;
    long train_anomalies = 0;
    long test_anomalies = 10;
    std::vector<long> holiday_days;
    double holiday_surge = 3.0;
    std::string csv_path;
    std::string labels_path;
    std::string holidays_path;
};

struct DetectConfig {
    std::vector<double> beta_grid = default_beta_grid();
    std::string objective = "f1";
    ScoreMethod method = ScoreMethod::context_h;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> seeds; // non-empty: per-seed children + mean report
    std::string output_dir = "out";
    DataConfig data;
    McmConfig mcm;
    NetworkConfig network;
    DetectConfig detect;
    RootCauseMethod rc_method = RootCauseMethod::AE;
    NabProfile nab;
};

ExperimentConfig experiment_config_from_file(const std::string& path);
ExperimentConfig experiment_config_from_json_text(const std::string& text);
std::string experiment_config_to_json_text(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

/// Per-method evaluation of one finished run.
struct MethodEval {
    PointMetrics points;
    double nab = 0.0;
};

struct RunSummary {
    std::uint64_t seed = 0;
    ThresholdFit thresholds;
    MethodEval context_b;
    MethodEval context_h;
    std::optional<double> rc_recall;
    long detected_windows = 0;
};

// Pipeline stages; every stage reads its inputs from the run directory and
// persists its outputs there, so a run can resume from any point.
void stage_generate(const ExperimentConfig& cfg, const std::string& dir);
void stage_featurize(const ExperimentConfig& cfg, const std::string& dir);
void stage_train(const ExperimentConfig& cfg, const std::string& dir);
void stage_detect(const ExperimentConfig& cfg, const std::string& dir);
void stage_rootcause(const ExperimentConfig& cfg, const std::string& dir);
RunSummary stage_evaluate(const ExperimentConfig& cfg, const std::string& dir);
void stage_plot(const ExperimentConfig& cfg, const std::string& dir);

/// All stages in order for one seed; returns the evaluation summary.
RunSummary run_single(const ExperimentConfig& cfg, const std::string& dir);

/// Seed list + sweep expansion; children run in subdirectories and a mean
/// report is written when several seeds are configured.
struct SweepResult {
    std::vector<RunSummary> runs;
    std::string output_dir;
};

SweepResult run_experiment(const ExperimentConfig& cfg);

RunSummary read_run_summary(const std::string& dir);

/// One row per (run, method): precision, recall, F1, FPR, NAB, root-cause
/// recall.
void write_comparison_csv(const std::vector<std::pair<std::string, RunSummary>>& rows,
                          const std::string& path);

/// Split boundaries in raw points and MCM step terms.
struct StepSplit {
    SplitSpec raw;
    std::vector<long> train_steps, val_steps, test_steps;
};

StepSplit split_steps(long T, long p, long first_input_step);

} // namespace rsmgan

#endif
