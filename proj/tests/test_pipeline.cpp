#include "rsmgan/experiment.hpp"

#include "rsmgan/plot.hpp"

#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rsmgan;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_experiment(const std::string& dir) {
    ExperimentConfig cfg;
    cfg.name = "tiny";
    cfg.seed = 3;
    cfg.output_dir = dir;
    cfg.data.n = 5;
    cfg.data.T = 1440;
    cfg.data.step_seconds = 60;
    cfg.data.patterns = {SeasonKind::random};
    cfg.data.train_anomalies = 0;
    cfg.data.test_anomalies = 4;
    cfg.mcm.windows = {5, 10, 30};
    cfg.mcm.step = 5;
    cfg.mcm.history = 4;
    cfg.network.conv_channels = {4, 8};
    cfg.network.conv_strides = {1, 2};
    cfg.network.disc_channels = {4, 8};
    cfg.network.epochs = 3;
    cfg.network.batch_size = 16;
    cfg.network.adam.lr = 1e-3;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("experiment config JSON round trip and hashing") {
    ExperimentConfig cfg = tiny_experiment("/tmp/rsmgan_cfg_demo");
    std::string text = experiment_config_to_json_text(cfg);
    ExperimentConfig back = experiment_config_from_json_text(text);
    CHECK(experiment_config_to_json_text(back) == text);
    CHECK(config_hash(cfg) == config_hash(back));

    ExperimentConfig other = cfg;
    other.seed = 99;
    CHECK(config_hash(cfg) != config_hash(other));
}

TEST_CASE("split_steps drops boundary-straddling steps") {
    // T=103, p=5: train_end=51, val_end=61.
    StepSplit sp = split_steps(103, 5, 0);
    CHECK(sp.raw.train_end == 51);
    CHECK(sp.raw.val_end == 61);
    for (long k : sp.train_steps) CHECK((k + 1) * 5 <= 51);
    for (long k : sp.val_steps) {
        CHECK(k * 5 >= 51);
        CHECK((k + 1) * 5 <= 61);
    }
    for (long k : sp.test_steps) CHECK(k * 5 >= 61);
    // Step 10 covers [50,55) and straddles the boundary: dropped.
    for (const auto& v : {sp.train_steps, sp.val_steps, sp.test_steps})
        for (long k : v) CHECK(k != 10);
}

TEST_CASE("end-to-end tiny run produces consistent artifacts" * doctest::timeout(600)) {
    const std::string dir = "/tmp/rsmgan_pipe_a";
    fs::remove_all(dir);
    ExperimentConfig cfg = tiny_experiment(dir);
    RunSummary sum = run_single(cfg, dir);

    for (const char* f :
         {"data.csv", "labels.json", "holidays.json", "mcm.bin", "mcm.json", "residuals.bin",
          "residuals.json", "scores_context_b.csv", "scores_context_h.csv", "thresholds.json",
          "rootcause.json", "eval.json", "manifest.json"})
        CHECK(fs::exists(fs::path(dir) / f));
    CHECK(fs::exists(fs::path(dir) / "checkpoint" / "params.bin"));
    CHECK(fs::exists(fs::path(dir) / "plots" / "context_h.svg"));

    CHECK(sum.context_h.points.precision >= 0.0);
    CHECK(sum.context_h.points.precision <= 1.0);
    CHECK(sum.context_h.points.recall >= 0.0);
    CHECK(sum.context_h.points.recall <= 1.0);
    CHECK(sum.thresholds.theta_h <= sum.thresholds.theta_b);
    CHECK(sum.thresholds.eta996 > 0.0);

    // The manifest records every stage as done.
    nlohmann::json manifest = nlohmann::json::parse(slurp(fs::path(dir) / "manifest.json"));
    for (const char* st : {"generate", "featurize", "train", "detect", "rootcause", "evaluate", "plot"})
        CHECK(manifest.at("stages").at(st) == "done");
    CHECK(manifest.at("config_hash") == config_hash(cfg));

    // Determinism: an identical config in another directory gives
    // bit-identical metrics JSON.
    const std::string dir2 = "/tmp/rsmgan_pipe_b";
    fs::remove_all(dir2);
    ExperimentConfig cfg2 = tiny_experiment(dir2);
    run_single(cfg2, dir2);
    nlohmann::json ja = nlohmann::json::parse(slurp(fs::path(dir) / "eval.json"));
    nlohmann::json jb = nlohmann::json::parse(slurp(fs::path(dir2) / "eval.json"));
    CHECK(ja == jb);

    // Stage isolation: evaluate alone reproduces the same summary from
    // persisted artifacts.
    RunSummary again = stage_evaluate(cfg, dir);
    CHECK(again.context_h.points.f1 == sum.context_h.points.f1);
    CHECK(again.context_b.nab == sum.context_b.nab);

    // Plot metadata equals the exported score trace.
    std::string svg = slurp(fs::path(dir) / "plots" / "context_h.svg");
    auto lo = svg.find("<metadata id=\"score-trace\">");
    REQUIRE(lo != std::string::npos);
    lo += std::string("<metadata id=\"score-trace\">").size();
    auto hi = svg.find("</metadata>", lo);
    nlohmann::json meta = nlohmann::json::parse(svg.substr(lo, hi - lo));
    auto steps = meta.at("steps").get<std::vector<long>>();
    auto scores = meta.at("scores").get<std::vector<long>>();

    std::ifstream csv(fs::path(dir) / "scores_context_h.csv");
    std::string line;
    std::getline(csv, line); // header
    size_t idx = 0;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        REQUIRE(idx < steps.size());
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ','); // timestamp
        std::getline(ss, cell, ',');
        CHECK(std::stol(cell) == steps[idx]);
        std::getline(ss, cell, ',');
        CHECK(std::stol(cell) == scores[idx]);
        ++idx;
    }
    CHECK(idx == steps.size());

    fs::remove_all(dir2);
}

TEST_CASE("seed list produces per-seed reports plus a mean report" * doctest::timeout(600)) {
    const std::string dir = "/tmp/rsmgan_pipe_seeds";
    fs::remove_all(dir);
    ExperimentConfig cfg = tiny_experiment(dir);
    cfg.network.epochs = 2;
    cfg.seeds = {4, 5};
    SweepResult res = run_experiment(cfg);
    REQUIRE(res.runs.size() == 2);
    CHECK(fs::exists(fs::path(dir) / "seed_4" / "eval.json"));
    CHECK(fs::exists(fs::path(dir) / "seed_5" / "eval.json"));
    CHECK(fs::exists(fs::path(dir) / "mean_eval.json"));

    nlohmann::json mean = nlohmann::json::parse(slurp(fs::path(dir) / "mean_eval.json"));
    double f1_mean = (res.runs[0].context_h.points.f1 + res.runs[1].context_h.points.f1) / 2.0;
    CHECK(mean.at("context_h").at("f1").get<double>() == doctest::Approx(f1_mean).epsilon(1e-12));
    fs::remove_all(dir);
}

TEST_CASE("external CSV datasets run through the same pipeline" * doctest::timeout(600)) {
    // Produce a dataset with one run, then feed its files to a csv-kind run.
    const std::string src = "/tmp/rsmgan_pipe_csv_src";
    fs::remove_all(src);
    ExperimentConfig gen = tiny_experiment(src);
    stage_generate(gen, src);

    const std::string dir = "/tmp/rsmgan_pipe_csv";
    fs::remove_all(dir);
    ExperimentConfig cfg = tiny_experiment(dir);
    cfg.network.epochs = 2;
    cfg.data.kind = "csv";
    cfg.data.csv_path = src + "/data.csv";
    cfg.data.labels_path = src + "/labels.json";
    cfg.data.holidays_path = src + "/holidays.json";
    RunSummary sum = run_single(cfg, dir);
    CHECK(sum.context_h.points.recall >= 0.0);
    CHECK(fs::exists(fs::path(dir) / "eval.json"));

    fs::remove_all(src);
    fs::remove_all(dir);
}

TEST_CASE("missing artifacts give a stage error with a failure marker") {
    const std::string dir = "/tmp/rsmgan_pipe_missing";
    fs::remove_all(dir);
    ExperimentConfig cfg = tiny_experiment(dir);
    CHECK_THROWS_AS(stage_featurize(cfg, dir), std::runtime_error);
}

TEST_CASE("empty score trace still renders a plot") {
    ScoreTrace t;
    t.method = ScoreMethod::context_h;
    t.p = 5;
    CHECK_NOTHROW(write_score_plot_svg(t, {}, "empty", "/tmp/rsmgan_empty_plot.svg"));
    std::string svg = slurp("/tmp/rsmgan_empty_plot.svg");
    CHECK(svg.find("<svg") != std::string::npos);

    ScoreTrace t2 = t;
    t2.steps = {1, 2, 3};
    t2.scores = {0, 4, 1};
    t2.detections = {0, 1, 1};
    CHECK_NOTHROW(
        write_score_plot_svg(t2, {{5, 8}, {10, 12}, {14, 15}}, "demo", "/tmp/rsmgan_demo_plot.svg"));
    std::string svg2 = slurp("/tmp/rsmgan_demo_plot.svg");
    // One shaded region per ground-truth window.
    size_t count = 0;
    for (size_t pos = svg2.find("#f4c7c3"); pos != std::string::npos;
         pos = svg2.find("#f4c7c3", pos + 1))
        ++count;
    CHECK(count == 3);
}
