#include "rsmgan/experiment.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void apply_device_env() {
    const char* dev = std::getenv("RSMGAN_DEVICE");
    if (dev && std::string(dev) != "cpu")
        std::cerr << "[rsmgan] warning: device '" << dev << "' not available, using cpu\n";
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    json j;
    in >> j;
    return j;
}

struct CliOptions {
    std::string config_path;
    std::string output_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

rsmgan::ExperimentConfig load_config(const CliOptions& opt) {
    rsmgan::ExperimentConfig cfg =
        rsmgan::experiment_config_from_json_text(load_json(opt.config_path).dump());
    if (opt.seed_set) {
        cfg.seed = opt.seed;
        cfg.seeds.clear();
    }
    if (!opt.output_dir.empty()) cfg.output_dir = opt.output_dir;
    return cfg;
}

/// Children of a sweep: the base config with each override merged in
/// (RFC 7386 merge patch), one subdirectory per entry.
std::vector<std::pair<std::string, rsmgan::ExperimentConfig>> expand_sweep(const json& base) {
    std::vector<std::pair<std::string, rsmgan::ExperimentConfig>> out;
    if (!base.contains("sweep")) {
        out.emplace_back("", rsmgan::experiment_config_from_json_text(base.dump()));
        return out;
    }
    json stripped = base;
    stripped.erase("sweep");
    long i = 0;
    for (const auto& over : base.at("sweep")) {
        json child = stripped;
        child.merge_patch(over);
        std::string name = over.value("name", "sweep_" + std::to_string(i));
        child["name"] = name;
        auto cfg = rsmgan::experiment_config_from_json_text(child.dump());
        cfg.output_dir = (fs::path(stripped.value("output_dir", "out")) / name).string();
        out.emplace_back(name, std::move(cfg));
        ++i;
    }
    return out;
}

void print_summary(const rsmgan::RunSummary& s) {
    std::cout << "seed " << s.seed << ": context_h F1=" << s.context_h.points.f1
              << " precision=" << s.context_h.points.precision
              << " recall=" << s.context_h.points.recall << " FPR=" << s.context_h.points.fpr
              << " NAB=" << s.context_h.nab;
    if (s.rc_recall) std::cout << " rc_recall=" << *s.rc_recall;
    std::cout << "\n";
}

} // namespace

int main(int argc, char** argv) {
    apply_device_env();

    CLI::App app{"RSM-GAN anomaly detection pipeline"};
    app.require_subcommand(1);

    CliOptions opt;

    auto add_common = [&opt](CLI::App* sub) {
        sub->add_option("-c,--config", opt.config_path, "experiment config JSON")->required();
        sub->add_option("-o,--output", opt.output_dir, "override output directory");
        sub->add_option("--seed", opt.seed, "override seed")->each([&opt](const std::string&) {
            opt.seed_set = true;
        });
    };

    CLI::App* cmd_generate = app.add_subcommand("generate", "emit the synthetic dataset");
    CLI::App* cmd_featurize = app.add_subcommand("featurize", "build correlation-matrix inputs");
    CLI::App* cmd_train = app.add_subcommand("train", "train the reconstruction model");
    CLI::App* cmd_detect = app.add_subcommand("detect", "fit thresholds and score");
    CLI::App* cmd_rootcause = app.add_subcommand("rootcause", "rank root causes per detection");
    CLI::App* cmd_evaluate = app.add_subcommand("evaluate", "compute metrics against labels");
    CLI::App* cmd_plot = app.add_subcommand("plot", "emit score plots");
    CLI::App* cmd_runall = app.add_subcommand("run-all", "full pipeline (honors seeds and sweep)");
    for (CLI::App* sub : {cmd_generate, cmd_featurize, cmd_train, cmd_detect, cmd_rootcause,
                          cmd_evaluate, cmd_plot, cmd_runall})
        add_common(sub);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_runall->parsed()) {
            json base = load_json(opt.config_path);
            if (!opt.output_dir.empty()) base["output_dir"] = opt.output_dir;
            if (opt.seed_set) {
                base["seed"] = opt.seed;
                base.erase("seeds");
            }
            std::vector<std::pair<std::string, rsmgan::RunSummary>> table;
            auto children = expand_sweep(base);
            for (auto& [name, cfg] : children) {
                if (!name.empty()) std::cout << "== sweep child: " << name << " ==\n";
                rsmgan::SweepResult res = rsmgan::run_experiment(cfg);
                for (const auto& r : res.runs) {
                    print_summary(r);
                    std::string row = name.empty() ? cfg.name : name;
                    if (res.runs.size() > 1) row += "/seed_" + std::to_string(r.seed);
                    table.emplace_back(row, r);
                }
            }
            rsmgan::write_comparison_csv(
                table, (fs::path(base.value("output_dir", "out")) / "comparison.csv").string());
            return 0;
        }

        rsmgan::ExperimentConfig cfg = load_config(opt);
        const std::string dir = cfg.output_dir;
        if (cmd_generate->parsed()) rsmgan::stage_generate(cfg, dir);
        if (cmd_featurize->parsed()) rsmgan::stage_featurize(cfg, dir);
        if (cmd_train->parsed()) rsmgan::stage_train(cfg, dir);
        if (cmd_detect->parsed()) rsmgan::stage_detect(cfg, dir);
        if (cmd_rootcause->parsed()) rsmgan::stage_rootcause(cfg, dir);
        if (cmd_evaluate->parsed()) print_summary(rsmgan::stage_evaluate(cfg, dir));
        if (cmd_plot->parsed()) rsmgan::stage_plot(cfg, dir);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
