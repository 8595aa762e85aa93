#include <CLI11.hpp>

#include <iostream>
#include <map>

#include "pseudopose/errors.hpp"
#include "pseudopose/harness.hpp"
#include "pseudopose/jsonio.hpp"

using namespace pseudopose;

namespace {

struct CommonArgs {
    std::string config;
    std::string out;
    std::string cell;
    std::vector<std::string> overrides;
    long long seed = -1;
    int jobs = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config, "Experiment config JSON file");
    cmd->add_option("--out", args.out, "Output directory (overrides config)");
    cmd->add_option("--cell", args.cell, "Experiment-matrix cell name");
    cmd->add_option("--seed", args.seed, "Single seed (overrides the config seed list)");
    cmd->add_option("--set", args.overrides, "Dotted-path config override, e.g. train.epochs=3");
    cmd->add_option("--jobs", args.jobs, "Parallel cell workers for ablate");
}

ExperimentConfig build_config(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args.config, args.overrides);
    if (!args.out.empty()) cfg.out_dir = args.out;
    if (args.seed >= 0) cfg.seeds = {static_cast<uint64_t>(args.seed)};
    if (args.jobs > 0) cfg.jobs = args.jobs;
    return cfg;
}

int run_step(const CommonArgs& args, PipelineStep upto) {
    ExperimentConfig cfg = build_config(args);
    Workspace ws(cfg);
    const CellSpec cell = find_cell(args.cell.empty() ? "base" : args.cell);
    for (uint64_t seed : cfg.seeds) {
        const CellResult r = run_pipeline(ws, cell, seed, upto);
        if (upto == PipelineStep::Eval)
            std::cout << MetricsReport::csv_header() << "\n"
                      << r.report.csv_row(cell.name + "/seed" + std::to_string(seed)) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage 3D pose pseudo-label pipeline on a synthetic benchmark"};
    app.require_subcommand(1);

    CommonArgs args;
    struct Sub {
        const char* name;
        const char* desc;
        PipelineStep step;
    };
    const Sub steps[] = {
        {"gen-data", "Generate the benchmark splits", PipelineStep::GenData},
        {"train-annot", "Train the stage-1 annotation network", PipelineStep::TrainAnnot},
        {"annotate", "Export pseudo-GTs from the annotation network", PipelineStep::Annotate},
        {"fit-baseline", "Produce pseudo-GTs by iterative fitting", PipelineStep::Annotate},
        {"train-est", "Train the stage-2 estimation network", PipelineStep::TrainEst},
        {"eval", "Evaluate the cell's final network on the test split", PipelineStep::Eval},
    };
    std::map<std::string, PipelineStep> chosen_step;
    for (const Sub& s : steps) {
        CLI::App* c = app.add_subcommand(s.name, s.desc);
        add_common(c, args);
        chosen_step[s.name] = s.step;
    }
    CLI::App* c_prior = app.add_subcommand("train-prior", "Train the pose prior VAE");
    add_common(c_prior, args);
    CLI::App* c_pre = app.add_subcommand("pretrain", "Pretrain the encoder on the pretext task");
    add_common(c_pre, args);
    CLI::App* c_abl = app.add_subcommand("ablate", "Run the full experiment matrix");
    add_common(c_abl, args);
    CLI::App* c_rep = app.add_subcommand("report", "Rebuild summary CSV and plots from rows CSV");
    add_common(c_rep, args);

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "fit-baseline") args.cell = "fit-baseline";
        if (chosen_step.count(name)) return run_step(args, chosen_step.at(name));
        if (name == "train-prior") {
            ExperimentConfig cfg = build_config(args);
            Workspace ws(cfg);
            ws.prior();
            std::cout << ws.prior_path() << "\n";
            return 0;
        }
        if (name == "pretrain") {
            ExperimentConfig cfg = build_config(args);
            Workspace ws(cfg);
            const CellSpec cell = find_cell(args.cell.empty() ? "base" : args.cell);
            for (uint64_t seed : cfg.seeds)
                std::cout << ensure_encoder_artifact(ws, cell, seed * 1000 + 3) << "\n";
            return 0;
        }
        if (name == "ablate") {
            ExperimentConfig cfg = build_config(args);
            if (!args.cell.empty()) cfg.cells = {args.cell};
            const AblationResult res = run_ablation(cfg);
            int failures = 0;
            for (const auto& r : res.rows) failures += r.failed ? 1 : 0;
            std::cout << res.rows_csv << "\n" << res.summary_csv << "\n";
            if (failures > 0) {
                std::cerr << nlohmann::json{{"error", "cell_failures"},
                                            {"message", std::to_string(failures) +
                                                            " matrix cell(s) failed"}}
                                 .dump()
                          << "\n";
                return 2;
            }
            return 0;
        }
        if (name == "report") {
            ExperimentConfig cfg = build_config(args);
            const auto rows = read_rows_csv(cfg.out_dir + "/ablation_rows.csv");
            write_reports(cfg, rows);
            std::cout << cfg.out_dir + "/ablation_summary.csv" << "\n";
            return 0;
        }
        throw ConfigError("unknown subcommand '" + name + "'");
    } catch (const Error& e) {
        std::cerr << nlohmann::json{{"error", e.kind}, {"message", e.what()}}.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
        return 1;
    }
}
