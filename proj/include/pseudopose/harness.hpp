#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pseudopose/annotator.hpp"
#include "pseudopose/estimator.hpp"
#include "pseudopose/fitting.hpp"
#include "pseudopose/metrics.hpp"
#include "pseudopose/pose_prior.hpp"

namespace pseudopose {

// One experiment-matrix cell: which pipeline variant runs and with which
// recipe toggles.
struct CellSpec {
    std::string name;
    bool bridge = true;            // include the small 3D-carrying itw split
    bool strip_bridge_3d = false;  // keep bridge samples but drop their 3D GT
    int itw_multiplier = 1;        // enlarge the 2D-only itw split
    std::string init_mode = "denoise2d";  // random | denoise2d | posecluster
    bool use_prior = true;
    double reg_weight = 1e-2;
    std::string variant = "fresh-g";  // fresh-g | f-direct | f-finetune | weak2d | fit-baseline
};

struct ExperimentConfig {
    std::string out_dir = "runs";
    std::vector<uint64_t> seeds = {7, 8, 9};
    uint64_t model_seed = 20211;
    uint64_t data_seed = 1;
    uint64_t prior_seed = 2;
    int prior_corpus_size = 10000;
    int prior_latent_dim = 8;
    PriorTrainConfig prior;
    BenchmarkConfig data;
    PretrainConfig pretrain;
    TrainConfig train;
    FitConfig fit;
    double pck_threshold_mm = 150.0;
    int jobs = 0;  // 0 = hardware concurrency
    std::vector<std::string> cells;  // empty = full default matrix

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    // Dotted-path scalar override, e.g. "train.epochs=3".
    void apply_override(const std::string& assignment);
};

ExperimentConfig load_config(const std::string& path_or_empty,
                             const std::vector<std::string>& overrides);

const std::vector<CellSpec>& default_cells();
CellSpec find_cell(const std::string& name);

uint64_t fnv1a64(const std::string& s);
std::string hash_hex(const nlohmann::json& j);

struct CellResult {
    std::string cell;
    uint64_t seed = 0;
    bool failed = false;
    std::string error;
    MetricsReport report;
    // Implausibility of the pseudo-GT poses this cell produced (NaN when the
    // variant emits none).
    double pgt_implausibility = std::nan("");
    std::string eval_path;
};

// Shared artifacts (model, prior, benchmark) are created on first use and
// reused by hash-stamped filename.
class Workspace {
  public:
    Workspace(const ExperimentConfig& cfg);

    const KinematicModel& model();
    const PosePriorVAE& prior();
    BenchmarkFiles benchmark(int itw_multiplier);

    std::string model_path() const;
    std::string prior_path() const;

    const ExperimentConfig& cfg() const { return cfg_; }

  private:
    ExperimentConfig cfg_;
    std::optional<KinematicModel> model_;
    std::optional<PosePriorVAE> prior_;
};

// Ensures the pretraining artifact for a cell's init mode exists; returns
// its path.
std::string ensure_encoder_artifact(Workspace& ws, const CellSpec& cell, uint64_t seed);

// Pipeline stages in execution order; run_pipeline stops after `upto`.
enum class PipelineStep { GenData, TrainAnnot, Annotate, TrainEst, Eval };

CellResult run_pipeline(Workspace& ws, const CellSpec& cell, uint64_t seed,
                        PipelineStep upto = PipelineStep::Eval);

struct AblationResult {
    std::vector<CellResult> rows;
    std::string rows_csv;
    std::string summary_csv;
};

AblationResult run_ablation(const ExperimentConfig& cfg);

// Rebuilds the summary CSV and plots from an existing rows CSV.
void write_reports(const ExperimentConfig& cfg, const std::vector<CellResult>& rows);
std::vector<CellResult> read_rows_csv(const std::string& path);

double median(std::vector<double> v);

}  // namespace pseudopose
