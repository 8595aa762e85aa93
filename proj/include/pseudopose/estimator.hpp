#pragma once

#include <string>
#include <vector>

#include "pseudopose/metrics.hpp"
#include "pseudopose/network.hpp"

namespace pseudopose {

// Joins itw2d samples to their pseudo-GT records by sample_id and promotes
// them to fully 3D-supervised training items (3D joints derived through the
// body model). Missing ids raise a join error listing them.
std::vector<TrainItem> itw_items_from_pseudo_gt(const std::vector<Sample>& itw2d,
                                                const std::vector<PseudoGTRecord>& records,
                                                const KinematicModel& model);

// Stage 2: mocap supervised by GT, itw2d supervised by pseudo-GTs.
Network train_estimator(const std::vector<Sample>& mocap, const std::vector<Sample>& itw2d,
                        const std::vector<PseudoGTRecord>& pseudo_gts,
                        const PosePriorVAE& prior, const KinematicModel& model,
                        const TrainConfig& cfg, const Mlp& init_encoder,
                        const std::string& init_mode, bool use_prior, uint64_t seed,
                        TrainLog* log = nullptr);

// Control variant: the estimator trained with itw2d kept 2D-only (no
// pseudo-GTs), isolating the value of the pseudo-GT supervision itself.
Network train_estimator_weak2d(const std::vector<Sample>& mocap,
                               const std::vector<Sample>& itw2d, const PosePriorVAE& prior,
                               const KinematicModel& model, const TrainConfig& cfg,
                               const Mlp& init_encoder, const std::string& init_mode,
                               bool use_prior, uint64_t seed, TrainLog* log = nullptr);

// Continues training from a trained annotator's weights under the estimator
// loss (pipeline-variant comparison against a freshly trained estimator).
Network finetune_variant(const Network& annotator, const std::vector<Sample>& mocap,
                         const std::vector<Sample>& itw2d,
                         const std::vector<PseudoGTRecord>& pseudo_gts,
                         const PosePriorVAE& prior, const KinematicModel& model,
                         const TrainConfig& cfg, uint64_t seed, TrainLog* log = nullptr);

struct SampleError {
    std::string id;
    double pa_mpjpe = 0.0;
    double mpjpe = 0.0;
    double pck3d = 0.0;
};

struct EvalResult {
    MetricsReport report;
    std::vector<SampleError> per_sample;
};

EvalResult evaluate(const Network& net, const PosePriorVAE& prior, const KinematicModel& model,
                    const std::vector<Sample>& test_set, double pck_threshold_mm = 150.0);

}  // namespace pseudopose
