#pragma once

#include <string>
#include <vector>

#include "pseudopose/network.hpp"

namespace pseudopose {

struct PretrainConfig {
    int epochs = 5;
    int batch_size = 256;
    double learning_rate = 1e-3;
    int cluster_count = 32;  // posecluster pretext
    int kmeans_iters = 25;
};

struct PretrainLog {
    std::vector<double> epoch_loss;
};

// Encoder pretext pretraining. "denoise2d" regresses the clean 2D pose from
// the corrupted input; "posecluster" classifies a k-means pose-cluster id
// (requires 3D-carrying samples); "none" returns the untouched fresh
// initialization drawn from seed.
Mlp pretrain_encoder(const std::vector<Sample>& samples, const std::string& pretext,
                     const KinematicModel& model, const PretrainConfig& cfg, uint64_t seed,
                     PretrainLog* log = nullptr);

// Builds the stage-1 training pools: mocap (plus the bridge split when
// present) on the 3D side, itw2d 2D-only on the other. strip_bridge_3d keeps
// the bridge samples but demotes them to 2D-only supervision (the control
// experiment for where the bridge's value comes from).
std::vector<TrainItem> mocap_side_items(const std::vector<Sample>& mocap,
                                        const std::vector<Sample>& bridge_or_empty,
                                        bool strip_bridge_3d);
std::vector<TrainItem> itw_side_items(const std::vector<Sample>& itw2d);

Network train_annotator(const std::vector<Sample>& mocap, const std::vector<Sample>& itw2d,
                        const std::vector<Sample>& bridge_or_empty, const PosePriorVAE& prior,
                        const KinematicModel& model, const TrainConfig& cfg,
                        const Mlp& init_encoder, const std::string& init_mode, bool use_prior,
                        bool strip_bridge_3d, uint64_t seed, TrainLog* log = nullptr);

// Stage-1 export: inference on every sample, one pseudo-GT record each.
std::vector<PseudoGTRecord> annotate(const Network& net, const PosePriorVAE& prior,
                                     const KinematicModel& model,
                                     const std::vector<Sample>& samples,
                                     const std::string& dataset_name,
                                     const std::string& producer_version);

}  // namespace pseudopose
