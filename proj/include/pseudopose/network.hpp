#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "pseudopose/body_model.hpp"
#include "pseudopose/datasets.hpp"
#include "pseudopose/mlp.hpp"
#include "pseudopose/pose_prior.hpp"

namespace pseudopose {

// Regression network shared by both pipeline stages: a keypoint-input
// encoder with parameter heads. Input is the flattened per-joint
// [x_norm, y_norm, conf] * conf vector (3J). The latent head is active when
// use_prior; the direct pose head otherwise. Both exist in every checkpoint
// so initialization consumes the same RNG stream regardless of flags.
struct Network {
    Mlp encoder;           // 3J -> 256 -> 256 -> 128 (feature after tanh)
    Mlp latent_head;       // 128 -> D
    Mlp direct_pose_head;  // 128 -> 3(J-1)
    Mlp global_rot_head;   // 128 -> 3
    Mlp shape_head;        // 128 -> B
    Mlp trans_head;        // 128 -> 3

    bool use_prior = true;
    std::string init_mode = "random";  // random | denoise2d | posecluster
    bool bridge_used = false;
    std::string role = "annotator";  // annotator | estimator
    uint64_t seed = 0;
    std::string config_hash;

    static Network create(int joint_count, int latent_dim, int shape_dim, uint64_t seed);

    void save(const std::string& path) const;
    static Network load(const std::string& path);
};

inline constexpr int kFeatureDim = 128;
inline constexpr double kTransXyScaleMm = 400.0;
inline constexpr double kTransZScaleMm = 1200.0;
inline constexpr double kCanonicalDepthMm = 5000.0;
inline constexpr double kKpNormPx = 256.0;
inline constexpr double kReprojNormPx = 512.0;

// Flattened network input for one sample.
Eigen::VectorXd sample_features(const Sample& s);

// Batched encoder pass: rows of X -> rows of tanh'd features. acts is
// required for backward (encoder activations plus the pre-tanh feature).
struct EncoderActs {
    std::vector<RowMat> mlp_acts;
    RowMat feature;  // after tanh
};
RowMat encode_features(const Mlp& encoder, const RowMat& x, EncoderActs* acts);

struct InferResult {
    std::optional<Eigen::VectorXd> latent;
    PoseParams pose;
    ShapeParams beta;
    Eigen::MatrixXd joints3d;  // J x 3 mm
    Eigen::MatrixXd kp2d;      // J x 2 px (may be empty if behind camera)
    double reproj_err_px = 0.0;
};

InferResult infer(const Network& net, const PosePriorVAE& prior, const KinematicModel& model,
                  const Sample& sample);

// One supervised row of a training pool. 2D-only samples carry has3d=false
// and never contribute 3D loss terms.
struct TrainItem {
    Sample sample;
    bool has3d = false;
    PoseParams gt_pose;
    Eigen::VectorXd gt_beta;
    Eigen::MatrixXd gt_joints3d;
};

struct TrainConfig {
    int batch_size = 192;
    int epochs = 15;
    double learning_rate = 1e-4;
    std::vector<int> lr_drop_epochs = {11, 13};  // 1-based; x0.1 at each
    double w_reproj = 1.0;
    double w_joints3d = 1.0;
    double w_param = 1.0;
    double w_reg = 1e-2;
    bool augment = true;
    double aug_scale = 0.25;
    double aug_rot_deg = 30.0;
    double aug_flip_prob = 0.5;
};

struct TrainLog {
    std::vector<double> epoch_loss;
    std::vector<double> step_loss;  // 20-step moving average checkpoints
    long diverged_step = -1;
};

// Keypoint-space augmentation with exactly consistent 3D/camera updates:
// horizontal flip (joint relabeling + axis-angle mirror), in-plane rotation
// (global rotation and translation rotated about the camera axis), 2D scale
// (focal length scaled). Pure function of rng draws.
TrainItem augment_item(const TrainItem& item, const KinematicModel& model,
                       const TrainConfig& cfg, Rng& rng);

// Mixed-batch training: every step takes batch_size/2 items from the
// mocap-side pool and batch_size/2 from the itw-side pool. Deterministic in
// seed; single-threaded.
Network train_network(Network net, const PosePriorVAE& prior, const KinematicModel& model,
                      const std::vector<TrainItem>& mocap_side,
                      const std::vector<TrainItem>& itw_side, const TrainConfig& cfg,
                      uint64_t seed, TrainLog* log = nullptr);

}  // namespace pseudopose
