#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "pseudopose/body_model.hpp"
#include "pseudopose/mlp.hpp"

namespace pseudopose {

struct LatentCode {
    Eigen::VectorXd z;
};

struct PriorTrainConfig {
    int epochs = 50;
    int batch_size = 256;
    double learning_rate = 1e-3;
    double kl_weight = 5e-3;
    std::string corpus_id = "synthetic-limits-v1";
};

// VPoser-style VAE over body poses (global rotation and shape excluded).
struct PosePriorVAE {
    int latent_dim = 8;
    int body_joint_count = 15;  // J - 1
    Mlp encoder;  // 3*(J-1) -> 128 -> 128 -> 2*D (mu | logvar)
    Mlp decoder;  // D -> 128 -> 128 -> 3*(J-1)
    uint64_t seed = 0;
    double kl_weight = 5e-3;
    std::string corpus_id;

    void save(const std::string& path) const;
    static PosePriorVAE load(const std::string& path);
};

struct PriorTrainLog {
    std::vector<double> epoch_elbo;
    std::vector<double> epoch_kl;
    std::vector<double> step_kl_min;  // per-epoch minimum of the KL term
};

// Synthetic plausible-pose corpus: per-component uniform inside the joint
// limits, rejected against an extremity budget so the bulk of the mass sits
// away from the range ends.
std::vector<Eigen::MatrixXd> generate_pose_corpus(const KinematicModel& model, int count,
                                                  uint64_t seed);

PosePriorVAE train_prior(const std::vector<Eigen::MatrixXd>& pose_corpus,
                         const PriorTrainConfig& cfg, uint64_t seed,
                         int latent_dim = 8, PriorTrainLog* log = nullptr);

// (mu, logvar)
std::pair<Eigen::VectorXd, Eigen::VectorXd> encode(const PosePriorVAE& prior,
                                                   const Eigen::MatrixXd& body_pose);

Eigen::MatrixXd decode(const PosePriorVAE& prior, const LatentCode& z);

// Batched decoder pass for training/fitting. rows of z -> rows of poses
// (flattened 3*(J-1)).
RowMat decode_batch(const PosePriorVAE& prior, const RowMat& z, std::vector<RowMat>* acts);
// Backprop dL/dpose -> dL/dz with frozen decoder weights.
RowMat decode_backward(const PosePriorVAE& prior, const std::vector<RowMat>& acts,
                       const RowMat& dpose);

double l2_penalty(const LatentCode& z, const ShapeParams& beta, double weight);

}  // namespace pseudopose
