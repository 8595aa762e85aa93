#pragma once

#include <string>
#include <vector>

#include "pseudopose/datasets.hpp"
#include "pseudopose/network.hpp"

namespace pseudopose {

struct FitConfig {
    int stage1_iters = 100;  // translation only, torso joints
    int stage2_iters = 400;  // all parameters
    double prior_weight = 1e-2;
    double tol = 1e-6;              // relative energy decrease
    double init_step = 0.1;
    std::vector<int> torso_joints = {4, 7, 10, 13};  // shoulders, hips
    // Energy is evaluated at these yaw candidates after stage 1 and descent
    // continues from the best, mirroring the classic fitters' orientation
    // search; a frontal-only start lands in the wrong basin for half of all
    // subjects.
    std::vector<double> yaw_candidates = {0.0, M_PI_2, M_PI, -M_PI_2};
    std::string producer_version = "fitting-v1";
};

struct FitResult {
    PseudoGTRecord record;
    bool failed = false;
    double final_energy = 0.0;
    std::vector<double> energy_trace;  // accepted energies, strictly decreasing
};

// SMPLify-style descent: E = mean-visible L1 reprojection (px/512) against
// gt_kp2d + L2 penalty on (z, beta). First-order steps with backtracking; a
// step is accepted only if the energy strictly decreases.
FitResult fit_sample(const Sample& sample, const KinematicModel& model,
                     const PosePriorVAE& prior, const FitConfig& cfg, uint64_t seed);

// Energy of an explicit parameter point, for oracle comparisons.
double fit_energy(const Sample& sample, const KinematicModel& model, const PosePriorVAE& prior,
                  const Eigen::Vector3d& global_rot, const Eigen::VectorXd& z,
                  const Eigen::VectorXd& beta, const Eigen::Vector3d& translation,
                  double prior_weight);

}  // namespace pseudopose
