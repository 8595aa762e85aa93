#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "pseudopose/body_model.hpp"

namespace pseudopose {

struct MetricsReport {
    double pa_mpjpe = 0.0;          // mm
    double mpjpe = 0.0;             // mm, root-aligned
    Eigen::Vector3d per_axis = Eigen::Vector3d::Zero();  // mm, root-aligned
    double pck3d = 0.0;             // percent
    double implausibility_rate = 0.0;
    long sample_count = 0;

    static std::string csv_header();
    std::string csv_row(const std::string& dataset) const;
};

struct SimilarityTransform {
    double scale = 1.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    Eigen::MatrixXd aligned;  // J x 3
};

// Closed-form similarity Procrustes: minimizes sum_j |gt_j - (s R pred_j + t)|^2.
SimilarityTransform procrustes_align(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt);

double pa_mpjpe(const Eigen::MatrixXd& pred_joints, const Eigen::MatrixXd& gt_joints);

// Root-aligned mean joint error; per-axis errors under the same root
// alignment (documented convention).
std::pair<double, Eigen::Vector3d> mpjpe_root_aligned(const Eigen::MatrixXd& pred,
                                                      const Eigen::MatrixXd& gt);

double pck3d(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt,
             double threshold_mm = 150.0);

// Fraction of (pose, joint) pairs with any axis-angle component outside the
// widened limits [lo - delta, hi + delta], delta = 0.05 rad.
double implausibility_rate(const std::vector<Eigen::MatrixXd>& body_poses,
                           const std::vector<JointLimits>& limits);

inline constexpr double kImplausibilityMarginRad = 0.05;

}  // namespace pseudopose
