#include "pseudopose/metrics.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <sstream>

#include "pseudopose/errors.hpp"

namespace pseudopose {

std::string MetricsReport::csv_header() {
    return "dataset,pa_mpjpe,mpjpe,ex,ey,ez,pck3d,implausibility_rate,n";
}

std::string MetricsReport::csv_row(const std::string& dataset) const {
    std::ostringstream os;
    os.precision(17);
    os << dataset << ',' << pa_mpjpe << ',' << mpjpe << ',' << per_axis.x() << ','
       << per_axis.y() << ',' << per_axis.z() << ',' << pck3d << ','
       << implausibility_rate << ',' << sample_count;
    return os.str();
}

SimilarityTransform procrustes_align(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
    if (pred.rows() != gt.rows() || pred.cols() != 3 || gt.cols() != 3)
        throw ShapeError("procrustes inputs must both be J x 3");
    if (pred.rows() < 3) throw GeometryError("procrustes needs at least 3 points");

    const Eigen::RowVector3d pred_mean = pred.colwise().mean();
    const Eigen::RowVector3d gt_mean = gt.colwise().mean();
    const Eigen::MatrixXd pc = pred.rowwise() - pred_mean;
    const Eigen::MatrixXd gc = gt.rowwise() - gt_mean;

    const double pred_var = pc.squaredNorm();
    if (pred_var < 1e-12) throw GeometryError("degenerate prediction: zero variance");

    // cross covariance (3x3): sum_j pred_c_j gt_c_j^T
    const Eigen::Matrix3d h = pc.transpose() * gc;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) d(2, 2) = -1.0;

    SimilarityTransform out;
    out.rotation = svd.matrixV() * d * svd.matrixU().transpose();
    out.scale = (svd.singularValues().asDiagonal() * d).trace() / pred_var;
    out.translation =
        gt_mean.transpose() - out.scale * out.rotation * pred_mean.transpose();
    out.aligned = (out.scale * (pred * out.rotation.transpose())).rowwise() +
                  out.translation.transpose();
    return out;
}

double pa_mpjpe(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
    const SimilarityTransform t = procrustes_align(pred, gt);
    return (t.aligned - gt).rowwise().norm().mean();
}

std::pair<double, Eigen::Vector3d> mpjpe_root_aligned(const Eigen::MatrixXd& pred,
                                                      const Eigen::MatrixXd& gt) {
    if (pred.rows() != gt.rows() || pred.cols() != 3 || gt.cols() != 3)
        throw ShapeError("mpjpe inputs must both be J x 3");
    const Eigen::RowVector3d shift = gt.row(0) - pred.row(0);
    const Eigen::MatrixXd aligned = pred.rowwise() + shift;
    const double mean_err = (aligned - gt).rowwise().norm().mean();
    // Per-axis under the same root alignment: no rotation is applied, so a
    // depth-axis error stays attributed to the depth axis.
    const Eigen::Vector3d per_axis = (aligned - gt).cwiseAbs().colwise().mean();
    return {mean_err, per_axis};
}

double pck3d(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, double threshold_mm) {
    if (threshold_mm <= 0) throw ConfigError("pck3d threshold must be positive");
    if (pred.rows() != gt.rows() || pred.cols() != 3 || gt.cols() != 3)
        throw ShapeError("pck3d inputs must both be J x 3");
    const Eigen::RowVector3d shift = gt.row(0) - pred.row(0);
    const Eigen::MatrixXd aligned = pred.rowwise() + shift;
    const Eigen::VectorXd err = (aligned - gt).rowwise().norm();
    long ok = 0;
    for (Eigen::Index j = 0; j < err.size(); ++j)
        if (err[j] <= threshold_mm) ++ok;
    return 100.0 * static_cast<double>(ok) / static_cast<double>(err.size());
}

double implausibility_rate(const std::vector<Eigen::MatrixXd>& body_poses,
                           const std::vector<JointLimits>& limits) {
    if (body_poses.empty()) return 0.0;
    long bad = 0, total = 0;
    for (const auto& pose : body_poses) {
        if (pose.rows() != static_cast<Eigen::Index>(limits.size()) || pose.cols() != 3)
            throw ShapeError("body pose must be (J-1) x 3");
        for (size_t j = 0; j < limits.size(); ++j) {
            bool out_of_range = false;
            for (int c = 0; c < 3; ++c) {
                if (pose(static_cast<Eigen::Index>(j), c) <
                        limits[j].lo[c] - kImplausibilityMarginRad ||
                    pose(static_cast<Eigen::Index>(j), c) >
                        limits[j].hi[c] + kImplausibilityMarginRad) {
                    out_of_range = true;
                    break;
                }
            }
            if (out_of_range) ++bad;
            ++total;
        }
    }
    return static_cast<double>(bad) / static_cast<double>(total);
}

}  // namespace pseudopose
