#pragma once

#include <Eigen/Core>

#include <json.hpp>

#include <string>

namespace pseudopose {

enum class CameraMode { Perspective, WeakPerspective };

struct Camera {
    CameraMode mode = CameraMode::Perspective;
    double fx = 1000.0, fy = 1000.0;
    double cx = 256.0, cy = 256.0;
    int width = 512, height = 512;
    // weak-perspective extras
    double scale = 0.2;  // px per mm
    double tx = 256.0, ty = 256.0;

    nlohmann::json to_json() const;
    static Camera from_json(const nlohmann::json& j);
};

// Minimum admissible depth in perspective mode (mm).
inline constexpr double kMinDepthMm = 1.0;

// points3d: N x 3 camera-frame mm. Returns N x 2 pixels.
Eigen::MatrixXd project(const Eigen::MatrixXd& points3d, const Camera& cam);

// d(uv_j)/d(p_j): per-point 2x3 jacobian blocks, returned as N stacked 2x3.
std::vector<Eigen::Matrix<double, 2, 3>> project_jacobian(const Eigen::MatrixXd& points3d,
                                                          const Camera& cam);

}  // namespace pseudopose
