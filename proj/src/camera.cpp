#include "pseudopose/camera.hpp"

#include <vector>

#include "pseudopose/errors.hpp"

namespace pseudopose {

nlohmann::json Camera::to_json() const {
    nlohmann::json j;
    j["mode"] = mode == CameraMode::Perspective ? "perspective" : "weak_perspective";
    j["fx"] = fx;
    j["fy"] = fy;
    j["cx"] = cx;
    j["cy"] = cy;
    j["w"] = width;
    j["h"] = height;
    if (mode == CameraMode::WeakPerspective) {
        j["s"] = scale;
        j["tx"] = tx;
        j["ty"] = ty;
    }
    return j;
}

Camera Camera::from_json(const nlohmann::json& j) {
    Camera c;
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "perspective") {
        c.mode = CameraMode::Perspective;
    } else if (mode == "weak_perspective") {
        c.mode = CameraMode::WeakPerspective;
    } else {
        throw FormatError("unknown camera mode: " + mode);
    }
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("w").get<int>();
    c.height = j.at("h").get<int>();
    if (c.mode == CameraMode::WeakPerspective) {
        c.scale = j.at("s").get<double>();
        c.tx = j.at("tx").get<double>();
        c.ty = j.at("ty").get<double>();
    }
    if (c.fx <= 0 || c.fy <= 0 || c.width <= 0 || c.height <= 0 ||
        (c.mode == CameraMode::WeakPerspective && c.scale <= 0))
        throw ConfigError("invalid camera parameters");
    return c;
}

Eigen::MatrixXd project(const Eigen::MatrixXd& pts, const Camera& cam) {
    const Eigen::Index n = pts.rows();
    Eigen::MatrixXd uv(n, 2);
    if (cam.mode == CameraMode::Perspective) {
        std::vector<int> bad;
        for (Eigen::Index i = 0; i < n; ++i)
            if (pts(i, 2) <= kMinDepthMm) bad.push_back(static_cast<int>(i));
        if (!bad.empty())
            throw BehindCameraError("points at or behind the camera plane", bad);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double z = pts(i, 2);
            uv(i, 0) = cam.fx * pts(i, 0) / z + cam.cx;
            uv(i, 1) = cam.fy * pts(i, 1) / z + cam.cy;
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            uv(i, 0) = cam.scale * pts(i, 0) + cam.tx;
            uv(i, 1) = cam.scale * pts(i, 1) + cam.ty;
        }
    }
    return uv;
}

std::vector<Eigen::Matrix<double, 2, 3>> project_jacobian(const Eigen::MatrixXd& pts,
                                                          const Camera& cam) {
    const Eigen::Index n = pts.rows();
    std::vector<Eigen::Matrix<double, 2, 3>> jac(n);
    if (cam.mode == CameraMode::Perspective) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double z = pts(i, 2);
            if (z <= kMinDepthMm)
                throw BehindCameraError("point at or behind the camera plane",
                                        {static_cast<int>(i)});
            jac[i] << cam.fx / z, 0, -cam.fx * pts(i, 0) / (z * z),
                      0, cam.fy / z, -cam.fy * pts(i, 1) / (z * z);
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            jac[i] << cam.scale, 0, 0,
                      0, cam.scale, 0;
        }
    }
    return jac;
}

}  // namespace pseudopose
