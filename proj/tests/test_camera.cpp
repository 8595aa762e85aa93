#include <doctest.h>

#include "pseudopose/camera.hpp"
#include "pseudopose/errors.hpp"
#include "pseudopose/rng.hpp"

using namespace pseudopose;

TEST_CASE("perspective projection matches the pinhole formula") {
    Camera cam;
    cam.fx = 1100;
    cam.fy = 900;
    cam.cx = 250;
    cam.cy = 260;
    Rng rng(31);
    Eigen::MatrixXd pts(8, 3);
    for (int i = 0; i < 8; ++i)
        pts.row(i) = Eigen::RowVector3d(300 * rng.normal(), 300 * rng.normal(),
                                        5000 + 400 * rng.normal());
    const Eigen::MatrixXd uv = project(pts, cam);
    REQUIRE(uv.rows() == 8);
    REQUIRE(uv.cols() == 2);
    for (int i = 0; i < 8; ++i) {
        CHECK(uv(i, 0) == doctest::Approx(cam.fx * pts(i, 0) / pts(i, 2) + cam.cx).epsilon(1e-12));
        CHECK(uv(i, 1) == doctest::Approx(cam.fy * pts(i, 1) / pts(i, 2) + cam.cy).epsilon(1e-12));
    }
}

TEST_CASE("points at or behind the camera are rejected") {
    Camera cam;
    Eigen::MatrixXd pts(2, 3);
    pts << 0, 0, 5000, 0, 0, 0.5;  // second point under kMinDepthMm
    CHECK_THROWS_AS(project(pts, cam), BehindCameraError);
    pts(1, 2) = -100;
    CHECK_THROWS_AS(project(pts, cam), BehindCameraError);
}

TEST_CASE("weak-perspective projection is affine in x,y and ignores z") {
    Camera cam;
    cam.mode = CameraMode::WeakPerspective;
    cam.scale = 0.15;
    cam.tx = 240;
    cam.ty = 270;
    Eigen::MatrixXd pts(3, 3);
    pts << 100, -50, 5000, 100, -50, 9000, 0, 0, -200;
    const Eigen::MatrixXd uv = project(pts, cam);
    CHECK(uv(0, 0) == doctest::Approx(0.15 * 100 + 240).epsilon(1e-12));
    CHECK(uv(0, 1) == doctest::Approx(0.15 * -50 + 270).epsilon(1e-12));
    // Depth changes nothing, and negative depth is fine in this mode.
    CHECK((uv.row(0) - uv.row(1)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(uv(2, 0) == doctest::Approx(240.0).epsilon(1e-12));
}

TEST_CASE("projection jacobian matches central differences") {
    Rng rng(32);
    for (int mode = 0; mode < 2; ++mode) {
        Camera cam;
        cam.mode = mode == 0 ? CameraMode::Perspective : CameraMode::WeakPerspective;
        Eigen::MatrixXd pts(5, 3);
        for (int i = 0; i < 5; ++i)
            pts.row(i) = Eigen::RowVector3d(200 * rng.normal(), 200 * rng.normal(),
                                            5000 + 300 * rng.normal());
        const auto jac = project_jacobian(pts, cam);
        REQUIRE(jac.size() == 5);
        const double h = 1e-4;
        for (int i = 0; i < 5; ++i)
            for (int c = 0; c < 3; ++c) {
                Eigen::MatrixXd pp = pts, pm = pts;
                pp(i, c) += h;
                pm(i, c) -= h;
                const Eigen::MatrixXd up = project(pp, cam);
                const Eigen::MatrixXd um = project(pm, cam);
                for (int d = 0; d < 2; ++d) {
                    const double fd = (up(i, d) - um(i, d)) / (2 * h);
                    CHECK(std::abs(jac[i](d, c) - fd) < 1e-6);
                }
            }
    }
}

TEST_CASE("camera json round-trip") {
    Camera cam;
    cam.mode = CameraMode::WeakPerspective;
    cam.fx = 1234.5;
    cam.fy = 987.25;
    cam.cx = 251;
    cam.cy = 263;
    cam.width = 640;
    cam.height = 480;
    cam.scale = 0.175;
    cam.tx = 320.5;
    cam.ty = 239.5;
    const Camera back = Camera::from_json(cam.to_json());
    CHECK(back.mode == cam.mode);
    CHECK(back.fx == cam.fx);
    CHECK(back.fy == cam.fy);
    CHECK(back.cx == cam.cx);
    CHECK(back.cy == cam.cy);
    CHECK(back.width == cam.width);
    CHECK(back.height == cam.height);
    CHECK(back.scale == cam.scale);
    CHECK(back.tx == cam.tx);
    CHECK(back.ty == cam.ty);
}
