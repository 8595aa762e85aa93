#include <doctest.h>

#include <Eigen/Geometry>
#include <filesystem>

#include "pseudopose/body_model.hpp"
#include "pseudopose/rng.hpp"

using namespace pseudopose;

namespace {

KinematicModel& test_model() {
    static KinematicModel m = make_synthetic_model(ModelSpec{}, 20211);
    return m;
}

PoseParams random_pose(const KinematicModel& model, Rng& rng, double scale) {
    PoseParams p;
    for (int c = 0; c < 3; ++c) p.global_rot(c) = scale * rng.normal();
    p.body_pose.resize(model.joint_count - 1, 3);
    for (int j = 0; j < model.joint_count - 1; ++j)
        for (int c = 0; c < 3; ++c) p.body_pose(j, c) = scale * rng.normal();
    p.translation = Eigen::Vector3d(100 * rng.normal(), 100 * rng.normal(),
                                    5000 + 100 * rng.normal());
    return p;
}

ShapeParams random_shape(const KinematicModel& model, Rng& rng) {
    ShapeParams s;
    s.beta.resize(model.shape_dim);
    for (int b = 0; b < model.shape_dim; ++b) s.beta(b) = rng.normal();
    return s;
}

// Independent rotation oracle built on Eigen's quaternion exponential map.
Eigen::Matrix3d quaternion_rotation(const Eigen::Vector3d& aa) {
    const double angle = aa.norm();
    if (angle < 1e-14) return Eigen::Matrix3d::Identity();
    return Eigen::AngleAxisd(angle, aa / angle).toRotationMatrix();
}

// Straight-line FK rewrite: walk each joint's ancestor chain from the root,
// composing one local rotation at a time. Shares no code with fk_chain.
Eigen::MatrixXd chain_walk_joints(const KinematicModel& model, const PoseParams& pose,
                                  const ShapeParams& beta) {
    ShapedRest rest = shape_blend(model, beta);
    const int J = model.joint_count;
    Eigen::MatrixXd out(J, 3);
    for (int j = 0; j < J; ++j) {
        std::vector<int> path;
        for (int a = j; a >= 0; a = model.parents[a]) path.push_back(a);
        std::reverse(path.begin(), path.end());
        Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
        Eigen::Vector3d pos = Eigen::Vector3d::Zero();
        for (size_t k = 0; k < path.size(); ++k) {
            const int jk = path[k];
            const Eigen::Vector3d aa =
                jk == 0 ? pose.global_rot : Eigen::Vector3d(pose.body_pose.row(jk - 1));
            const Eigen::Vector3d rest_off =
                jk == 0 ? Eigen::Vector3d(rest.joints.row(0))
                        : Eigen::Vector3d(rest.joints.row(jk) -
                                          rest.joints.row(model.parents[jk]));
            pos += r * rest_off;
            r = r * quaternion_rotation(aa);
        }
        out.row(j) = (pos + pose.translation).transpose();
    }
    return out;
}

}  // namespace

TEST_CASE("rodrigues matches the quaternion oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::Vector3d aa(rng.normal(), rng.normal(), rng.normal());
        if (trial % 4 == 0) aa *= 1e-6;   // exercise the small-angle series
        if (trial % 4 == 1) aa *= 2.5;    // angles beyond pi/2
        const Eigen::Matrix3d r = rodrigues(aa);
        const Eigen::Matrix3d q = quaternion_rotation(aa);
        CHECK((r - q).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(std::abs(r.determinant() - 1.0) < 1e-12);
        CHECK((r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
              1e-12);
    }
}

TEST_CASE("rotation_log inverts rodrigues") {
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::Vector3d aa(rng.normal(), rng.normal(), rng.normal());
        double n = aa.norm();
        if (n > 3.1) aa *= 3.1 / n;  // stay inside the principal branch
        const Eigen::Matrix3d r = rodrigues(aa);
        const Eigen::Vector3d back = rotation_log(r);
        CHECK((rodrigues(back) - r).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("rodrigues derivatives match central differences") {
    Rng rng(13);
    const double h = 1e-6;
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::Vector3d aa(rng.normal(), rng.normal(), rng.normal());
        Eigen::Matrix3d r;
        std::array<Eigen::Matrix3d, 3> dr;
        rodrigues_with_derivs(aa, r, dr);
        CHECK((r - rodrigues(aa)).cwiseAbs().maxCoeff() < 1e-14);
        for (int c = 0; c < 3; ++c) {
            Eigen::Vector3d ap = aa, am = aa;
            ap(c) += h;
            am(c) -= h;
            const Eigen::Matrix3d fd = (rodrigues(ap) - rodrigues(am)) / (2 * h);
            CHECK((dr[c] - fd).cwiseAbs().maxCoeff() < 1e-7);
        }
    }
}

TEST_CASE("synthetic model has the documented structure") {
    const KinematicModel& m = test_model();
    CHECK(m.joint_count == 16);
    CHECK(m.vertex_count == 480);
    CHECK(m.shape_dim == 4);
    CHECK(m.parents[0] == -1);
    for (int j = 1; j < m.joint_count; ++j) {
        CHECK(m.parents[j] >= 0);
        CHECK(m.parents[j] < j);
    }
    // Skinning weights: rows sum to one, all nonnegative.
    for (int v = 0; v < m.vertex_count; ++v) {
        CHECK(m.skinning_weights.row(v).minCoeff() >= 0.0);
        CHECK(std::abs(m.skinning_weights.row(v).sum() - 1.0) < 1e-12);
    }
    // Rest body is human-scale: vertical extent near 1700mm.
    const double extent =
        m.template_vertices.col(1).maxCoeff() - m.template_vertices.col(1).minCoeff();
    CHECK(extent > 1400.0);
    CHECK(extent < 2000.0);
    // Joint limits exist for all non-root joints and bracket zero.
    REQUIRE((int)m.joint_limits.size() == m.joint_count - 1);
    for (const auto& lim : m.joint_limits)
        for (int c = 0; c < 3; ++c) {
            CHECK(lim.lo(c) <= 0.0);
            CHECK(lim.hi(c) >= 0.0);
        }
}

TEST_CASE("forward kinematics agrees with a per-joint chain walk") {
    const KinematicModel& m = test_model();
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const PoseParams pose = random_pose(m, rng, 0.6);
        const ShapeParams beta = random_shape(m, rng);
        const Eigen::MatrixXd fast = fk_joints(m, pose, beta);
        const Eigen::MatrixXd oracle = chain_walk_joints(m, pose, beta);
        CHECK((fast - oracle).cwiseAbs().maxCoeff() < 1e-9);
        const MeshOutput mesh = forward_kinematics(m, pose, beta);
        CHECK((mesh.joints - oracle).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("zero pose reproduces the shaped rest joints plus translation") {
    const KinematicModel& m = test_model();
    Rng rng(22);
    const ShapeParams beta = random_shape(m, rng);
    PoseParams pose = m.zero_pose();
    pose.translation = Eigen::Vector3d(10, -20, 5000);
    const ShapedRest rest = shape_blend(m, beta);
    const Eigen::MatrixXd j = fk_joints(m, pose, beta);
    for (int jj = 0; jj < m.joint_count; ++jj)
        CHECK((j.row(jj) - rest.joints.row(jj) - pose.translation.transpose())
                  .cwiseAbs()
                  .maxCoeff() < 1e-9);
}

TEST_CASE("skinned vertices follow rigid joint motion") {
    const KinematicModel& m = test_model();
    Rng rng(23);
    // Global rotation only: every vertex must transform rigidly.
    PoseParams pose = m.zero_pose();
    pose.global_rot = Eigen::Vector3d(0.3, -0.2, 0.5);
    pose.translation = Eigen::Vector3d(0, 0, 4000);
    const ShapeParams beta = random_shape(m, rng);
    const ShapedRest rest = shape_blend(m, beta);
    const MeshOutput mesh = forward_kinematics(m, pose, beta);
    const Eigen::Matrix3d r = rodrigues(pose.global_rot);
    const Eigen::Vector3d root = rest.joints.row(0).transpose();
    for (int v = 0; v < m.vertex_count; ++v) {
        const Eigen::Vector3d rigid =
            r * (rest.vertices.row(v).transpose() - root) + root + pose.translation;
        CHECK((mesh.vertices.row(v).transpose() - rigid).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("flatten and unflatten are inverse") {
    const KinematicModel& m = test_model();
    Rng rng(24);
    const PoseParams pose = random_pose(m, rng, 0.5);
    const ShapeParams beta = random_shape(m, rng);
    const Eigen::VectorXd v = flatten_params(m, pose, beta);
    REQUIRE(v.size() == m.param_count());
    PoseParams pose2;
    ShapeParams beta2;
    unflatten_params(m, v, pose2, beta2);
    CHECK((pose2.global_rot - pose.global_rot).cwiseAbs().maxCoeff() == 0.0);
    CHECK((pose2.body_pose - pose.body_pose).cwiseAbs().maxCoeff() == 0.0);
    CHECK((pose2.translation - pose.translation).cwiseAbs().maxCoeff() == 0.0);
    CHECK((beta2.beta - beta.beta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("joint jacobian matches central differences") {
    const KinematicModel& m = test_model();
    Rng rng(25);
    const double h = 1e-5;
    for (int trial = 0; trial < 5; ++trial) {
        const PoseParams pose = random_pose(m, rng, 0.5);
        const ShapeParams beta = random_shape(m, rng);
        const FkJacobian jac = fk_joint_jacobian(m, pose, beta);
        REQUIRE(jac.joints.rows() == 3 * m.joint_count);
        REQUIRE(jac.joints.cols() == m.param_count());
        Eigen::VectorXd v = flatten_params(m, pose, beta);
        for (int p = 0; p < m.param_count(); ++p) {
            Eigen::VectorXd vp = v, vm = v;
            vp(p) += h;
            vm(p) -= h;
            PoseParams pp, pm;
            ShapeParams bp, bm;
            unflatten_params(m, vp, pp, bp);
            unflatten_params(m, vm, pm, bm);
            const Eigen::MatrixXd jp = fk_joints(m, pp, bp);
            const Eigen::MatrixXd jm = fk_joints(m, pm, bm);
            for (int jj = 0; jj < m.joint_count; ++jj)
                for (int c = 0; c < 3; ++c) {
                    const double fd = (jp(jj, c) - jm(jj, c)) / (2 * h);
                    const double an = jac.joints(3 * jj + c, p);
                    const double scale = std::max({std::abs(fd), std::abs(an), 1.0});
                    CHECK(std::abs(fd - an) / scale < 1e-5);
                }
        }
    }
}

TEST_CASE("vertex jacobian matches central differences on sampled entries") {
    const KinematicModel& m = test_model();
    Rng rng(26);
    const double h = 1e-5;
    const PoseParams pose = random_pose(m, rng, 0.5);
    const ShapeParams beta = random_shape(m, rng);
    const Eigen::MatrixXd jac = fk_vertex_jacobian(m, pose, beta);
    REQUIRE(jac.rows() == 3 * m.vertex_count);
    REQUIRE(jac.cols() == m.param_count());
    Eigen::VectorXd v = flatten_params(m, pose, beta);
    for (int p = 0; p < m.param_count(); ++p) {
        Eigen::VectorXd vp = v, vm = v;
        vp(p) += h;
        vm(p) -= h;
        PoseParams pp, pm;
        ShapeParams bp, bm;
        unflatten_params(m, vp, pp, bp);
        unflatten_params(m, vm, pm, bm);
        const MeshOutput mp = forward_kinematics(m, pp, bp);
        const MeshOutput mm = forward_kinematics(m, pm, bm);
        for (int vi = 0; vi < m.vertex_count; vi += 37)
            for (int c = 0; c < 3; ++c) {
                const double fd = (mp.vertices(vi, c) - mm.vertices(vi, c)) / (2 * h);
                const double an = jac(3 * vi + c, p);
                const double scale = std::max({std::abs(fd), std::abs(an), 1.0});
                CHECK(std::abs(fd - an) / scale < 1e-5);
            }
    }
}

TEST_CASE("mirror permutation is a left-right involution") {
    const KinematicModel& m = test_model();
    const auto& perm = mirror_joint_permutation();
    REQUIRE((int)perm.size() == m.joint_count);
    for (int j = 0; j < m.joint_count; ++j) CHECK(perm[perm[j]] == j);
    // Spine chain maps to itself.
    for (int j : {0, 1, 2, 3}) CHECK(perm[j] == j);
}

TEST_CASE("mirrored pose produces the x-negated skeleton") {
    const KinematicModel& m = test_model();
    Rng rng(27);
    const auto& perm = mirror_joint_permutation();
    for (int trial = 0; trial < 10; ++trial) {
        const PoseParams pose = random_pose(m, rng, 0.5);
        const ShapeParams beta = random_shape(m, rng);
        PoseParams mir;
        mir.global_rot = mirror_axis_angle(pose.global_rot);
        mir.body_pose.resize(m.joint_count - 1, 3);
        for (int j = 1; j < m.joint_count; ++j)
            mir.body_pose.row(perm[j] - 1) =
                mirror_axis_angle(Eigen::Vector3d(pose.body_pose.row(j - 1))).transpose();
        mir.translation = pose.translation;
        mir.translation(0) = -mir.translation(0);
        const Eigen::MatrixXd j0 = fk_joints(m, pose, beta);
        const Eigen::MatrixXd j1 = fk_joints(m, mir, beta);
        for (int j = 0; j < m.joint_count; ++j) {
            Eigen::Vector3d expect = j0.row(j).transpose();
            expect(0) = -expect(0);
            CHECK((j1.row(perm[j]).transpose() - expect).cwiseAbs().maxCoeff() < 1e-6);
        }
    }
}

TEST_CASE("model save/load round-trips exactly") {
    const KinematicModel& m = test_model();
    const std::string path =
        (std::filesystem::temp_directory_path() / "pp_model_test.json").string();
    save_model(m, path);
    const KinematicModel back = load_model(path);
    CHECK(back.joint_count == m.joint_count);
    CHECK(back.generation_seed == m.generation_seed);
    CHECK(back.parents == m.parents);
    CHECK((back.template_vertices - m.template_vertices).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.rest_joints - m.rest_joints).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.skinning_weights - m.skinning_weights).cwiseAbs().maxCoeff() == 0.0);
    for (int b = 0; b < m.shape_dim; ++b) {
        CHECK((back.vertex_shape_dirs[b] - m.vertex_shape_dirs[b]).cwiseAbs().maxCoeff() ==
              0.0);
        CHECK((back.joint_shape_dirs[b] - m.joint_shape_dirs[b]).cwiseAbs().maxCoeff() ==
              0.0);
    }
    for (size_t j = 0; j < m.joint_limits.size(); ++j) {
        CHECK((back.joint_limits[j].lo - m.joint_limits[j].lo).cwiseAbs().maxCoeff() ==
              0.0);
        CHECK((back.joint_limits[j].hi - m.joint_limits[j].hi).cwiseAbs().maxCoeff() ==
              0.0);
    }
    // Same seed regenerates the identical model.
    const KinematicModel regen = make_synthetic_model(ModelSpec{}, 20211);
    CHECK((regen.template_vertices - m.template_vertices).cwiseAbs().maxCoeff() == 0.0);
    std::filesystem::remove(path);
}

TEST_CASE("mirror map in the quaternion picture") {
    // Conjugating a rotation by the reflection diag(-1,1,1) negates the y and z
    // components of the axis-angle vector.
    Rng rng(28);
    Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
    s(0, 0) = -1;
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Vector3d aa(rng.normal(), rng.normal(), rng.normal());
        const Eigen::Matrix3d conj = s * rodrigues(aa) * s;
        CHECK((rodrigues(mirror_axis_angle(aa)) - conj).cwiseAbs().maxCoeff() < 1e-12);
    }
}
