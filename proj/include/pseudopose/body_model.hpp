#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace pseudopose {

// Axis-angle pose of the whole body. body_pose has one row per non-root
// joint, translation is in mm.
struct PoseParams {
    Eigen::Vector3d global_rot = Eigen::Vector3d::Zero();
    Eigen::MatrixXd body_pose;  // (J-1) x 3
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

struct ShapeParams {
    Eigen::VectorXd beta;
};

struct MeshOutput {
    Eigen::MatrixXd vertices;  // V x 3, mm
    Eigen::MatrixXd joints;    // J x 3, mm
};

struct JointLimits {
    Eigen::Vector3d lo;
    Eigen::Vector3d hi;
};

struct KinematicModel {
    int joint_count = 0;
    int vertex_count = 0;
    int shape_dim = 0;
    uint64_t generation_seed = 0;
    std::vector<int> parents;                    // parents[0] == -1
    Eigen::MatrixXd template_vertices;           // V x 3
    Eigen::MatrixXd rest_joints;                 // J x 3
    std::vector<Eigen::MatrixXd> vertex_shape_dirs;  // B entries, each V x 3
    std::vector<Eigen::MatrixXd> joint_shape_dirs;   // B entries, each J x 3
    Eigen::MatrixXd skinning_weights;            // V x J
    std::vector<JointLimits> joint_limits;       // J-1, for joints 1..J-1

    int param_count() const { return 3 * joint_count + shape_dim + 3; }
    PoseParams zero_pose() const;
    ShapeParams zero_shape() const;
};

struct ModelSpec {
    int joint_count = 16;
    int vertex_target = 480;
    int shape_dim = 4;
};

// Default 16-joint layout: pelvis, spine, chest, head, L/R arm chains off the
// chest, L/R leg chains off the pelvis.
KinematicModel make_synthetic_model(const ModelSpec& spec, uint64_t seed);

// Exponential map; series expansion below angle 1e-8.
Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis_angle);

// Rotation plus the three partial derivative matrices dR/d(axis_angle[c]).
void rodrigues_with_derivs(const Eigen::Vector3d& axis_angle, Eigen::Matrix3d& r,
                           std::array<Eigen::Matrix3d, 3>& dr);

// Log map, inverse of rodrigues; returns axis-angle with angle in [0, pi].
Eigen::Vector3d rotation_log(const Eigen::Matrix3d& r);

struct ShapedRest {
    Eigen::MatrixXd vertices;  // V x 3
    Eigen::MatrixXd joints;    // J x 3
};

ShapedRest shape_blend(const KinematicModel& model, const ShapeParams& beta);

// World transform per joint, x_world = M x_rest + o (translation not applied).
struct FkChain {
    std::vector<Eigen::Matrix3d> rot;
    std::vector<Eigen::Vector3d> off;
    Eigen::MatrixXd shaped_joints;  // J x 3, rest pose after shape blend
};

FkChain fk_chain(const KinematicModel& model, const PoseParams& pose,
                 const ShapeParams& beta);

MeshOutput forward_kinematics(const KinematicModel& model, const PoseParams& pose,
                              const ShapeParams& beta);

// Joints without the skinned vertices; the hot path for training and
// evaluation.
Eigen::MatrixXd fk_joints(const KinematicModel& model, const PoseParams& pose,
                          const ShapeParams& beta);

// Parameter vector layout used by all jacobians and optimizers:
//   [rot of joint 0 .. joint J-1 (3 each) | beta (B) | translation (3)]
Eigen::VectorXd flatten_params(const KinematicModel& model, const PoseParams& pose,
                               const ShapeParams& beta);
void unflatten_params(const KinematicModel& model, const Eigen::VectorXd& v,
                      PoseParams& pose, ShapeParams& beta);

struct FkJacobian {
    // d(joints row-major flattened, 3J) / d(params, P)
    Eigen::MatrixXd joints;
};

FkJacobian fk_joint_jacobian(const KinematicModel& model, const PoseParams& pose,
                             const ShapeParams& beta);

// Dense vertex jacobian, d(vertices flattened, 3V)/d(params). Test/diagnostic
// path; training only needs the joint jacobian.
Eigen::MatrixXd fk_vertex_jacobian(const KinematicModel& model, const PoseParams& pose,
                                   const ShapeParams& beta);

// Mirror data for horizontal flips: joint permutation (left<->right chains)
// and the axis-angle mirror map about the x=0 plane.
const std::vector<int>& mirror_joint_permutation();
Eigen::Vector3d mirror_axis_angle(const Eigen::Vector3d& aa);

// JSON asset persistence (sorted keys, shortest round-trip floats).
void save_model(const KinematicModel& model, const std::string& path);
KinematicModel load_model(const std::string& path);

}  // namespace pseudopose
