#include "pseudopose/body_model.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

#include "pseudopose/errors.hpp"
#include "pseudopose/jsonio.hpp"
#include "pseudopose/rng.hpp"

namespace pseudopose {

namespace {

constexpr int kDefaultJoints = 16;
const int kDefaultParents[kDefaultJoints] = {-1, 0, 1, 2, 2, 4, 5, 2, 7, 8, 0, 10, 11, 0, 13, 14};

// Rest layout in mm, y up, +x is the body's left. Mirror-symmetric about x=0
// so horizontal flips map exactly onto a permuted, mirrored pose.
const double kRestLayout[kDefaultJoints][3] = {
    {0, 0, 0},        // 0 pelvis
    {0, 150, 0},      // 1 spine
    {0, 300, 0},      // 2 chest
    {0, 480, 0},      // 3 head
    {180, 420, 0},    // 4 l_shoulder
    {460, 420, 0},    // 5 l_elbow
    {710, 420, 0},    // 6 l_wrist
    {-180, 420, 0},   // 7 r_shoulder
    {-460, 420, 0},   // 8 r_elbow
    {-710, 420, 0},   // 9 r_wrist
    {95, -70, 0},     // 10 l_hip
    {105, -480, 0},   // 11 l_knee
    {110, -870, 0},   // 12 l_ankle
    {-95, -70, 0},    // 13 r_hip
    {-105, -480, 0},  // 14 r_knee
    {-110, -870, 0},  // 15 r_ankle
};

// Tube radius per bone, indexed by the bone's child joint.
const double kBoneRadius[kDefaultJoints] = {
    0, 110, 110, 85, 55, 45, 38, 55, 45, 38, 80, 70, 50, 80, 70, 50};

// Per-component axis-angle bound per joint (symmetric range [-a, a]).
const double kLimitHalfWidth[kDefaultJoints] = {
    0, 0.35, 0.35, 0.6, 1.2, 1.6, 0.5, 1.2, 1.6, 0.5, 1.0, 1.6, 0.5, 1.0, 1.6, 0.5};

double point_segment_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                              const Eigen::Vector3d& b, Eigen::Vector3d* closest) {
    const Eigen::Vector3d ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Eigen::Vector3d c = a + t * ab;
    if (closest) *closest = c;
    return (p - c).norm();
}

}  // namespace

PoseParams KinematicModel::zero_pose() const {
    PoseParams p;
    p.body_pose = Eigen::MatrixXd::Zero(joint_count - 1, 3);
    return p;
}

ShapeParams KinematicModel::zero_shape() const {
    return ShapeParams{Eigen::VectorXd::Zero(shape_dim)};
}

KinematicModel make_synthetic_model(const ModelSpec& spec, uint64_t seed) {
    if (spec.joint_count < 2) throw ConfigError("joint_count must be >= 2");
    if (spec.vertex_target < 10 * spec.joint_count)
        throw ConfigError("vertex_target must be >= 10 * joint_count");
    if (spec.shape_dim < 1) throw ConfigError("shape_dim must be >= 1");
    if (spec.joint_count != kDefaultJoints)
        throw ConfigError("only the default 16-joint layout is supported");

    const int J = spec.joint_count;
    const int B = spec.shape_dim;

    KinematicModel m;
    m.joint_count = J;
    m.shape_dim = B;
    m.generation_seed = seed;
    m.parents.assign(kDefaultParents, kDefaultParents + J);

    m.rest_joints.resize(J, 3);
    for (int j = 0; j < J; ++j)
        m.rest_joints.row(j) = Eigen::RowVector3d(kRestLayout[j][0], kRestLayout[j][1],
                                                  kRestLayout[j][2]);

    // Bones: one per non-root joint, from parent to child. Each bone gets
    // an equal share of vertex rings (8 vertices per ring).
    const int bone_count = J - 1;
    const int ring_verts = 8;
    const int rings_per_bone = std::max(1, spec.vertex_target / (bone_count * ring_verts));
    const int V = bone_count * rings_per_bone * ring_verts;
    m.vertex_count = V;
    m.template_vertices.resize(V, 3);

    Rng rng(seed);
    std::vector<int> vertex_bone(V);  // child joint of the generating bone
    int vi = 0;
    for (int child = 1; child < J; ++child) {
        const Eigen::Vector3d a = m.rest_joints.row(m.parents[child]);
        const Eigen::Vector3d b = m.rest_joints.row(child);
        Eigen::Vector3d axis = b - a;
        const double len = axis.norm();
        axis /= len;
        // orthonormal frame around the bone axis
        Eigen::Vector3d u = std::abs(axis.y()) < 0.9 ? axis.cross(Eigen::Vector3d::UnitY())
                                                     : axis.cross(Eigen::Vector3d::UnitX());
        u.normalize();
        const Eigen::Vector3d w = axis.cross(u);
        for (int r = 0; r < rings_per_bone; ++r) {
            // rings extend slightly past both joints so the tube is capped
            const double f = -0.08 + 1.16 * (r + 0.5) / rings_per_bone;
            const bool end_ring = (r == 0 || r == rings_per_bone - 1);
            const double taper = end_ring ? 0.85 : 1.0;
            const Eigen::Vector3d center = a + f * (b - a);
            for (int k = 0; k < ring_verts; ++k) {
                const double ang = 2.0 * M_PI * k / ring_verts;
                const double radius =
                    kBoneRadius[child] * taper + rng.uniform(-3.0, 3.0);
                const Eigen::Vector3d jitter_axial = axis * rng.uniform(-3.0, 3.0);
                const Eigen::Vector3d p =
                    center + radius * (std::cos(ang) * u + std::sin(ang) * w) + jitter_axial;
                m.template_vertices.row(vi) = p.transpose();
                vertex_bone[vi] = child;
                ++vi;
            }
        }
    }

    // Skinning: weight by inverse distance to the two nearest bones; bone
    // (parent -> child) moves with the parent joint's frame.
    m.skinning_weights = Eigen::MatrixXd::Zero(V, J);
    for (int v = 0; v < V; ++v) {
        const Eigen::Vector3d p = m.template_vertices.row(v);
        int best[2] = {-1, -1};
        double dist[2] = {1e300, 1e300};
        for (int child = 1; child < J; ++child) {
            const double d = point_segment_distance(p, m.rest_joints.row(m.parents[child]),
                                                    m.rest_joints.row(child), nullptr);
            if (d < dist[0]) {
                dist[1] = dist[0];
                best[1] = best[0];
                dist[0] = d;
                best[0] = child;
            } else if (d < dist[1]) {
                dist[1] = d;
                best[1] = child;
            }
        }
        const double w0 = 1.0 / (dist[0] + 10.0);
        const double w1 = 1.0 / (dist[1] + 10.0);
        const double s = w0 + w1;
        m.skinning_weights(v, m.parents[best[0]]) += w0 / s;
        m.skinning_weights(v, m.parents[best[1]]) += w1 / s;
    }

    // Shape directions (mm per unit beta). Joint dirs are mirror-symmetric.
    m.joint_shape_dirs.assign(B, Eigen::MatrixXd::Zero(J, 3));
    m.vertex_shape_dirs.assign(B, Eigen::MatrixXd::Zero(V, 3));
    // b0: overall scale about the pelvis
    if (B > 0) {
        m.joint_shape_dirs[0] = 0.05 * m.rest_joints;
        m.vertex_shape_dirs[0] = 0.05 * m.template_vertices;
    }
    // b1: limb length (arms stretch from the chest, legs from the pelvis)
    if (B > 1) {
        for (int j = 4; j <= 9; ++j)
            m.joint_shape_dirs[1].row(j) = 0.08 * (m.rest_joints.row(j) - m.rest_joints.row(2));
        for (int j = 10; j <= 15; ++j)
            m.joint_shape_dirs[1].row(j) = 0.08 * m.rest_joints.row(j);
    }
    // b2: girth, radial push away from the generating bone axis
    if (B > 2) {
        for (int v = 0; v < V; ++v) {
            const int child = vertex_bone[v];
            Eigen::Vector3d closest;
            const Eigen::Vector3d p = m.template_vertices.row(v);
            point_segment_distance(p, m.rest_joints.row(m.parents[child]),
                                   m.rest_joints.row(child), &closest);
            Eigen::Vector3d radial = p - closest;
            const double d = radial.norm();
            if (d > 1e-9) m.vertex_shape_dirs[2].row(v) = (radial / d).transpose() * 10.0;
        }
    }
    // b3: torso length, vertical stretch of spine/chest/head/shoulders
    if (B > 3) {
        for (int j : {1, 2, 3, 4, 7})
            m.joint_shape_dirs[3](j, 1) = 0.06 * m.rest_joints(j, 1);
    }
    // vertex dirs for the skeletal bases follow the skinning interpolation
    for (int b = 0; b < B; ++b) {
        if (b == 0 || b == 2) continue;
        m.vertex_shape_dirs[b] += m.skinning_weights * m.joint_shape_dirs[b];
    }
    if (B > 4) {
        // extra bases beyond the named four: smooth per-joint noise fields
        Rng extra(seed ^ 0x51ed270b);
        for (int b = 4; b < B; ++b) {
            for (int j = 0; j < J; ++j)
                for (int c = 0; c < 3; ++c) m.joint_shape_dirs[b](j, c) = extra.uniform(-8, 8);
            m.vertex_shape_dirs[b] = m.skinning_weights * m.joint_shape_dirs[b];
        }
    }

    // Normalize total rest height (max - min template y) to exactly 1700 mm.
    const double height =
        m.template_vertices.col(1).maxCoeff() - m.template_vertices.col(1).minCoeff();
    const double scale = 1700.0 / height;
    m.template_vertices *= scale;
    m.rest_joints *= scale;
    for (int b = 0; b < B; ++b) {
        m.joint_shape_dirs[b] *= scale;
        m.vertex_shape_dirs[b] *= scale;
    }

    m.joint_limits.resize(J - 1);
    for (int j = 1; j < J; ++j) {
        const double a = kLimitHalfWidth[j];
        m.joint_limits[j - 1].lo = Eigen::Vector3d(-a, -a, -a);
        m.joint_limits[j - 1].hi = Eigen::Vector3d(a, a, a);
    }
    return m;
}

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& aa) {
    Eigen::Matrix3d r;
    std::array<Eigen::Matrix3d, 3> dr;
    rodrigues_with_derivs(aa, r, dr);
    return r;
}

void rodrigues_with_derivs(const Eigen::Vector3d& aa, Eigen::Matrix3d& r,
                           std::array<Eigen::Matrix3d, 3>& dr) {
    if (!aa.allFinite()) throw NumericError("non-finite axis-angle input");
    const double u = aa.squaredNorm();  // theta^2
    const double theta = std::sqrt(u);
    // R = I + a*K + b*K^2 with a = sin(t)/t, b = (1-cos(t))/t^2; da/du, db/du
    // are the derivatives with respect to u = t^2.
    double a, b, da_du, db_du;
    if (theta < 1e-8) {
        a = 1.0 - u / 6.0;
        b = 0.5 - u / 24.0;
        da_du = -1.0 / 6.0 + u / 60.0;
        db_du = -1.0 / 24.0 + u / 360.0;
    } else {
        const double s = std::sin(theta), c = std::cos(theta);
        a = s / theta;
        b = (1.0 - c) / u;
        da_du = (theta * c - s) / (2.0 * u * theta);
        db_du = (theta * s - 2.0 * (1.0 - c)) / (2.0 * u * u);
    }
    Eigen::Matrix3d k;
    k << 0, -aa.z(), aa.y(), aa.z(), 0, -aa.x(), -aa.y(), aa.x(), 0;
    const Eigen::Matrix3d k2 = k * k;
    r = Eigen::Matrix3d::Identity() + a * k + b * k2;
    for (int c = 0; c < 3; ++c) {
        Eigen::Matrix3d e = Eigen::Matrix3d::Zero();
        // e = [e_c]x
        const int i1 = (c + 1) % 3, i2 = (c + 2) % 3;
        e(i2, i1) = 1.0;
        e(i1, i2) = -1.0;
        const double du_dc = 2.0 * aa[c];
        dr[c] = (da_du * du_dc) * k + a * e + (db_du * du_dc) * k2 + b * (e * k + k * e);
    }
}

Eigen::Vector3d rotation_log(const Eigen::Matrix3d& r) {
    const double tr = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
    const double theta = std::acos(tr);
    Eigen::Vector3d w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    if (theta < 1e-7) return 0.5 * w;
    if (theta > M_PI - 1e-5) {
        // near pi: axis from the symmetric part
        Eigen::Matrix3d s = 0.5 * (r + Eigen::Matrix3d::Identity());
        Eigen::Vector3d axis(std::sqrt(std::max(0.0, s(0, 0))),
                             std::sqrt(std::max(0.0, s(1, 1))),
                             std::sqrt(std::max(0.0, s(2, 2))));
        // fix signs using the largest component
        int imax = 0;
        s.diagonal().maxCoeff(&imax);
        for (int i = 0; i < 3; ++i) {
            if (i == imax) continue;
            if (s(imax, i) < 0) axis[i] = -axis[i];
        }
        if (axis.norm() > 0) axis.normalize();
        // pick the sign consistent with the skew part when it is not exactly pi
        if (w.dot(axis) < 0) axis = -axis;
        return theta * axis;
    }
    return (theta / (2.0 * std::sin(theta))) * w;
}

ShapedRest shape_blend(const KinematicModel& model, const ShapeParams& beta) {
    if (beta.beta.size() != model.shape_dim)
        throw ShapeError("beta has length " + std::to_string(beta.beta.size()) +
                         ", expected " + std::to_string(model.shape_dim));
    ShapedRest out;
    out.vertices = model.template_vertices;
    out.joints = model.rest_joints;
    for (int b = 0; b < model.shape_dim; ++b) {
        if (beta.beta[b] == 0.0) continue;
        out.vertices += beta.beta[b] * model.vertex_shape_dirs[b];
        out.joints += beta.beta[b] * model.joint_shape_dirs[b];
    }
    return out;
}

FkChain fk_chain(const KinematicModel& model, const PoseParams& pose,
                 const ShapeParams& beta) {
    const int J = model.joint_count;
    if (pose.body_pose.rows() != J - 1 || pose.body_pose.cols() != 3)
        throw ShapeError("body_pose must be (J-1) x 3");
    if (!pose.global_rot.allFinite() || !pose.body_pose.allFinite() ||
        !pose.translation.allFinite() || !beta.beta.allFinite())
        throw NumericError("non-finite pose or shape parameters");

    const ShapedRest shaped = shape_blend(model, beta);
    FkChain ch;
    ch.rot.resize(J);
    ch.off.resize(J);
    ch.shaped_joints = shaped.joints;
    for (int j = 0; j < J; ++j) {
        const Eigen::Vector3d aa =
            j == 0 ? pose.global_rot : Eigen::Vector3d(pose.body_pose.row(j - 1));
        const Eigen::Matrix3d r = rodrigues(aa);
        const Eigen::Vector3d g = shaped.joints.row(j);
        if (j == 0) {
            ch.rot[0] = r;
            ch.off[0] = g - r * g;
        } else {
            const int p = model.parents[j];
            ch.rot[j] = ch.rot[p] * r;
            ch.off[j] = ch.off[p] + ch.rot[p] * (g - r * g);
        }
    }
    return ch;
}

MeshOutput forward_kinematics(const KinematicModel& model, const PoseParams& pose,
                              const ShapeParams& beta) {
    const int J = model.joint_count;
    const int V = model.vertex_count;
    const FkChain ch = fk_chain(model, pose, beta);
    const ShapedRest shaped = shape_blend(model, beta);

    MeshOutput out;
    out.joints.resize(J, 3);
    for (int j = 0; j < J; ++j) {
        const Eigen::Vector3d g = ch.shaped_joints.row(j);
        out.joints.row(j) = (ch.rot[j] * g + ch.off[j] + pose.translation).transpose();
    }
    out.vertices = Eigen::MatrixXd::Zero(V, 3);
    for (int j = 0; j < J; ++j) {
        // skip joints with no skinned vertices
        if (model.skinning_weights.col(j).isZero(0)) continue;
        const Eigen::MatrixXd posed =
            (shaped.vertices * ch.rot[j].transpose()).rowwise() + ch.off[j].transpose();
        out.vertices += model.skinning_weights.col(j).asDiagonal() * posed;
    }
    out.vertices.rowwise() += pose.translation.transpose();
    return out;
}

Eigen::MatrixXd fk_joints(const KinematicModel& model, const PoseParams& pose,
                          const ShapeParams& beta) {
    const int J = model.joint_count;
    const FkChain ch = fk_chain(model, pose, beta);
    Eigen::MatrixXd joints(J, 3);
    for (int j = 0; j < J; ++j) {
        const Eigen::Vector3d g = ch.shaped_joints.row(j);
        joints.row(j) = (ch.rot[j] * g + ch.off[j] + pose.translation).transpose();
    }
    return joints;
}

Eigen::VectorXd flatten_params(const KinematicModel& model, const PoseParams& pose,
                               const ShapeParams& beta) {
    const int J = model.joint_count, B = model.shape_dim;
    Eigen::VectorXd v(model.param_count());
    v.segment<3>(0) = pose.global_rot;
    for (int j = 1; j < J; ++j) v.segment<3>(3 * j) = pose.body_pose.row(j - 1);
    v.segment(3 * J, B) = beta.beta;
    v.segment<3>(3 * J + B) = pose.translation;
    return v;
}

void unflatten_params(const KinematicModel& model, const Eigen::VectorXd& v,
                      PoseParams& pose, ShapeParams& beta) {
    const int J = model.joint_count, B = model.shape_dim;
    if (v.size() != model.param_count()) throw ShapeError("bad parameter vector size");
    pose.global_rot = v.segment<3>(0);
    pose.body_pose.resize(J - 1, 3);
    for (int j = 1; j < J; ++j) pose.body_pose.row(j - 1) = v.segment<3>(3 * j);
    beta.beta = v.segment(3 * J, B);
    pose.translation = v.segment<3>(3 * J + B);
}

namespace {

// Shared machinery for the joint/vertex jacobians: world transform
// derivatives with respect to every rotation parameter and beta.
struct ChainDerivs {
    FkChain chain;
    // dM[j][q], dO[j][q] for rotation params q in [0, 3J); only ancestor
    // params are nonzero, tracked in rot_params[j].
    std::vector<std::vector<Eigen::Matrix3d>> dM;
    std::vector<std::vector<Eigen::Vector3d>> dO;
    std::vector<std::vector<int>> rot_params;
    // dO_beta[j][b] (dM is zero for beta)
    std::vector<std::vector<Eigen::Vector3d>> dO_beta;
    Eigen::MatrixXd shaped_vertices;
};

ChainDerivs chain_derivs(const KinematicModel& model, const PoseParams& pose,
                         const ShapeParams& beta) {
    const int J = model.joint_count, B = model.shape_dim;
    const ShapedRest shaped = shape_blend(model, beta);

    ChainDerivs d;
    d.chain.rot.resize(J);
    d.chain.off.resize(J);
    d.chain.shaped_joints = shaped.joints;
    d.shaped_vertices = shaped.vertices;
    d.dM.assign(J, std::vector<Eigen::Matrix3d>(3 * J, Eigen::Matrix3d::Zero()));
    d.dO.assign(J, std::vector<Eigen::Vector3d>(3 * J, Eigen::Vector3d::Zero()));
    d.rot_params.assign(J, {});
    d.dO_beta.assign(J, std::vector<Eigen::Vector3d>(B, Eigen::Vector3d::Zero()));

    if (!pose.global_rot.allFinite() || !pose.body_pose.allFinite() ||
        !beta.beta.allFinite())
        throw NumericError("non-finite parameters");

    for (int j = 0; j < J; ++j) {
        const Eigen::Vector3d aa =
            j == 0 ? pose.global_rot : Eigen::Vector3d(pose.body_pose.row(j - 1));
        Eigen::Matrix3d r;
        std::array<Eigen::Matrix3d, 3> dr;
        rodrigues_with_derivs(aa, r, dr);
        const Eigen::Vector3d g = shaped.joints.row(j);
        if (j == 0) {
            d.chain.rot[0] = r;
            d.chain.off[0] = g - r * g;
            for (int c = 0; c < 3; ++c) {
                d.dM[0][c] = dr[c];
                d.dO[0][c] = -dr[c] * g;
                d.rot_params[0].push_back(c);
            }
            for (int b = 0; b < B; ++b) {
                const Eigen::Vector3d dg = model.joint_shape_dirs[b].row(j);
                d.dO_beta[0][b] = dg - r * dg;
            }
        } else {
            const int p = model.parents[j];
            d.chain.rot[j] = d.chain.rot[p] * r;
            const Eigen::Vector3d rest_off = g - r * g;
            d.chain.off[j] = d.chain.off[p] + d.chain.rot[p] * rest_off;
            d.rot_params[j] = d.rot_params[p];
            for (int q : d.rot_params[p]) {
                d.dM[j][q] = d.dM[p][q] * r;
                d.dO[j][q] = d.dO[p][q] + d.dM[p][q] * rest_off;
            }
            for (int c = 0; c < 3; ++c) {
                const int q = 3 * j + c;
                d.dM[j][q] = d.chain.rot[p] * dr[c];
                d.dO[j][q] = d.chain.rot[p] * (-dr[c] * g);
                d.rot_params[j].push_back(q);
            }
            for (int b = 0; b < B; ++b) {
                const Eigen::Vector3d dg = model.joint_shape_dirs[b].row(j);
                d.dO_beta[j][b] = d.dO_beta[p][b] + d.chain.rot[p] * (dg - r * dg);
            }
        }
    }
    return d;
}

}  // namespace

FkJacobian fk_joint_jacobian(const KinematicModel& model, const PoseParams& pose,
                             const ShapeParams& beta) {
    const int J = model.joint_count, B = model.shape_dim;
    const int P = model.param_count();
    const ChainDerivs d = chain_derivs(model, pose, beta);

    FkJacobian jac;
    jac.joints = Eigen::MatrixXd::Zero(3 * J, P);
    for (int j = 0; j < J; ++j) {
        const Eigen::Vector3d g = d.chain.shaped_joints.row(j);
        for (int q : d.rot_params[j]) {
            const Eigen::Vector3d dp = d.dM[j][q] * g + d.dO[j][q];
            jac.joints.block<3, 1>(3 * j, q) = dp;
        }
        for (int b = 0; b < B; ++b) {
            const Eigen::Vector3d dg = model.joint_shape_dirs[b].row(j);
            const Eigen::Vector3d dp = d.chain.rot[j] * dg + d.dO_beta[j][b];
            jac.joints.block<3, 1>(3 * j, 3 * J + b) = dp;
        }
        jac.joints.block<3, 3>(3 * j, 3 * J + B).setIdentity();
    }
    return jac;
}

Eigen::MatrixXd fk_vertex_jacobian(const KinematicModel& model, const PoseParams& pose,
                                   const ShapeParams& beta) {
    const int J = model.joint_count, B = model.shape_dim, V = model.vertex_count;
    const int P = model.param_count();
    const ChainDerivs d = chain_derivs(model, pose, beta);

    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3 * V, P);
    for (int v = 0; v < V; ++v) {
        const Eigen::Vector3d s = d.shaped_vertices.row(v);
        for (int j = 0; j < J; ++j) {
            const double w = model.skinning_weights(v, j);
            if (w == 0.0) continue;
            for (int q : d.rot_params[j])
                jac.block<3, 1>(3 * v, q) += w * (d.dM[j][q] * s + d.dO[j][q]);
            for (int b = 0; b < B; ++b) {
                const Eigen::Vector3d ds = model.vertex_shape_dirs[b].row(v);
                jac.block<3, 1>(3 * v, 3 * J + b) +=
                    w * (d.chain.rot[j] * ds + d.dO_beta[j][b]);
            }
        }
        jac.block<3, 3>(3 * v, 3 * J + B).setIdentity();
    }
    return jac;
}

const std::vector<int>& mirror_joint_permutation() {
    static const std::vector<int> perm = {0, 1, 2, 3, 7, 8, 9, 4, 5, 6, 13, 14, 15, 10, 11, 12};
    return perm;
}

Eigen::Vector3d mirror_axis_angle(const Eigen::Vector3d& aa) {
    // conjugation by diag(-1,1,1)
    return {aa.x(), -aa.y(), -aa.z()};
}

void save_model(const KinematicModel& m, const std::string& path) {
    using jsonio::json;
    json j;
    j["format_version"] = 1;
    j["kind"] = "kinematic_model";
    j["joint_count"] = m.joint_count;
    j["vertex_count"] = m.vertex_count;
    j["shape_dim"] = m.shape_dim;
    j["generation_seed"] = m.generation_seed;
    j["parents"] = m.parents;
    j["template_vertices"] = jsonio::matrix_to_json(m.template_vertices);
    j["rest_joints"] = jsonio::matrix_to_json(m.rest_joints);
    json vsd = json::array(), jsd = json::array();
    for (const auto& d : m.vertex_shape_dirs) vsd.push_back(jsonio::matrix_to_json(d));
    for (const auto& d : m.joint_shape_dirs) jsd.push_back(jsonio::matrix_to_json(d));
    j["vertex_shape_dirs"] = vsd;
    j["joint_shape_dirs"] = jsd;
    j["skinning_weights"] = jsonio::matrix_to_json(m.skinning_weights);
    json lo = json::array(), hi = json::array();
    for (const auto& l : m.joint_limits) {
        for (int c = 0; c < 3; ++c) lo.push_back(l.lo[c]);
        for (int c = 0; c < 3; ++c) hi.push_back(l.hi[c]);
    }
    j["joint_limits_lo"] = lo;
    j["joint_limits_hi"] = hi;
    jsonio::write_file(path, j);
}

KinematicModel load_model(const std::string& path) {
    using jsonio::json;
    const json j = jsonio::read_file(path);
    if (jsonio::require(j, "kind", path) != "kinematic_model")
        throw FormatError(path + ": not a kinematic_model asset");
    KinematicModel m;
    m.joint_count = jsonio::require(j, "joint_count", path).get<int>();
    m.vertex_count = jsonio::require(j, "vertex_count", path).get<int>();
    m.shape_dim = jsonio::require(j, "shape_dim", path).get<int>();
    m.generation_seed = jsonio::require(j, "generation_seed", path).get<uint64_t>();
    m.parents = jsonio::require(j, "parents", path).get<std::vector<int>>();
    const int J = m.joint_count, V = m.vertex_count, B = m.shape_dim;
    m.template_vertices = jsonio::matrix_from_json(j.at("template_vertices"), V, 3);
    m.rest_joints = jsonio::matrix_from_json(j.at("rest_joints"), J, 3);
    for (const auto& d : j.at("vertex_shape_dirs"))
        m.vertex_shape_dirs.push_back(jsonio::matrix_from_json(d, V, 3));
    for (const auto& d : j.at("joint_shape_dirs"))
        m.joint_shape_dirs.push_back(jsonio::matrix_from_json(d, J, 3));
    if (static_cast<int>(m.vertex_shape_dirs.size()) != B ||
        static_cast<int>(m.joint_shape_dirs.size()) != B)
        throw FormatError(path + ": shape dir count mismatch");
    m.skinning_weights = jsonio::matrix_from_json(j.at("skinning_weights"), V, J);
    const auto lo = jsonio::doubles_from_json(j.at("joint_limits_lo"));
    const auto hi = jsonio::doubles_from_json(j.at("joint_limits_hi"));
    if (lo.size() != static_cast<size_t>(3 * (J - 1)) || hi.size() != lo.size())
        throw FormatError(path + ": joint limit arity mismatch");
    m.joint_limits.resize(J - 1);
    for (int i = 0; i < J - 1; ++i) {
        m.joint_limits[i].lo = Eigen::Vector3d(lo[3 * i], lo[3 * i + 1], lo[3 * i + 2]);
        m.joint_limits[i].hi = Eigen::Vector3d(hi[3 * i], hi[3 * i + 1], hi[3 * i + 2]);
    }
    return m;
}

}  // namespace pseudopose
