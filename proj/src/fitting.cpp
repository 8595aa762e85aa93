#include "pseudopose/fitting.hpp"

#include <cmath>
#include <limits>

#include "pseudopose/errors.hpp"

namespace pseudopose {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Preconditioner for the translation block: reprojection gradients w.r.t.
// millimeters are ~5 orders of magnitude smaller than those w.r.t. the
// unitless pose variables.
constexpr double kTransScale = 2.5e5;

struct Vars {
    Eigen::Vector3d grot = Eigen::Vector3d::Zero();
    Eigen::VectorXd z;
    Eigen::VectorXd beta;
    Eigen::Vector3d trans = Eigen::Vector3d::Zero();
};

struct Problem {
    const Sample& sample;
    const KinematicModel& model;
    const PosePriorVAE& prior;
    double prior_weight;
    std::vector<int> active_joints;  // joints entering the reprojection term
    bool trans_only = false;

    int visible_active() const {
        int n = 0;
        for (int j : active_joints)
            if (sample.gt_vis[j]) ++n;
        return n;
    }

    PoseParams make_pose(const Vars& v, RowMat* dec_acts_holder = nullptr,
                         std::vector<RowMat>* dec_acts = nullptr) const {
        PoseParams pose = model.zero_pose();
        pose.global_rot = v.grot;
        RowMat zin(1, v.z.size());
        zin.row(0) = v.z.transpose();
        const RowMat bp = decode_batch(prior, zin, dec_acts);
        if (dec_acts_holder) *dec_acts_holder = bp;
        for (int j = 0; j < model.joint_count - 1; ++j)
            for (int c = 0; c < 3; ++c) pose.body_pose(j, c) = bp(0, 3 * j + c);
        pose.translation = v.trans;
        return pose;
    }

    // Returns +inf for configurations the camera cannot see.
    double energy(const Vars& v) const {
        const PoseParams pose = make_pose(v);
        const ShapeParams beta{v.beta};
        const Eigen::MatrixXd joints = fk_joints(model, pose, beta);
        Eigen::MatrixXd kp;
        try {
            kp = project(joints, sample.camera);
        } catch (const BehindCameraError&) {
            return kInf;
        }
        const int vis = visible_active();
        double e = 0.0;
        const double norm = 1.0 / (vis * kReprojNormPx);
        for (int j : active_joints) {
            if (!sample.gt_vis[j]) continue;
            e += norm * (kp.row(j) - sample.gt_kp2d.row(j)).cwiseAbs().sum();
        }
        e += prior_weight * (v.z.squaredNorm() + v.beta.squaredNorm());
        return e;
    }

    // Gradient at a finite-energy point, in the same block layout as Vars.
    Vars gradient(const Vars& v) const {
        std::vector<RowMat> dec_acts;
        RowMat bp_row;
        const PoseParams pose = make_pose(v, &bp_row, &dec_acts);
        const ShapeParams beta{v.beta};
        const Eigen::MatrixXd joints = fk_joints(model, pose, beta);
        const Eigen::MatrixXd kp = project(joints, sample.camera);
        const auto pj = project_jacobian(joints, sample.camera);
        const FkJacobian jac = fk_joint_jacobian(model, pose, beta);

        const int jn = model.joint_count;
        const int pdim = model.param_count();
        Eigen::VectorXd djoints = Eigen::VectorXd::Zero(3 * jn);
        const int vis = visible_active();
        const double norm = 1.0 / (vis * kReprojNormPx);
        for (int j : active_joints) {
            if (!sample.gt_vis[j]) continue;
            const Eigen::Vector2d r = kp.row(j).transpose() - sample.gt_kp2d.row(j).transpose();
            const Eigen::Vector2d duv(norm * (r(0) > 0 ? 1.0 : (r(0) < 0 ? -1.0 : 0.0)),
                                      norm * (r(1) > 0 ? 1.0 : (r(1) < 0 ? -1.0 : 0.0)));
            djoints.segment<3>(3 * j) += pj[j].transpose() * duv;
        }
        const Eigen::VectorXd dparams = jac.joints.transpose() * djoints;

        Vars g;
        g.z = Eigen::VectorXd::Zero(v.z.size());
        g.beta = Eigen::VectorXd::Zero(v.beta.size());
        g.trans = dparams.segment<3>(pdim - 3);
        if (!trans_only) {
            g.grot = dparams.segment<3>(0);
            RowMat dbp(1, 3 * (jn - 1));
            dbp.row(0) = dparams.segment(3, 3 * (jn - 1)).transpose();
            g.z = decode_backward(prior, dec_acts, dbp).row(0).transpose();
            g.z += 2.0 * prior_weight * v.z;
            g.beta = dparams.segment(3 * jn, model.shape_dim);
            g.beta += 2.0 * prior_weight * v.beta;
        }
        return g;
    }
};

// Backtracking first-order descent; returns the accepted-energy trace.
double descend(const Problem& prob, Vars& v, int iters, double tol, double init_step,
               std::vector<double>* trace) {
    double e = prob.energy(v);
    if (trace) trace->push_back(e);
    if (!std::isfinite(e)) return e;
    double alpha = init_step;
    for (int it = 0; it < iters; ++it) {
        const Vars g = prob.gradient(v);
        bool accepted = false;
        for (int bt = 0; bt < 30; ++bt) {
            Vars cand = v;
            if (!prob.trans_only) {
                cand.grot -= alpha * g.grot;
                cand.z -= alpha * g.z;
                cand.beta -= alpha * g.beta;
            }
            cand.trans -= alpha * kTransScale * g.trans;
            const double ec = prob.energy(cand);
            if (ec < e) {
                const double rel = (e - ec) / std::max(e, 1e-12);
                v = std::move(cand);
                e = ec;
                if (trace) trace->push_back(e);
                accepted = true;
                alpha *= 1.5;
                if (rel < tol) return e;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) return e;  // no descent direction at this scale
    }
    return e;
}

}  // namespace

double fit_energy(const Sample& sample, const KinematicModel& model, const PosePriorVAE& prior,
                  const Eigen::Vector3d& global_rot, const Eigen::VectorXd& z,
                  const Eigen::VectorXd& beta, const Eigen::Vector3d& translation,
                  double prior_weight) {
    Problem prob{sample, model, prior, prior_weight, {}, false};
    for (int j = 0; j < model.joint_count; ++j) prob.active_joints.push_back(j);
    Vars v;
    v.grot = global_rot;
    v.z = z;
    v.beta = beta;
    v.trans = translation;
    return prob.energy(v);
}

FitResult fit_sample(const Sample& sample, const KinematicModel& model,
                     const PosePriorVAE& prior, const FitConfig& cfg, uint64_t seed) {
    int vis_total = 0;
    for (bool b : sample.gt_vis) vis_total += b ? 1 : 0;
    if (vis_total < 4)
        throw DataError("fit_sample: sample " + sample.id + " has only " +
                        std::to_string(vis_total) + " visible joints; need at least 4");

    FitResult res;
    Vars v;
    v.z = Eigen::VectorXd::Zero(prior.latent_dim);
    v.beta = Eigen::VectorXd::Zero(model.shape_dim);

    // Closed-form depth from the torso scale ratio, then descent.
    Problem full{sample, model, prior, cfg.prior_weight, {}, false};
    for (int j = 0; j < model.joint_count; ++j) full.active_joints.push_back(j);
    Problem torso{sample, model, prior, cfg.prior_weight, cfg.torso_joints, true};

    double best_e = kInf;
    Vars best_v = v;
    for (double yaw : cfg.yaw_candidates) {
        Vars cand = v;
        cand.grot = Eigen::Vector3d(0.0, yaw, 0.0);
        const PoseParams pose0 = torso.make_pose(cand);
        const Eigen::MatrixXd joints0 = fk_joints(model, pose0, ShapeParams{cand.beta});

        Eigen::Vector3d c3 = Eigen::Vector3d::Zero();
        Eigen::Vector2d c2 = Eigen::Vector2d::Zero();
        double s3 = 0.0, s2 = 0.0;
        int nvis = 0;
        for (int j : cfg.torso_joints) {
            if (!sample.gt_vis[j]) continue;
            c3 += joints0.row(j).transpose();
            c2 += sample.gt_kp2d.row(j).transpose();
            ++nvis;
        }
        if (nvis >= 2) {
            c3 /= nvis;
            c2 /= nvis;
            for (int j : cfg.torso_joints) {
                if (!sample.gt_vis[j]) continue;
                s3 += (joints0.row(j).transpose() - c3).head<2>().norm();
                s2 += (sample.gt_kp2d.row(j).transpose() - c2).norm();
            }
            if (s2 > 1e-9) {
                const double depth = sample.camera.fx * (s3 / s2);
                cand.trans(2) = depth - c3(2);
                cand.trans(0) =
                    (c2(0) - sample.camera.cx) * depth / sample.camera.fx - c3(0);
                cand.trans(1) =
                    (c2(1) - sample.camera.cy) * depth / sample.camera.fy - c3(1);
            }
        }
        if (cand.trans(2) == 0.0) cand.trans(2) = kCanonicalDepthMm;

        descend(torso, cand, cfg.stage1_iters, cfg.tol, cfg.init_step, nullptr);
        const double e = full.energy(cand);
        if (e < best_e) {
            best_e = e;
            best_v = cand;
        }
    }
    v = best_v;

    res.final_energy = descend(full, v, cfg.stage2_iters, cfg.tol, cfg.init_step,
                               &res.energy_trace);
    res.failed = !std::isfinite(res.final_energy);

    const PoseParams pose = full.make_pose(v);
    PseudoGTRecord rec;
    rec.sample_id = sample.id;
    rec.dataset = sample.domain;
    rec.global_rot = pose.global_rot;
    rec.latent = v.z;
    rec.body_pose = Eigen::VectorXd(3 * (model.joint_count - 1));
    for (int j = 0; j < model.joint_count - 1; ++j)
        for (int c = 0; c < 3; ++c) rec.body_pose(3 * j + c) = pose.body_pose(j, c);
    rec.beta = v.beta;
    rec.translation = v.trans;
    rec.producer = "fitting";
    rec.producer_version = cfg.producer_version;
    rec.seed = seed;
    rec.reproj_err_px = res.failed ? 0.0 : reprojection_error_px(rec, sample, model);
    res.record = std::move(rec);
    return res;
}

}  // namespace pseudopose
