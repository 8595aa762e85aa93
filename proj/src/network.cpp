#include "pseudopose/network.hpp"

#include <cmath>

#include "pseudopose/errors.hpp"
#include "pseudopose/jsonio.hpp"
#include "pseudopose/kernels.hpp"

namespace pseudopose {

namespace {

Eigen::Vector3d translation_from_head(const Eigen::Vector3d& h) {
    return {kTransXyScaleMm * h(0), kTransXyScaleMm * h(1), kCanonicalDepthMm + kTransZScaleMm * h(2)};
}

Eigen::Vector3d head_grad_from_translation(const Eigen::Vector3d& dt) {
    return {kTransXyScaleMm * dt(0), kTransXyScaleMm * dt(1), kTransZScaleMm * dt(2)};
}

Eigen::Vector3d shaped_root(const KinematicModel& model, const Eigen::VectorXd& beta) {
    Eigen::Vector3d g = model.rest_joints.row(0).transpose();
    for (int b = 0; b < model.shape_dim; ++b)
        g += beta(b) * model.joint_shape_dirs[b].row(0).transpose();
    return g;
}

}  // namespace

Eigen::VectorXd sample_features(const Sample& s) {
    const int jn = static_cast<int>(s.observed_kp.rows());
    Eigen::VectorXd x(3 * jn);
    for (int j = 0; j < jn; ++j) {
        const double c = s.observed_conf(j);
        x(3 * j + 0) = c * (s.observed_kp(j, 0) - s.camera.cx) / kKpNormPx;
        x(3 * j + 1) = c * (s.observed_kp(j, 1) - s.camera.cy) / kKpNormPx;
        x(3 * j + 2) = c;
    }
    return x;
}

RowMat encode_features(const Mlp& encoder, const RowMat& x, EncoderActs* acts) {
    RowMat pre = encoder.forward(x, acts ? &acts->mlp_acts : nullptr);
    RowMat feat(pre.rows(), pre.cols());
    double* fp = feat.data();
    const double* pp = pre.data();
    for (Eigen::Index i = 0; i < pre.size(); ++i) fp[i] = std::tanh(pp[i]);
    if (acts) acts->feature = feat;
    return feat;
}

Network Network::create(int joint_count, int latent_dim, int shape_dim, uint64_t seed) {
    Network n;
    n.seed = seed;
    Rng rng(seed);
    Rng r_enc = rng.fork(1), r_lat = rng.fork(2), r_dir = rng.fork(3), r_rot = rng.fork(4),
        r_shape = rng.fork(5), r_trans = rng.fork(6);
    n.encoder = Mlp::create({3 * joint_count, 256, 256, kFeatureDim}, r_enc);
    // Heads start near zero so early predictions sit at the canonical
    // rest configuration instead of random poses.
    n.latent_head = Mlp::create({kFeatureDim, latent_dim}, r_lat, 0.01);
    n.direct_pose_head = Mlp::create({kFeatureDim, 3 * (joint_count - 1)}, r_dir, 0.01);
    n.global_rot_head = Mlp::create({kFeatureDim, 3}, r_rot, 0.01);
    n.shape_head = Mlp::create({kFeatureDim, shape_dim}, r_shape, 0.01);
    n.trans_head = Mlp::create({kFeatureDim, 3}, r_trans, 0.01);
    return n;
}

void Network::save(const std::string& path) const {
    using jsonio::json;
    json j;
    j["kind"] = "network";
    j["format_version"] = 1;
    j["role"] = role;
    j["use_prior"] = use_prior;
    j["init_mode"] = init_mode;
    j["bridge_used"] = bridge_used;
    j["seed"] = seed;
    j["config_hash"] = config_hash;
    j["encoder"] = encoder.to_json();
    j["latent_head"] = latent_head.to_json();
    j["direct_pose_head"] = direct_pose_head.to_json();
    j["global_rot_head"] = global_rot_head.to_json();
    j["shape_head"] = shape_head.to_json();
    j["trans_head"] = trans_head.to_json();
    jsonio::write_file(path, j);
}

Network Network::load(const std::string& path) {
    using jsonio::json;
    const json j = jsonio::read_file(path);
    if (!j.contains("kind") || j.at("kind") != "network")
        throw FormatError("file " + path + " is not a network checkpoint");
    Network n;
    n.role = j.at("role").get<std::string>();
    n.use_prior = j.at("use_prior").get<bool>();
    n.init_mode = j.at("init_mode").get<std::string>();
    n.bridge_used = j.at("bridge_used").get<bool>();
    n.seed = j.at("seed").get<uint64_t>();
    n.config_hash = j.at("config_hash").get<std::string>();
    n.encoder = Mlp::from_json(j.at("encoder"));
    n.latent_head = Mlp::from_json(j.at("latent_head"));
    n.direct_pose_head = Mlp::from_json(j.at("direct_pose_head"));
    n.global_rot_head = Mlp::from_json(j.at("global_rot_head"));
    n.shape_head = Mlp::from_json(j.at("shape_head"));
    n.trans_head = Mlp::from_json(j.at("trans_head"));
    return n;
}

InferResult infer(const Network& net, const PosePriorVAE& prior, const KinematicModel& model,
                  const Sample& sample) {
    const Eigen::VectorXd x = sample_features(sample);
    if (x.size() != net.encoder.input_dim())
        throw ShapeError("sample " + sample.id + ": feature width " +
                         std::to_string(x.size()) + " does not match encoder input " +
                         std::to_string(net.encoder.input_dim()));
    RowMat xin(1, x.size());
    xin.row(0) = x.transpose();
    const RowMat feat = encode_features(net.encoder, xin, nullptr);

    InferResult res;
    res.pose = model.zero_pose();
    if (net.use_prior) {
        const RowMat zrow = net.latent_head.forward(feat);
        Eigen::VectorXd z = zrow.row(0).transpose();
        res.pose.body_pose = decode(prior, LatentCode{z});
        res.latent = std::move(z);
    } else {
        const RowMat bp = net.direct_pose_head.forward(feat);
        for (int j = 0; j < model.joint_count - 1; ++j)
            for (int c = 0; c < 3; ++c) res.pose.body_pose(j, c) = bp(0, 3 * j + c);
    }
    res.pose.global_rot = net.global_rot_head.forward(feat).row(0).transpose();
    res.beta.beta = net.shape_head.forward(feat).row(0).transpose();
    res.pose.translation =
        translation_from_head(net.trans_head.forward(feat).row(0).transpose());

    res.joints3d = fk_joints(model, res.pose, res.beta);
    res.kp2d = project(res.joints3d, sample.camera);
    double err = 0.0;
    int n = 0;
    for (int j = 0; j < model.joint_count; ++j) {
        if (sample.observed_conf(j) <= 0.0) continue;
        err += (res.kp2d.row(j) - sample.observed_kp.row(j)).cwiseAbs().sum();
        n += 2;
    }
    res.reproj_err_px = n > 0 ? err / n : 0.0;
    return res;
}

TrainItem augment_item(const TrainItem& item, const KinematicModel& model,
                       const TrainConfig& cfg, Rng& rng) {
    // Draw in a fixed order so the stream stays aligned whether or not an
    // individual transform applies.
    const bool do_flip = rng.uniform() < cfg.aug_flip_prob;
    const double alpha = rng.uniform(-cfg.aug_rot_deg, cfg.aug_rot_deg) * M_PI / 180.0;
    const double scale = rng.uniform(1.0 - cfg.aug_scale, 1.0 + cfg.aug_scale);

    TrainItem out = item;
    Sample& s = out.sample;
    const int jn = static_cast<int>(s.observed_kp.rows());
    const std::vector<int>& perm = mirror_joint_permutation();

    // Horizontal flip needs the principal point on the image centerline.
    if (do_flip && std::abs(2.0 * s.camera.cx - s.camera.width) < 1e-9) {
        Sample f = s;
        for (int j = 0; j < jn; ++j) {
            const int pj = perm[j];
            f.observed_conf(pj) = s.observed_conf(j);
            f.gt_vis[pj] = s.gt_vis[j];
            f.observed_kp(pj, 0) = s.observed_conf(j) > 0.0 ? s.camera.width - s.observed_kp(j, 0) : 0.0;
            f.observed_kp(pj, 1) = s.observed_conf(j) > 0.0 ? s.observed_kp(j, 1) : 0.0;
            f.gt_kp2d(pj, 0) = s.camera.width - s.gt_kp2d(j, 0);
            f.gt_kp2d(pj, 1) = s.gt_kp2d(j, 1);
        }
        s = std::move(f);
        if (out.has3d) {
            PoseParams p = out.gt_pose;
            p.global_rot = mirror_axis_angle(out.gt_pose.global_rot);
            for (int j = 1; j < jn; ++j)
                p.body_pose.row(perm[j] - 1) =
                    mirror_axis_angle(out.gt_pose.body_pose.row(j - 1).transpose()).transpose();
            p.translation = out.gt_pose.translation;
            p.translation(0) = -p.translation(0);
            out.gt_pose = p;
            Eigen::MatrixXd j3 = out.gt_joints3d;
            for (int j = 0; j < jn; ++j) {
                j3.row(perm[j]) = out.gt_joints3d.row(j);
                j3(perm[j], 0) = -j3(perm[j], 0);
            }
            out.gt_joints3d = j3;
        }
    }

    // In-plane rotation about the camera axis.
    const double ca = std::cos(alpha), sa = std::sin(alpha);
    for (int j = 0; j < jn; ++j) {
        auto rot2d = [&](Eigen::MatrixXd& kp) {
            const double u = kp(j, 0) - s.camera.cx, v = kp(j, 1) - s.camera.cy;
            kp(j, 0) = s.camera.cx + ca * u - sa * v;
            kp(j, 1) = s.camera.cy + sa * u + ca * v;
        };
        rot2d(s.gt_kp2d);
        if (s.observed_conf(j) > 0.0) rot2d(s.observed_kp);
    }
    if (out.has3d) {
        Eigen::Matrix3d rz;
        rz << ca, -sa, 0, sa, ca, 0, 0, 0, 1;
        const Eigen::Vector3d g0 = shaped_root(model, out.gt_beta);
        out.gt_pose.global_rot = rotation_log(rz * rodrigues(out.gt_pose.global_rot));
        out.gt_pose.translation = rz * (g0 + out.gt_pose.translation) - g0;
        out.gt_joints3d = (rz * out.gt_joints3d.transpose()).transpose();
    }

    // 2D scale about the principal point, realized as a focal length change
    // so the 3D ground truth is untouched.
    s.camera.fx *= scale;
    s.camera.fy *= scale;
    for (int j = 0; j < jn; ++j) {
        s.gt_kp2d(j, 0) = s.camera.cx + scale * (s.gt_kp2d(j, 0) - s.camera.cx);
        s.gt_kp2d(j, 1) = s.camera.cy + scale * (s.gt_kp2d(j, 1) - s.camera.cy);
        if (s.observed_conf(j) > 0.0) {
            s.observed_kp(j, 0) = s.camera.cx + scale * (s.observed_kp(j, 0) - s.camera.cx);
            s.observed_kp(j, 1) = s.camera.cy + scale * (s.observed_kp(j, 1) - s.camera.cy);
        }
    }
    return out;
}

Network train_network(Network net, const PosePriorVAE& prior, const KinematicModel& model,
                      const std::vector<TrainItem>& mocap_side,
                      const std::vector<TrainItem>& itw_side, const TrainConfig& cfg,
                      uint64_t seed, TrainLog* log) {
    if (mocap_side.empty() || itw_side.empty())
        throw ConfigError("train_network: both batch sides must be nonempty");
    if (cfg.batch_size % 2 != 0) throw ConfigError("batch size must be even");
    for (int e : cfg.lr_drop_epochs)
        if (e >= cfg.epochs + 1)
            throw ConfigError("learning-rate drop epoch beyond schedule length");

    const int jn = model.joint_count;
    const int bn = model.shape_dim;
    const int pdim = model.param_count();
    const int bp_dim = 3 * (jn - 1);
    const int half = cfg.batch_size / 2;

    Mlp& pose_head = net.use_prior ? net.latent_head : net.direct_pose_head;
    Adam opt_enc = Adam::for_mlp(net.encoder);
    Adam opt_pose = Adam::for_mlp(pose_head);
    Adam opt_rot = Adam::for_mlp(net.global_rot_head);
    Adam opt_shape = Adam::for_mlp(net.shape_head);
    Adam opt_trans = Adam::for_mlp(net.trans_head);

    Rng rng = Rng(seed).fork(11);
    std::vector<size_t> midx(mocap_side.size()), iidx(itw_side.size());
    for (size_t i = 0; i < midx.size(); ++i) midx[i] = i;
    for (size_t i = 0; i < iidx.size(); ++i) iidx[i] = i;
    size_t ipos = iidx.size();  // trigger shuffle on first use

    const int steps_per_epoch =
        static_cast<int>((mocap_side.size() + half - 1) / static_cast<size_t>(half));
    long global_step = 0;
    double ma_accum = 0.0;
    int ma_count = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double lr = cfg.learning_rate;
        for (int de : cfg.lr_drop_epochs)
            if (epoch >= de) lr *= 0.1;
        rng.shuffle(midx);
        double epoch_loss = 0.0;

        for (int step = 0; step < steps_per_epoch; ++step, ++global_step) {
            std::vector<const TrainItem*> batch_src;
            batch_src.reserve(cfg.batch_size);
            for (int k = 0; k < half; ++k)
                batch_src.push_back(
                    &mocap_side[midx[(static_cast<size_t>(step) * half + k) % midx.size()]]);
            for (int k = 0; k < half; ++k) {
                if (ipos >= iidx.size()) {
                    rng.shuffle(iidx);
                    ipos = 0;
                }
                batch_src.push_back(&itw_side[iidx[ipos++]]);
            }

            std::vector<TrainItem> batch;
            batch.reserve(cfg.batch_size);
            for (const TrainItem* src : batch_src)
                batch.push_back(cfg.augment ? augment_item(*src, model, cfg, rng) : *src);

            const int nb = cfg.batch_size;
            RowMat x(nb, net.encoder.input_dim());
            for (int i = 0; i < nb; ++i) x.row(i) = sample_features(batch[i].sample).transpose();

            EncoderActs enc_acts;
            const RowMat feat = encode_features(net.encoder, x, &enc_acts);

            std::vector<RowMat> pose_acts, rot_acts, shape_acts, trans_acts;
            const RowMat pose_out = pose_head.forward(feat, &pose_acts);
            const RowMat rot_out = net.global_rot_head.forward(feat, &rot_acts);
            const RowMat shape_out = net.shape_head.forward(feat, &shape_acts);
            const RowMat trans_out = net.trans_head.forward(feat, &trans_acts);

            RowMat bp_mat;  // nb x 3(J-1)
            std::vector<RowMat> dec_acts;
            if (net.use_prior) {
                bp_mat = decode_batch(prior, pose_out, &dec_acts);
            } else {
                bp_mat = pose_out;
            }

            RowMat d_pose_out = RowMat::Zero(nb, pose_out.cols());
            RowMat d_bp = RowMat::Zero(nb, bp_dim);
            RowMat d_rot = RowMat::Zero(nb, 3);
            RowMat d_shape = RowMat::Zero(nb, bn);
            RowMat d_trans = RowMat::Zero(nb, 3);
            double batch_loss = 0.0;
            const double inv_n = 1.0 / nb;

            for (int i = 0; i < nb; ++i) {
                const TrainItem& it = batch[i];
                PoseParams pose = model.zero_pose();
                pose.global_rot = rot_out.row(i).transpose();
                for (int j = 0; j < jn - 1; ++j)
                    for (int c = 0; c < 3; ++c) pose.body_pose(j, c) = bp_mat(i, 3 * j + c);
                ShapeParams beta{shape_out.row(i).transpose()};
                pose.translation = translation_from_head(trans_out.row(i).transpose());

                const Eigen::MatrixXd joints = fk_joints(model, pose, beta);
                const FkJacobian jac = fk_joint_jacobian(model, pose, beta);

                Eigen::VectorXd djoints = Eigen::VectorXd::Zero(3 * jn);
                Eigen::VectorXd dparams = Eigen::VectorXd::Zero(pdim);
                double loss_i = 0.0;

                // Reprojection against the clean 2D ground truth (the weak
                // supervision signal), mean per-joint L1 in pixels / 512.
                bool projected = true;
                Eigen::MatrixXd kp;
                try {
                    kp = project(joints, it.sample.camera);
                } catch (const BehindCameraError&) {
                    projected = false;
                }
                int vis = 0;
                for (int j = 0; j < jn; ++j) vis += it.sample.gt_vis[j] ? 1 : 0;
                if (projected && vis > 0 && cfg.w_reproj > 0.0) {
                    const auto pj = project_jacobian(joints, it.sample.camera);
                    const double norm = 1.0 / (vis * kReprojNormPx);
                    for (int j = 0; j < jn; ++j) {
                        if (!it.sample.gt_vis[j]) continue;
                        const Eigen::Vector2d r =
                            kp.row(j).transpose() - it.sample.gt_kp2d.row(j).transpose();
                        loss_i += cfg.w_reproj * norm * (std::abs(r(0)) + std::abs(r(1)));
                        Eigen::Vector2d duv(r(0) > 0 ? 1.0 : (r(0) < 0 ? -1.0 : 0.0),
                                            r(1) > 0 ? 1.0 : (r(1) < 0 ? -1.0 : 0.0));
                        duv *= cfg.w_reproj * norm;
                        djoints.segment<3>(3 * j) += pj[j].transpose() * duv;
                    }
                }

                if (it.has3d) {
                    // L1 on 3D joint coordinates, in meters.
                    if (cfg.w_joints3d > 0.0) {
                        const double norm = cfg.w_joints3d / (3.0 * jn * 1000.0);
                        for (int j = 0; j < jn; ++j) {
                            for (int c = 0; c < 3; ++c) {
                                const double r = joints(j, c) - it.gt_joints3d(j, c);
                                loss_i += norm * std::abs(r);
                                djoints(3 * j + c) += norm * (r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0));
                            }
                        }
                    }
                    // L1 on rotation parameters and shape (not translation).
                    if (cfg.w_param > 0.0) {
                        const int ncomp = 3 + bp_dim + bn;
                        const double norm = cfg.w_param / ncomp;
                        auto l1 = [&](double pred, double gt, int pidx) {
                            const double r = pred - gt;
                            loss_i += norm * std::abs(r);
                            dparams(pidx) += norm * (r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0));
                        };
                        for (int c = 0; c < 3; ++c)
                            l1(pose.global_rot(c), it.gt_pose.global_rot(c), c);
                        for (int j = 0; j < jn - 1; ++j)
                            for (int c = 0; c < 3; ++c)
                                l1(pose.body_pose(j, c), it.gt_pose.body_pose(j, c),
                                   3 + 3 * j + c);
                        for (int b = 0; b < bn; ++b)
                            l1(beta.beta(b), it.gt_beta(b), 3 * jn + b);
                    }
                }

                // Parameter regularizer: latent + shape under the prior,
                // shape only for direct regression.
                if (cfg.w_reg > 0.0) {
                    if (net.use_prior) {
                        const double z2 = pose_out.row(i).squaredNorm();
                        loss_i += cfg.w_reg * z2;
                        d_pose_out.row(i) += 2.0 * cfg.w_reg * inv_n * pose_out.row(i);
                    }
                    loss_i += cfg.w_reg * beta.beta.squaredNorm();
                    dparams.segment(3 * jn, bn) += 2.0 * cfg.w_reg * beta.beta;
                }

                dparams += jac.joints.transpose() * djoints;
                batch_loss += loss_i;

                d_rot.row(i) += inv_n * dparams.segment<3>(0).transpose();
                d_bp.row(i) += inv_n * dparams.segment(3, bp_dim).transpose();
                d_shape.row(i) += inv_n * dparams.segment(3 * jn, bn).transpose();
                d_trans.row(i) +=
                    inv_n *
                    head_grad_from_translation(dparams.segment<3>(pdim - 3)).transpose();
            }
            batch_loss *= inv_n;

            if (!std::isfinite(batch_loss))
                throw TrainingDivergedError("non-finite training loss", global_step);

            if (net.use_prior) {
                d_pose_out += decode_backward(prior, dec_acts, d_bp);
            } else {
                d_pose_out += d_bp;
            }

            MlpGrads g_pose = pose_head.zero_grads();
            MlpGrads g_rot = net.global_rot_head.zero_grads();
            MlpGrads g_shape = net.shape_head.zero_grads();
            MlpGrads g_trans = net.trans_head.zero_grads();
            RowMat d_feat = pose_head.backward(pose_acts, d_pose_out, g_pose);
            d_feat += net.global_rot_head.backward(rot_acts, d_rot, g_rot);
            d_feat += net.shape_head.backward(shape_acts, d_shape, g_shape);
            d_feat += net.trans_head.backward(trans_acts, d_trans, g_trans);

            RowMat d_feat_pre(d_feat.rows(), d_feat.cols());
            kernels::tanh_backward(feat.data(), d_feat.data(), d_feat_pre.data(), d_feat.size());
            MlpGrads g_enc = net.encoder.zero_grads();
            net.encoder.backward(enc_acts.mlp_acts, d_feat_pre, g_enc);

            opt_enc.update(net.encoder, g_enc, lr);
            opt_pose.update(pose_head, g_pose, lr);
            opt_rot.update(net.global_rot_head, g_rot, lr);
            opt_shape.update(net.shape_head, g_shape, lr);
            opt_trans.update(net.trans_head, g_trans, lr);

            epoch_loss += batch_loss;
            ma_accum += batch_loss;
            if (++ma_count == 20) {
                if (log) log->step_loss.push_back(ma_accum / 20.0);
                ma_accum = 0.0;
                ma_count = 0;
            }
        }
        if (log) log->epoch_loss.push_back(epoch_loss / steps_per_epoch);
    }
    return net;
}

}  // namespace pseudopose
