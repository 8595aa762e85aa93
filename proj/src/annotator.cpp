#include "pseudopose/annotator.hpp"

#include <cmath>

#include "pseudopose/errors.hpp"
#include "pseudopose/kernels.hpp"

namespace pseudopose {

namespace {

// k-means over flattened body poses; returns centroids (k x 45).
RowMat kmeans_centroids(const std::vector<Eigen::VectorXd>& points, int k, int iters, Rng& rng) {
    const int n = static_cast<int>(points.size());
    if (n < k) throw DataError("posecluster pretext: fewer poses than clusters");
    const int d = static_cast<int>(points[0].size());
    RowMat centroids(k, d);
    std::vector<size_t> pick(n);
    for (int i = 0; i < n; ++i) pick[i] = i;
    rng.shuffle(pick);
    for (int c = 0; c < k; ++c) centroids.row(c) = points[pick[c]].transpose();
    std::vector<int> assign(n, 0);
    for (int it = 0; it < iters; ++it) {
        for (int i = 0; i < n; ++i) {
            double best = 1e300;
            for (int c = 0; c < k; ++c) {
                const double dist = (points[i].transpose() - centroids.row(c)).squaredNorm();
                if (dist < best) {
                    best = dist;
                    assign[i] = c;
                }
            }
        }
        RowMat sum = RowMat::Zero(k, d);
        Eigen::VectorXd cnt = Eigen::VectorXd::Zero(k);
        for (int i = 0; i < n; ++i) {
            sum.row(assign[i]) += points[i].transpose();
            cnt(assign[i]) += 1.0;
        }
        for (int c = 0; c < k; ++c)
            if (cnt(c) > 0) centroids.row(c) = sum.row(c) / cnt(c);
    }
    return centroids;
}

int nearest_centroid(const Eigen::VectorXd& p, const RowMat& centroids) {
    int best_c = 0;
    double best = 1e300;
    for (int c = 0; c < centroids.rows(); ++c) {
        const double dist = (p.transpose() - centroids.row(c)).squaredNorm();
        if (dist < best) {
            best = dist;
            best_c = c;
        }
    }
    return best_c;
}

}  // namespace

Mlp pretrain_encoder(const std::vector<Sample>& samples, const std::string& pretext,
                     const KinematicModel& model, const PretrainConfig& cfg, uint64_t seed,
                     PretrainLog* log) {
    Rng rng(seed);
    Rng r_enc = rng.fork(1);
    Mlp encoder = Mlp::create({3 * model.joint_count, 256, 256, kFeatureDim}, r_enc);
    if (pretext == "none") return encoder;
    if (samples.empty()) throw DataError("pretraining requires a nonempty sample set");
    if (pretext != "denoise2d" && pretext != "posecluster")
        throw ConfigError("unknown pretext '" + pretext + "'");

    const int jn = model.joint_count;
    Rng r_head = rng.fork(2);
    Rng r_loop = rng.fork(3);

    std::vector<const Sample*> pool;
    RowMat centroids;
    std::vector<int> labels;
    if (pretext == "posecluster") {
        std::vector<Eigen::VectorXd> poses;
        for (const Sample& s : samples) {
            if (!s.gt3d) continue;
            Eigen::VectorXd p(3 * (jn - 1));
            for (int j = 0; j < jn - 1; ++j)
                for (int c = 0; c < 3; ++c) p(3 * j + c) = s.gt3d->pose.body_pose(j, c);
            pool.push_back(&s);
            poses.push_back(std::move(p));
        }
        if (pool.empty()) throw DataError("posecluster pretext needs 3D-carrying samples");
        Rng r_km = rng.fork(4);
        centroids = kmeans_centroids(poses, cfg.cluster_count, cfg.kmeans_iters, r_km);
        labels.resize(pool.size());
        for (size_t i = 0; i < pool.size(); ++i) labels[i] = nearest_centroid(poses[i], centroids);
    } else {
        for (const Sample& s : samples) pool.push_back(&s);
    }

    const int head_out = pretext == "denoise2d" ? 2 * jn : cfg.cluster_count;
    Mlp head = Mlp::create({kFeatureDim, head_out}, r_head, 0.01);
    Adam opt_enc = Adam::for_mlp(encoder);
    Adam opt_head = Adam::for_mlp(head);

    const int n = static_cast<int>(pool.size());
    std::vector<size_t> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    const int steps = (n + cfg.batch_size - 1) / cfg.batch_size;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        r_loop.shuffle(idx);
        double epoch_loss = 0.0;
        for (int step = 0; step < steps; ++step) {
            const int lo = step * cfg.batch_size;
            const int nb = std::min(cfg.batch_size, n - lo);
            RowMat x(nb, 3 * jn);
            for (int i = 0; i < nb; ++i)
                x.row(i) = sample_features(*pool[idx[lo + i]]).transpose();
            EncoderActs enc_acts;
            const RowMat feat = encode_features(encoder, x, &enc_acts);
            std::vector<RowMat> head_acts;
            const RowMat out = head.forward(feat, &head_acts);

            RowMat dout = RowMat::Zero(nb, head_out);
            double loss = 0.0;
            if (pretext == "denoise2d") {
                // MSE against the clean normalized keypoints, visible joints.
                for (int i = 0; i < nb; ++i) {
                    const Sample& s = *pool[idx[lo + i]];
                    int vis = 0;
                    for (int j = 0; j < jn; ++j) vis += s.gt_vis[j] ? 1 : 0;
                    if (vis == 0) continue;
                    const double norm = 1.0 / (2.0 * vis * nb);
                    for (int j = 0; j < jn; ++j) {
                        if (!s.gt_vis[j]) continue;
                        for (int c = 0; c < 2; ++c) {
                            const double target =
                                (s.gt_kp2d(j, c) - (c == 0 ? s.camera.cx : s.camera.cy)) /
                                kKpNormPx;
                            const double r = out(i, 2 * j + c) - target;
                            loss += norm * r * r;
                            dout(i, 2 * j + c) = 2.0 * norm * r;
                        }
                    }
                }
            } else {
                // Softmax cross-entropy on the cluster id.
                for (int i = 0; i < nb; ++i) {
                    const int label = labels[idx[lo + i]];
                    const double mx = out.row(i).maxCoeff();
                    Eigen::VectorXd p = (out.row(i).transpose().array() - mx).exp();
                    p /= p.sum();
                    loss += -std::log(std::max(p(label), 1e-300)) / nb;
                    dout.row(i) = p.transpose() / nb;
                    dout(i, label) -= 1.0 / nb;
                }
            }
            if (!std::isfinite(loss))
                throw TrainingDivergedError("non-finite pretext loss",
                                            static_cast<long>(epoch) * steps + step);

            MlpGrads g_head = head.zero_grads();
            RowMat d_feat = head.backward(head_acts, dout, g_head);
            RowMat d_feat_pre(d_feat.rows(), d_feat.cols());
            kernels::tanh_backward(feat.data(), d_feat.data(), d_feat_pre.data(), d_feat.size());
            MlpGrads g_enc = encoder.zero_grads();
            encoder.backward(enc_acts.mlp_acts, d_feat_pre, g_enc);
            opt_enc.update(encoder, g_enc, cfg.learning_rate);
            opt_head.update(head, g_head, cfg.learning_rate);
            epoch_loss += loss;
        }
        if (log) log->epoch_loss.push_back(epoch_loss / steps);
    }
    return encoder;
}

std::vector<TrainItem> mocap_side_items(const std::vector<Sample>& mocap,
                                        const std::vector<Sample>& bridge_or_empty,
                                        bool strip_bridge_3d) {
    std::vector<TrainItem> items;
    items.reserve(mocap.size() + bridge_or_empty.size());
    auto push3d = [&](const Sample& s, bool keep3d) {
        TrainItem it;
        it.sample = s;
        if (keep3d) {
            if (!s.gt3d) throw DataError("sample " + s.id + " lacks required 3D ground truth");
            it.has3d = true;
            it.gt_pose = s.gt3d->pose;
            it.gt_beta = s.gt3d->beta.beta;
            it.gt_joints3d = s.gt3d->joints3d;
        }
        items.push_back(std::move(it));
    };
    for (const Sample& s : mocap) push3d(s, true);
    // The bridge split is tiny next to mocap; replicate it to parity so the
    // 3D-supervised half of each batch draws evenly from both domains.
    if (!bridge_or_empty.empty()) {
        const int reps = std::max<int>(
            1, static_cast<int>(std::lround(static_cast<double>(mocap.size()) /
                                            static_cast<double>(bridge_or_empty.size()))));
        for (int r = 0; r < reps; ++r)
            for (const Sample& s : bridge_or_empty) push3d(s, !strip_bridge_3d);
    }
    return items;
}

std::vector<TrainItem> itw_side_items(const std::vector<Sample>& itw2d) {
    std::vector<TrainItem> items;
    items.reserve(itw2d.size());
    for (const Sample& s : itw2d) {
        TrainItem it;
        it.sample = s;
        it.has3d = false;
        items.push_back(std::move(it));
    }
    return items;
}

Network train_annotator(const std::vector<Sample>& mocap, const std::vector<Sample>& itw2d,
                        const std::vector<Sample>& bridge_or_empty, const PosePriorVAE& prior,
                        const KinematicModel& model, const TrainConfig& cfg,
                        const Mlp& init_encoder, const std::string& init_mode, bool use_prior,
                        bool strip_bridge_3d, uint64_t seed, TrainLog* log) {
    Network net = Network::create(model.joint_count, prior.latent_dim, model.shape_dim, seed);
    net.encoder = init_encoder;
    net.use_prior = use_prior;
    net.init_mode = init_mode;
    net.bridge_used = !bridge_or_empty.empty() && !strip_bridge_3d;
    net.role = "annotator";
    const auto mocap_items = mocap_side_items(mocap, bridge_or_empty, strip_bridge_3d);
    const auto itw_items = itw_side_items(itw2d);
    return train_network(std::move(net), prior, model, mocap_items, itw_items, cfg, seed, log);
}

std::vector<PseudoGTRecord> annotate(const Network& net, const PosePriorVAE& prior,
                                     const KinematicModel& model,
                                     const std::vector<Sample>& samples,
                                     const std::string& dataset_name,
                                     const std::string& producer_version) {
    std::vector<PseudoGTRecord> records;
    records.reserve(samples.size());
    for (const Sample& s : samples) {
        const InferResult r = infer(net, prior, model, s);
        PseudoGTRecord rec;
        rec.sample_id = s.id;
        rec.dataset = dataset_name;
        rec.global_rot = r.pose.global_rot;
        if (r.latent) rec.latent = *r.latent;
        rec.body_pose = Eigen::VectorXd(3 * (model.joint_count - 1));
        for (int j = 0; j < model.joint_count - 1; ++j)
            for (int c = 0; c < 3; ++c) rec.body_pose(3 * j + c) = r.pose.body_pose(j, c);
        rec.beta = r.beta.beta;
        rec.translation = r.pose.translation;
        rec.reproj_err_px = r.reproj_err_px;
        rec.producer = "annotator";
        rec.producer_version = producer_version;
        rec.seed = net.seed;
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace pseudopose
