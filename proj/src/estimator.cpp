#include "pseudopose/estimator.hpp"

#include <unordered_map>

#include "pseudopose/annotator.hpp"
#include "pseudopose/errors.hpp"

namespace pseudopose {

std::vector<TrainItem> itw_items_from_pseudo_gt(const std::vector<Sample>& itw2d,
                                                const std::vector<PseudoGTRecord>& records,
                                                const KinematicModel& model) {
    std::unordered_map<std::string, const PseudoGTRecord*> by_id;
    by_id.reserve(records.size());
    for (const auto& r : records) by_id[r.sample_id] = &r;

    std::vector<std::string> missing;
    std::vector<TrainItem> items;
    items.reserve(itw2d.size());
    for (const Sample& s : itw2d) {
        auto it = by_id.find(s.id);
        if (it == by_id.end()) {
            missing.push_back(s.id);
            continue;
        }
        const PseudoGTRecord& r = *it->second;
        TrainItem item;
        item.sample = s;
        item.has3d = true;
        item.gt_pose = model.zero_pose();
        item.gt_pose.global_rot = r.global_rot;
        if (r.body_pose.size() != 3 * (model.joint_count - 1))
            throw ShapeError("pseudo-GT for " + s.id + ": body_pose arity mismatch");
        for (int j = 0; j < model.joint_count - 1; ++j)
            for (int c = 0; c < 3; ++c) item.gt_pose.body_pose(j, c) = r.body_pose(3 * j + c);
        item.gt_pose.translation = r.translation;
        item.gt_beta = r.beta;
        item.gt_joints3d = fk_joints(model, item.gt_pose, ShapeParams{r.beta});
        items.push_back(std::move(item));
    }
    if (!missing.empty())
        throw JoinError("pseudo-GT join failed for " + std::to_string(missing.size()) +
                            " sample(s)",
                        missing);
    return items;
}

Network train_estimator(const std::vector<Sample>& mocap, const std::vector<Sample>& itw2d,
                        const std::vector<PseudoGTRecord>& pseudo_gts,
                        const PosePriorVAE& prior, const KinematicModel& model,
                        const TrainConfig& cfg, const Mlp& init_encoder,
                        const std::string& init_mode, bool use_prior, uint64_t seed,
                        TrainLog* log) {
    Network net = Network::create(model.joint_count, prior.latent_dim, model.shape_dim, seed);
    net.encoder = init_encoder;
    net.use_prior = use_prior;
    net.init_mode = init_mode;
    net.role = "estimator";
    const auto mocap_items = mocap_side_items(mocap, {}, false);
    const auto itw_items = itw_items_from_pseudo_gt(itw2d, pseudo_gts, model);
    return train_network(std::move(net), prior, model, mocap_items, itw_items, cfg, seed, log);
}

Network train_estimator_weak2d(const std::vector<Sample>& mocap,
                               const std::vector<Sample>& itw2d, const PosePriorVAE& prior,
                               const KinematicModel& model, const TrainConfig& cfg,
                               const Mlp& init_encoder, const std::string& init_mode,
                               bool use_prior, uint64_t seed, TrainLog* log) {
    Network net = Network::create(model.joint_count, prior.latent_dim, model.shape_dim, seed);
    net.encoder = init_encoder;
    net.use_prior = use_prior;
    net.init_mode = init_mode;
    net.role = "estimator";
    const auto mocap_items = mocap_side_items(mocap, {}, false);
    const auto itw_items = itw_side_items(itw2d);
    return train_network(std::move(net), prior, model, mocap_items, itw_items, cfg, seed, log);
}

Network finetune_variant(const Network& annotator, const std::vector<Sample>& mocap,
                         const std::vector<Sample>& itw2d,
                         const std::vector<PseudoGTRecord>& pseudo_gts,
                         const PosePriorVAE& prior, const KinematicModel& model,
                         const TrainConfig& cfg, uint64_t seed, TrainLog* log) {
    Network net = annotator;
    net.role = "estimator";
    const auto mocap_items = mocap_side_items(mocap, {}, false);
    const auto itw_items = itw_items_from_pseudo_gt(itw2d, pseudo_gts, model);
    if (cfg.epochs == 0) return net;
    return train_network(std::move(net), prior, model, mocap_items, itw_items, cfg, seed, log);
}

EvalResult evaluate(const Network& net, const PosePriorVAE& prior, const KinematicModel& model,
                    const std::vector<Sample>& test_set, double pck_threshold_mm) {
    EvalResult res;
    res.per_sample.reserve(test_set.size());
    double sum_pa = 0.0, sum_mpjpe = 0.0, sum_pck = 0.0;
    Eigen::Vector3d sum_axis = Eigen::Vector3d::Zero();
    std::vector<Eigen::MatrixXd> pred_poses;
    pred_poses.reserve(test_set.size());
    for (const Sample& s : test_set) {
        if (!s.gt3d) throw DataError("test sample " + s.id + " lacks 3D ground truth");
        const InferResult r = infer(net, prior, model, s);
        SampleError e;
        e.id = s.id;
        e.pa_mpjpe = pa_mpjpe(r.joints3d, s.gt3d->joints3d);
        const auto [mean, axis] = mpjpe_root_aligned(r.joints3d, s.gt3d->joints3d);
        e.mpjpe = mean;
        e.pck3d = pck3d(r.joints3d, s.gt3d->joints3d, pck_threshold_mm);
        sum_pa += e.pa_mpjpe;
        sum_mpjpe += e.mpjpe;
        sum_axis += axis;
        sum_pck += e.pck3d;
        pred_poses.push_back(r.pose.body_pose);
        res.per_sample.push_back(std::move(e));
    }
    const double n = static_cast<double>(test_set.size());
    if (test_set.empty()) throw DataError("empty test set");
    res.report.pa_mpjpe = sum_pa / n;
    res.report.mpjpe = sum_mpjpe / n;
    res.report.per_axis = sum_axis / n;
    res.report.pck3d = sum_pck / n;
    res.report.implausibility_rate = implausibility_rate(pred_poses, model.joint_limits);
    res.report.sample_count = test_set.size();
    return res;
}

}  // namespace pseudopose
