#include <doctest.h>

#include <filesystem>

#include "pseudopose/errors.hpp"
#include "pseudopose/network.hpp"

using namespace pseudopose;

namespace {

const KinematicModel& model() {
    static KinematicModel m = make_synthetic_model(ModelSpec{}, 20211);
    return m;
}

const PosePriorVAE& prior() {
    static PosePriorVAE p = [] {
        const auto corpus = generate_pose_corpus(model(), 1200, 5);
        PriorTrainConfig cfg;
        cfg.epochs = 6;
        cfg.batch_size = 64;
        return train_prior(corpus, cfg, 9, 8);
    }();
    return p;
}

BenchmarkConfig small_cfg() {
    BenchmarkConfig cfg;
    cfg.mocap_size = 64;
    cfg.itw2d_size = 64;
    cfg.itw3d_size = 8;
    cfg.test_size = 16;
    return cfg;
}

std::vector<TrainItem> items_from(const std::vector<Sample>& samples) {
    std::vector<TrainItem> out;
    for (const auto& s : samples) {
        TrainItem it;
        it.sample = s;
        if (s.gt3d) {
            it.has3d = true;
            it.gt_pose = s.gt3d->pose;
            it.gt_beta = s.gt3d->beta.beta;
            it.gt_joints3d = s.gt3d->joints3d;
        }
        out.push_back(it);
    }
    return out;
}

}  // namespace

TEST_CASE("sample features are confidence-weighted normalized keypoints") {
    const auto samples = generate_split("mocap", 2, small_cfg(), model(), prior(), 3);
    const Sample& s = samples[0];
    const Eigen::VectorXd f = sample_features(s);
    REQUIRE(f.size() == 3 * model().joint_count);
    for (int j = 0; j < model().joint_count; ++j) {
        const double conf = s.observed_conf(j);
        const double xn = (s.observed_kp(j, 0) - s.camera.cx) / kKpNormPx;
        const double yn = (s.observed_kp(j, 1) - s.camera.cy) / kKpNormPx;
        CHECK(f(3 * j + 0) == doctest::Approx(xn * conf).epsilon(1e-12));
        CHECK(f(3 * j + 1) == doctest::Approx(yn * conf).epsilon(1e-12));
        CHECK(f(3 * j + 2) == doctest::Approx(conf).epsilon(1e-12));
    }
}

TEST_CASE("network creation is deterministic and inference is sane") {
    Network a = Network::create(model().joint_count, prior().latent_dim, model().shape_dim, 99);
    Network b = Network::create(model().joint_count, prior().latent_dim, model().shape_dim, 99);
    for (size_t l = 0; l < a.encoder.layers.size(); ++l)
        CHECK((a.encoder.layers[l].w - b.encoder.layers[l].w).cwiseAbs().maxCoeff() == 0.0);

    const auto samples = generate_split("test", 3, small_cfg(), model(), prior(), 3);
    for (const auto& s : samples) {
        const InferResult r = infer(a, prior(), model(), s);
        REQUIRE(r.latent.has_value());
        CHECK(r.latent->size() == prior().latent_dim);
        CHECK(r.joints3d.rows() == model().joint_count);
        // Small-head init keeps the translation near the canonical depth, so
        // the skeleton must be in front of the camera.
        CHECK(r.pose.translation(2) > 1000.0);
        CHECK(std::isfinite(r.reproj_err_px));
        // body pose must equal the decoded latent.
        const Eigen::MatrixXd dec = decode(prior(), LatentCode{*r.latent});
        CHECK((r.pose.body_pose - dec).cwiseAbs().maxCoeff() < 1e-12);
    }

    a.use_prior = false;
    const InferResult direct = infer(a, prior(), model(), samples[0]);
    CHECK(!direct.latent.has_value());
}

TEST_CASE("network save/load round-trips weights and flags") {
    Network a = Network::create(model().joint_count, prior().latent_dim, model().shape_dim, 7);
    a.use_prior = false;
    a.init_mode = "denoise2d";
    a.bridge_used = true;
    a.role = "estimator";
    a.config_hash = "deadbeef";
    const std::string path =
        (std::filesystem::temp_directory_path() / "pp_net_test.json").string();
    a.save(path);
    const Network back = Network::load(path);
    CHECK(back.use_prior == false);
    CHECK(back.init_mode == "denoise2d");
    CHECK(back.bridge_used == true);
    CHECK(back.role == "estimator");
    CHECK(back.config_hash == "deadbeef");
    for (size_t l = 0; l < a.encoder.layers.size(); ++l)
        CHECK((back.encoder.layers[l].w - a.encoder.layers[l].w).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.trans_head.layers[0].w - a.trans_head.layers[0].w).cwiseAbs().maxCoeff() ==
          0.0);
    std::filesystem::remove(path);
}

TEST_CASE("flip augmentation keeps 2d and 3d consistent") {
    const auto samples = generate_split("mocap", 8, small_cfg(), model(), prior(), 3);
    const auto items = items_from(samples);
    TrainConfig cfg;
    cfg.aug_flip_prob = 1.0;       // force the flip
    cfg.aug_rot_deg = 0.0;         // disable the other draws
    cfg.aug_scale = 0.0;
    for (const auto& item : items) {
        Rng rng(77);
        const TrainItem aug = augment_item(item, model(), cfg, rng);
        // 2D: mirrored about the vertical center line, joints relabeled.
        const auto& perm = mirror_joint_permutation();
        for (int j = 0; j < model().joint_count; ++j) {
            const double mx = 2 * item.sample.camera.cx - item.sample.observed_kp(j, 0);
            CHECK(aug.sample.observed_kp(perm[j], 0) == doctest::Approx(mx).epsilon(1e-9));
            CHECK(aug.sample.observed_kp(perm[j], 1) ==
                  doctest::Approx(item.sample.observed_kp(j, 1)).epsilon(1e-9));
            CHECK(aug.sample.observed_conf(perm[j]) ==
                  doctest::Approx(item.sample.observed_conf(j)).epsilon(1e-12));
        }
        // 3D targets stay consistent: FK of the augmented pose equals the
        // augmented joint targets, and those reproject onto the flipped 2D gt.
        REQUIRE(aug.has3d);
        const Eigen::MatrixXd j3 = fk_joints(model(), aug.gt_pose, ShapeParams{aug.gt_beta});
        CHECK((j3 - aug.gt_joints3d).cwiseAbs().maxCoeff() < 1e-6);
        const Eigen::MatrixXd uv = project(aug.gt_joints3d, aug.sample.camera);
        CHECK((uv - aug.sample.gt_kp2d).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("rotation and scale augmentation keep reprojection consistent") {
    const auto samples = generate_split("mocap", 8, small_cfg(), model(), prior(), 3);
    const auto items = items_from(samples);
    TrainConfig cfg;
    cfg.aug_flip_prob = 0.0;
    cfg.aug_rot_deg = 30.0;
    cfg.aug_scale = 0.25;
    for (uint64_t seed = 1; seed <= 4; ++seed)
        for (const auto& item : items) {
            Rng rng(seed);
            const TrainItem aug = augment_item(item, model(), cfg, rng);
            const Eigen::MatrixXd j3 =
                fk_joints(model(), aug.gt_pose, ShapeParams{aug.gt_beta});
            CHECK((j3 - aug.gt_joints3d).cwiseAbs().maxCoeff() < 1e-6);
            const Eigen::MatrixXd uv = project(aug.gt_joints3d, aug.sample.camera);
            CHECK((uv - aug.sample.gt_kp2d).cwiseAbs().maxCoeff() < 1e-6);
        }
}

TEST_CASE("augmentation is a pure function of the rng stream") {
    const auto samples = generate_split("mocap", 1, small_cfg(), model(), prior(), 3);
    const auto items = items_from(samples);
    TrainConfig cfg;
    Rng a(5), b(5);
    const TrainItem x = augment_item(items[0], model(), cfg, a);
    const TrainItem y = augment_item(items[0], model(), cfg, b);
    CHECK((x.sample.observed_kp - y.sample.observed_kp).cwiseAbs().maxCoeff() == 0.0);
    CHECK((x.gt_joints3d - y.gt_joints3d).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("short training run decreases the loss and is deterministic") {
    const BenchmarkConfig bcfg = small_cfg();
    const auto mocap = generate_split("mocap", 64, bcfg, model(), prior(), 3);
    const auto itw = generate_split("itw2d", 64, bcfg, model(), prior(), 3);
    const auto mocap_items = items_from(mocap);
    const auto itw_items = items_from(itw);

    TrainConfig cfg;
    cfg.batch_size = 32;
    cfg.epochs = 3;
    cfg.lr_drop_epochs = {};
    cfg.learning_rate = 1e-3;

    Network init =
        Network::create(model().joint_count, prior().latent_dim, model().shape_dim, 11);
    TrainLog log1, log2;
    const Network t1 =
        train_network(init, prior(), model(), mocap_items, itw_items, cfg, 13, &log1);
    const Network t2 =
        train_network(init, prior(), model(), mocap_items, itw_items, cfg, 13, &log2);
    REQUIRE((int)log1.epoch_loss.size() == cfg.epochs);
    CHECK(log1.epoch_loss.back() < log1.epoch_loss.front());
    CHECK(log1.diverged_step == -1);
    // Bitwise deterministic.
    CHECK(log1.epoch_loss == log2.epoch_loss);
    for (size_t l = 0; l < t1.encoder.layers.size(); ++l)
        CHECK((t1.encoder.layers[l].w - t2.encoder.layers[l].w).cwiseAbs().maxCoeff() == 0.0);
    // A different seed gives different weights.
    const Network t3 = train_network(init, prior(), model(), mocap_items, itw_items, cfg, 14);
    CHECK((t1.encoder.layers[0].w - t3.encoder.layers[0].w).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("training rejects odd batch sizes and empty pools") {
    const auto mocap = generate_split("mocap", 4, small_cfg(), model(), prior(), 3);
    const auto items = items_from(mocap);
    Network net =
        Network::create(model().joint_count, prior().latent_dim, model().shape_dim, 11);
    TrainConfig cfg;
    cfg.batch_size = 33;
    CHECK_THROWS_AS(train_network(net, prior(), model(), items, items, cfg, 1), ConfigError);
    cfg.batch_size = 32;
    CHECK_THROWS_AS(train_network(net, prior(), model(), {}, items, cfg, 1), ConfigError);
    CHECK_THROWS_AS(train_network(net, prior(), model(), items, {}, cfg, 1), ConfigError);
}
