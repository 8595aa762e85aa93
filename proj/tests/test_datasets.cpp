#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "pseudopose/datasets.hpp"
#include "pseudopose/errors.hpp"
#include "pseudopose/metrics.hpp"

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
    cfg.mocap_size = 40;
    cfg.itw2d_size = 40;
    cfg.itw3d_size = 10;
    cfg.test_size = 20;
    return cfg;
}

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("splits have the right sizes, domains and 3d presence") {
    const BenchmarkConfig cfg = small_cfg();
    const auto mocap = generate_split("mocap", cfg.mocap_size, cfg, model(), prior(), 3);
    const auto itw2d = generate_split("itw2d", cfg.itw2d_size, cfg, model(), prior(), 3);
    const auto test = generate_split("test", cfg.test_size, cfg, model(), prior(), 3);
    REQUIRE((int)mocap.size() == 40);
    REQUIRE((int)itw2d.size() == 40);
    REQUIRE((int)test.size() == 20);
    std::set<std::string> ids;
    for (const auto& s : mocap) {
        CHECK(s.domain == "mocap");
        CHECK(s.gt3d.has_value());
        CHECK(s.observed_kp.rows() == model().joint_count);
        CHECK(ids.insert(s.id).second);
        CHECK(s.observed_conf.minCoeff() >= 0.0);
        CHECK(s.observed_conf.maxCoeff() <= 1.0);
    }
    for (const auto& s : itw2d) {
        CHECK(s.domain == "itw2d");
        CHECK(!s.gt3d.has_value());  // structurally 2D-only
    }
    for (const auto& s : test) {
        REQUIRE(s.gt3d.has_value());
        // gt joints must reproject onto the clean 2D annotations.
        const Eigen::MatrixXd uv = project(s.gt3d->joints3d, s.camera);
        CHECK((uv - s.gt_kp2d).cwiseAbs().maxCoeff() < 1e-9);
        // And match forward kinematics of the stored parameters.
        const Eigen::MatrixXd j = fk_joints(model(), s.gt3d->pose, s.gt3d->beta);
        CHECK((j - s.gt3d->joints3d).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("generation is deterministic in the seed and sensitive to it") {
    const BenchmarkConfig cfg = small_cfg();
    const auto a = generate_split("mocap", 15, cfg, model(), prior(), 3);
    const auto b = generate_split("mocap", 15, cfg, model(), prior(), 3);
    const auto c = generate_split("mocap", 15, cfg, model(), prior(), 4);
    for (int i = 0; i < 15; ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK((a[i].observed_kp - b[i].observed_kp).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a[i].gt3d->joints3d - b[i].gt3d->joints3d).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK((a[0].observed_kp - c[0].observed_kp).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("itw occlusion and noise are materially harsher than mocap") {
    BenchmarkConfig cfg = small_cfg();
    cfg.mocap_size = cfg.itw2d_size = 400;
    const auto mocap = generate_split("mocap", 400, cfg, model(), prior(), 3);
    const auto itw = generate_split("itw2d", 400, cfg, model(), prior(), 3);
    auto occluded_frac = [&](const std::vector<Sample>& v) {
        long occ = 0, tot = 0;
        for (const auto& s : v)
            for (int j = 0; j < model().joint_count; ++j, ++tot)
                if (s.observed_conf(j) == 0.0) ++occ;
        return double(occ) / tot;
    };
    const double m_occ = occluded_frac(mocap);
    const double i_occ = occluded_frac(itw);
    CHECK(m_occ == 0.0);
    // Binomial(6400, 0.15): a +-4 sigma band.
    CHECK(i_occ > 0.15 - 4 * std::sqrt(0.15 * 0.85 / 6400));
    CHECK(i_occ < 0.15 + 4 * std::sqrt(0.15 * 0.85 / 6400));

    auto mean_noise = [&](const std::vector<Sample>& v) {
        double acc = 0;
        long n = 0;
        for (const auto& s : v)
            for (int j = 0; j < model().joint_count; ++j)
                if (s.observed_conf(j) > 0) {
                    acc += (s.observed_kp.row(j) - s.gt_kp2d.row(j)).norm();
                    ++n;
                }
        return acc / n;
    };
    CHECK(mean_noise(itw) > 1.5 * mean_noise(mocap));
}

TEST_CASE("sample jsonl round-trip is exact and enforces the 3d asymmetry") {
    const BenchmarkConfig cfg = small_cfg();
    const auto mocap = generate_split("mocap", 6, cfg, model(), prior(), 3);
    const auto itw = generate_split("itw2d", 6, cfg, model(), prior(), 3);
    std::vector<Sample> all = mocap;
    all.insert(all.end(), itw.begin(), itw.end());
    const std::string path = tmp_path("pp_samples_test.jsonl");
    write_samples(path, all);
    const auto back = read_samples(path);
    REQUIRE(back.size() == all.size());
    for (size_t i = 0; i < all.size(); ++i) {
        CHECK(back[i].id == all[i].id);
        CHECK((back[i].observed_kp - all[i].observed_kp).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back[i].gt_kp2d - all[i].gt_kp2d).cwiseAbs().maxCoeff() == 0.0);
        CHECK(back[i].gt_vis == all[i].gt_vis);
        CHECK(back[i].gt3d.has_value() == all[i].gt3d.has_value());
        if (all[i].gt3d)
            CHECK((back[i].gt3d->joints3d - all[i].gt3d->joints3d).cwiseAbs().maxCoeff() ==
                  0.0);
    }
    // Byte-identical rewrite.
    const std::string path2 = tmp_path("pp_samples_test2.jsonl");
    write_samples(path2, back);
    std::ifstream f1(path), f2(path2);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("generate_benchmark writes all four splits") {
    const std::string dir = tmp_path("pp_bench_test");
    std::filesystem::remove_all(dir);
    const BenchmarkFiles files =
        generate_benchmark(small_cfg(), model(), prior(), 3, dir);
    CHECK(read_samples(files.mocap).size() == 40);
    CHECK(read_samples(files.itw2d).size() == 40);
    CHECK(read_samples(files.itw3d).size() == 10);
    CHECK(read_samples(files.test).size() == 20);
    std::filesystem::remove_all(dir);
}

TEST_CASE("itw2d multiplier scales only the 2d split") {
    BenchmarkConfig cfg = small_cfg();
    cfg.itw2d_multiplier = 3;
    const std::string dir = tmp_path("pp_bench_mult_test");
    std::filesystem::remove_all(dir);
    const BenchmarkFiles files = generate_benchmark(cfg, model(), prior(), 3, dir);
    CHECK(read_samples(files.itw2d).size() == 120);
    CHECK(read_samples(files.mocap).size() == 40);
    std::filesystem::remove_all(dir);
}

TEST_CASE("coco ingestion maps 17 keypoints onto the model joints") {
    const CocoJointMap map = default_coco_joint_map();
    REQUIRE((int)map.size() == model().joint_count);
    for (const auto& entries : map) {
        CHECK(!entries.empty());
        double wsum = 0;
        for (const auto& [idx, w] : entries) {
            CHECK(idx >= 0);
            CHECK(idx < 17);
            CHECK(w > 0);
            wsum += w;
        }
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-9));
    }

    // Minimal fixture: one image, one annotation, all keypoints at v=2 except
    // one occluded.
    const std::string path = tmp_path("pp_coco_fixture.json");
    {
        nlohmann::json kps = nlohmann::json::array();
        for (int i = 0; i < 17; ++i) {
            kps.push_back(100.0 + 10 * i);
            kps.push_back(200.0 + 5 * i);
            kps.push_back(i == 3 ? 0 : 2);
        }
        nlohmann::json doc{
            {"images", {{{"id", 1}, {"width", 512}, {"height", 512}}}},
            {"annotations",
             {{{"id", 77}, {"image_id", 1}, {"keypoints", kps}, {"num_keypoints", 16}}}}};
        std::ofstream(path) << doc.dump();
    }
    const auto samples = ingest_coco_keypoints(path, map);
    REQUIRE(samples.size() == 1);
    const Sample& s = samples[0];
    CHECK(s.domain == "coco");
    CHECK(!s.gt3d.has_value());
    CHECK(s.observed_kp.rows() == model().joint_count);
    CHECK(s.observed_conf.maxCoeff() > 0.0);

    // Malformed keypoint arity names the annotation.
    {
        nlohmann::json doc{
            {"images", {{{"id", 1}, {"width", 512}, {"height", 512}}}},
            {"annotations",
             {{{"id", 78}, {"image_id", 1}, {"keypoints", {1.0, 2.0, 2.0}},
               {"num_keypoints", 1}}}}};
        std::ofstream(path) << doc.dump();
    }
    try {
        ingest_coco_keypoints(path, map);
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("78") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("pseudo-gt round-trip, integrity check and reprojection error") {
    const BenchmarkConfig cfg = small_cfg();
    const auto samples = generate_split("mocap", 3, cfg, model(), prior(), 3);
    std::vector<PseudoGTRecord> records;
    for (const auto& s : samples) {
        PseudoGTRecord r;
        r.sample_id = s.id;
        r.dataset = "mocap";
        r.global_rot = s.gt3d->pose.global_rot;
        r.latent = Eigen::VectorXd::Zero(prior().latent_dim);
        const Eigen::MatrixXd dec = decode(prior(), LatentCode{r.latent});
        r.body_pose.resize(dec.size());
        for (int j = 0; j < dec.rows(); ++j)
            for (int c = 0; c < 3; ++c) r.body_pose(3 * j + c) = dec(j, c);
        r.beta = s.gt3d->beta.beta;
        r.translation = s.gt3d->pose.translation;
        r.producer = "annotator";
        r.producer_version = "test-v1";
        r.seed = 7;
        r.reproj_err_px = reprojection_error_px(r, s, model());
        CHECK(std::isfinite(r.reproj_err_px));
        records.push_back(r);
    }
    const std::string path = tmp_path("pp_pgt_test.jsonl");
    write_pseudo_gt(path, records);
    const auto back = read_pseudo_gt(path, &prior());
    REQUIRE(back.size() == records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        CHECK(back[i].sample_id == records[i].sample_id);
        CHECK((back[i].body_pose - records[i].body_pose).cwiseAbs().maxCoeff() == 0.0);
        CHECK(back[i].reproj_err_px == records[i].reproj_err_px);
    }

    // Corrupting the stored pose against the latent trips the decoder check.
    auto corrupted = records;
    corrupted[0].body_pose(0) += 1e-3;
    write_pseudo_gt(path, corrupted);
    CHECK_THROWS_AS(read_pseudo_gt(path, &prior()), IntegrityError);
    // Without a prior the same file loads fine.
    CHECK_NOTHROW(read_pseudo_gt(path));
    std::filesystem::remove(path);
}

TEST_CASE("reprojection error requires at least one visible joint") {
    const BenchmarkConfig cfg = small_cfg();
    auto samples = generate_split("mocap", 1, cfg, model(), prior(), 3);
    Sample s = samples[0];
    s.observed_conf.setZero();
    PseudoGTRecord r;
    r.sample_id = s.id;
    r.dataset = "mocap";
    r.global_rot = s.gt3d->pose.global_rot;
    r.latent = Eigen::VectorXd::Zero(prior().latent_dim);
    r.body_pose = Eigen::VectorXd::Zero(3 * (model().joint_count - 1));
    r.beta = s.gt3d->beta.beta;
    r.translation = s.gt3d->pose.translation;
    CHECK_THROWS_AS(reprojection_error_px(r, s, model()), DataError);
}
