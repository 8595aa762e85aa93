#include "pseudopose/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "pseudopose/errors.hpp"
#include "pseudopose/jsonio.hpp"
#include "pseudopose/rng.hpp"

namespace pseudopose {

using namespace jsonio;

namespace {

json sample_to_json(const Sample& s) {
    json j;
    j["id"] = s.id;
    j["domain"] = s.domain;
    j["observed_kp"] = matrix_to_json(s.observed_kp);
    j["observed_conf"] = vector_to_json(s.observed_conf);
    j["gt_kp2d"] = matrix_to_json(s.gt_kp2d);
    json vis = json::array();
    for (bool v : s.gt_vis) vis.push_back(v);
    j["gt_vis"] = vis;
    j["camera"] = s.camera.to_json();
    if (s.gt3d) {
        json g;
        g["global_rot"] = vector_to_json(s.gt3d->pose.global_rot);
        g["body_pose"] = matrix_to_json(s.gt3d->pose.body_pose);
        g["translation"] = vector_to_json(s.gt3d->pose.translation);
        g["beta"] = vector_to_json(s.gt3d->beta.beta);
        g["joints3d"] = matrix_to_json(s.gt3d->joints3d);
        j["gt3d"] = g;
    }
    return j;
}

Sample sample_from_json(const json& j) {
    static const std::vector<std::string> allowed = {"id",      "domain",  "observed_kp",
                                                     "observed_conf", "gt_kp2d", "gt_vis",
                                                     "camera",  "gt3d"};
    reject_unknown_keys(j, allowed, "sample");
    Sample s;
    s.id = require(j, "id", "sample").get<std::string>();
    s.domain = require(j, "domain", "sample").get<std::string>();
    if (s.domain != "mocap" && s.domain != "itw2d" && s.domain != "itw3d" &&
        s.domain != "test" && s.domain != "coco") {
        throw DataError("sample " + s.id + ": unknown domain '" + s.domain + "'");
    }
    const json& kp = require(j, "observed_kp", "sample " + s.id);
    const int joints = static_cast<int>(kp.size()) / 2;
    s.observed_kp = matrix_from_json(kp, joints, 2);
    s.observed_conf = vector_from_json(require(j, "observed_conf", "sample " + s.id));
    if (s.observed_conf.size() != joints)
        throw ShapeError("sample " + s.id + ": observed_conf size mismatch");
    s.gt_kp2d = matrix_from_json(require(j, "gt_kp2d", "sample " + s.id), joints, 2);
    for (const auto& v : require(j, "gt_vis", "sample " + s.id)) s.gt_vis.push_back(v.get<bool>());
    if (static_cast<int>(s.gt_vis.size()) != joints)
        throw ShapeError("sample " + s.id + ": gt_vis size mismatch");
    s.camera = Camera::from_json(require(j, "camera", "sample " + s.id));
    if (j.contains("gt3d")) {
        if (s.domain == "itw2d" || s.domain == "coco") {
            throw DataError("sample " + s.id + ": domain '" + s.domain +
                            "' must not carry 3D ground truth");
        }
        const json& g = j.at("gt3d");
        Gt3d gt;
        gt.pose.global_rot = Eigen::Vector3d(vector_from_json(require(g, "global_rot", "gt3d")));
        const json& bp = require(g, "body_pose", "gt3d");
        gt.pose.body_pose = matrix_from_json(bp, static_cast<int>(bp.size()) / 3, 3);
        gt.pose.translation = Eigen::Vector3d(vector_from_json(require(g, "translation", "gt3d")));
        gt.beta.beta = vector_from_json(require(g, "beta", "gt3d"));
        gt.joints3d = matrix_from_json(require(g, "joints3d", "gt3d"), joints, 3);
        s.gt3d = gt;
    } else if (s.domain == "mocap" || s.domain == "itw3d" || s.domain == "test") {
        throw DataError("sample " + s.id + ": domain '" + s.domain + "' requires gt3d");
    }
    return s;
}

// Per-(domain, joint) systematic 2D offset, drawn once per generation run.
// Mimics a dataset-specific annotation convention shift.
Eigen::MatrixXd make_bias_field(int joints, double mag_px, Rng& rng) {
    Eigen::MatrixXd bias(joints, 2);
    for (int i = 0; i < joints; ++i)
        for (int c = 0; c < 2; ++c) bias(i, c) = mag_px * rng.normal();
    return bias;
}

PoseParams draw_pose(const BenchmarkConfig& cfg, const KinematicModel& model,
                     const PosePriorVAE& prior, bool studio, Rng& rng) {
    PoseParams pose = model.zero_pose();
    const double mean = studio ? cfg.mocap_latent_mean : 0.0;
    const double std = studio ? cfg.mocap_latent_std : cfg.itw_latent_std;
    Eigen::VectorXd z(prior.latent_dim);
    for (int i = 0; i < prior.latent_dim; ++i) z(i) = mean + std * rng.normal();
    const Eigen::MatrixXd bp = decode(prior, LatentCode{z});
    // Decoded poses can mildly exceed joint limits; clamp to keep the
    // benchmark's ground truth plausible by construction.
    for (int jj = 1; jj < model.joint_count; ++jj) {
        const JointLimits& lim = model.joint_limits[jj - 1];
        for (int c = 0; c < 3; ++c)
            pose.body_pose(jj - 1, c) = std::clamp(bp(jj - 1, c), lim.lo(c), lim.hi(c));
    }
    const double yaw = studio ? rng.uniform(-M_PI, M_PI) : cfg.itw_yaw_std * rng.normal();
    const double ex = cfg.small_tilt_std * rng.normal();
    const double ez = cfg.small_tilt_std * rng.normal();
    Eigen::Matrix3d r = rodrigues(Eigen::Vector3d(0, 0, ez)) *
                        rodrigues(Eigen::Vector3d(0, yaw, 0)) *
                        rodrigues(Eigen::Vector3d(ex, 0, 0));
    pose.global_rot = rotation_log(r);
    pose.translation = Eigen::Vector3d(rng.uniform(-cfg.xy_range_mm, cfg.xy_range_mm),
                                       rng.uniform(-cfg.xy_range_mm, cfg.xy_range_mm),
                                       rng.uniform(cfg.depth_min_mm, cfg.depth_max_mm));
    return pose;
}

}  // namespace

std::vector<Sample> generate_split(const std::string& domain, int count,
                                   const BenchmarkConfig& cfg, const KinematicModel& model,
                                   const PosePriorVAE& prior, uint64_t seed) {
    const int jn = model.joint_count;
    // Domains sharing an acquisition setup share a bias field: the studio
    // (mocap) field differs from the in-the-wild one (itw2d/itw3d/test).
    Rng bias_rng = Rng(seed).fork(domain == "mocap" ? 101 : 102);
    const bool studio = (domain == "mocap");
    const NoiseModel& nm = studio ? cfg.mocap_noise : cfg.itw_noise;
    const Eigen::MatrixXd bias = make_bias_field(jn, nm.bias_mag_px, bias_rng);

    uint64_t domain_tag = 0;
    for (char c : domain) domain_tag = domain_tag * 131 + static_cast<unsigned char>(c);
    Rng domain_rng = Rng(seed).fork(domain_tag);

    std::vector<Sample> samples;
    samples.reserve(count);
    for (int i = 0; i < count; ++i) {
        Rng rng = domain_rng.fork(static_cast<uint64_t>(i));
        Sample s;
        s.id = domain + "-" + std::to_string(i);
        s.domain = domain;
        s.camera = cfg.camera;

        PoseParams pose;
        ShapeParams beta;
        Eigen::MatrixXd joints3d;
        Eigen::MatrixXd kp2d;
        // Behind-camera configurations are resampled; with depth >= 4m and the
        // body scale ~1.7m this loop terminates almost immediately.
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 64)
                throw NumericError("benchmark generation: could not place sample " + s.id +
                                   " in front of the camera");
            pose = draw_pose(cfg, model, prior, studio, rng);
            beta.beta = Eigen::VectorXd(model.shape_dim);
            for (int b = 0; b < model.shape_dim; ++b)
                beta.beta(b) = rng.uniform(-cfg.beta_range, cfg.beta_range);
            joints3d = fk_joints(model, pose, beta);
            try {
                kp2d = project(joints3d, s.camera);
            } catch (const BehindCameraError&) {
                continue;
            }
            break;
        }

        s.gt_kp2d = kp2d;
        s.observed_kp = kp2d;
        s.observed_conf = Eigen::VectorXd::Ones(jn);
        s.gt_vis.assign(jn, true);
        for (int jj = 0; jj < jn; ++jj) {
            if (rng.uniform() < nm.occlusion_prob) {
                s.gt_vis[jj] = false;
                s.observed_conf(jj) = 0.0;
                s.observed_kp.row(jj).setZero();
                continue;
            }
            double sigma = nm.sigma_px;
            if (nm.outlier_prob > 0.0 && rng.uniform() < nm.outlier_prob)
                sigma = nm.outlier_sigma_px;
            for (int c = 0; c < 2; ++c)
                s.observed_kp(jj, c) += bias(jj, c) + sigma * rng.normal();
            s.observed_conf(jj) = std::clamp(1.0 - sigma / 60.0 + 0.05 * rng.normal(), 0.05, 1.0);
        }

        if (domain != "itw2d") {
            Gt3d gt;
            gt.pose = pose;
            gt.beta = beta;
            gt.joints3d = joints3d;
            s.gt3d = gt;
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

BenchmarkFiles generate_benchmark(const BenchmarkConfig& cfg, const KinematicModel& model,
                                  const PosePriorVAE& prior, uint64_t seed,
                                  const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    BenchmarkFiles files;
    files.mocap = out_dir + "/mocap.jsonl";
    files.itw2d = out_dir + "/itw2d.jsonl";
    files.itw3d = out_dir + "/itw3d.jsonl";
    files.test = out_dir + "/test.jsonl";
    write_samples(files.mocap, generate_split("mocap", cfg.mocap_size, cfg, model, prior, seed));
    write_samples(files.itw2d, generate_split("itw2d", cfg.itw2d_size * cfg.itw2d_multiplier, cfg,
                                              model, prior, seed));
    write_samples(files.itw3d, generate_split("itw3d", cfg.itw3d_size, cfg, model, prior, seed));
    write_samples(files.test, generate_split("test", cfg.test_size, cfg, model, prior, seed));
    return files;
}

void write_samples(const std::string& path, const std::vector<Sample>& samples) {
    std::vector<json> lines;
    lines.reserve(samples.size());
    for (const auto& s : samples) lines.push_back(sample_to_json(s));
    write_jsonl(path, lines);
}

std::vector<Sample> read_samples(const std::string& path) {
    std::vector<Sample> samples;
    for (const auto& j : read_jsonl(path)) samples.push_back(sample_from_json(j));
    return samples;
}

CocoJointMap default_coco_joint_map() {
    // COCO order: 0 nose, 1/2 eyes, 3/4 ears, 5/6 shoulders, 7/8 elbows,
    // 9/10 wrists, 11/12 hips, 13/14 knees, 15/16 ankles.
    CocoJointMap m(16);
    m[0] = {{11, 0.5}, {12, 0.5}};                              // pelvis = mid-hip
    m[1] = {{11, 0.335}, {12, 0.335}, {5, 0.165}, {6, 0.165}};  // spine at 0.33 pelvis->neck
    m[2] = {{11, 0.165}, {12, 0.165}, {5, 0.335}, {6, 0.335}};  // chest at 0.67
    m[3] = {{0, 1.0}};                                          // head = nose
    m[4] = {{5, 1.0}};
    m[5] = {{7, 1.0}};
    m[6] = {{9, 1.0}};
    m[7] = {{6, 1.0}};
    m[8] = {{8, 1.0}};
    m[9] = {{10, 1.0}};
    m[10] = {{11, 1.0}};
    m[11] = {{13, 1.0}};
    m[12] = {{15, 1.0}};
    m[13] = {{12, 1.0}};
    m[14] = {{14, 1.0}};
    m[15] = {{16, 1.0}};
    return m;
}

std::vector<Sample> ingest_coco_keypoints(const std::string& path,
                                          const CocoJointMap& joint_map) {
    const json root = read_file(path);
    if (!root.contains("annotations") || !root.at("annotations").is_array())
        throw FormatError("coco file " + path + ": missing 'annotations' array");
    const int jn = static_cast<int>(joint_map.size());
    std::vector<Sample> out;
    for (const auto& ann : root.at("annotations")) {
        const std::string ann_id =
            ann.contains("id") ? ann.at("id").dump() : std::string("<no id>");
        const json& kps = require(ann, "keypoints", "coco annotation " + ann_id);
        if (kps.size() != 51)
            throw FormatError("coco annotation " + ann_id + ": expected 51 keypoint numbers, got " +
                              std::to_string(kps.size()));
        Eigen::MatrixXd coco(17, 2);
        Eigen::VectorXd vflag(17);
        for (int i = 0; i < 17; ++i) {
            coco(i, 0) = kps.at(3 * i).get<double>();
            coco(i, 1) = kps.at(3 * i + 1).get<double>();
            vflag(i) = kps.at(3 * i + 2).get<double>();
        }
        Sample s;
        s.id = "coco-" + ann_id;
        s.domain = "coco";
        s.observed_kp = Eigen::MatrixXd::Zero(jn, 2);
        s.observed_conf = Eigen::VectorXd::Zero(jn);
        for (int jj = 0; jj < jn; ++jj) {
            double wsum = 0.0;
            bool all_labeled = !joint_map[jj].empty();
            Eigen::Vector2d p = Eigen::Vector2d::Zero();
            for (const auto& [src, w] : joint_map[jj]) {
                if (src < 0 || src >= 17)
                    throw ConfigError("coco joint map: source index out of range");
                if (vflag(src) == 0.0) all_labeled = false;
                p += w * coco.row(src).transpose();
                wsum += w;
            }
            if (all_labeled && wsum > 0.0) {
                s.observed_kp.row(jj) = (p / wsum).transpose();
                s.observed_conf(jj) = 1.0;
            }
        }
        s.gt_kp2d = s.observed_kp;
        s.gt_vis.assign(jn, false);
        for (int jj = 0; jj < jn; ++jj) s.gt_vis[jj] = s.observed_conf(jj) > 0.0;
        s.camera = Camera{};
        out.push_back(std::move(s));
    }
    return out;
}

void write_pseudo_gt(const std::string& path, const std::vector<PseudoGTRecord>& records) {
    std::vector<json> lines;
    lines.reserve(records.size());
    for (const auto& r : records) {
        json j;
        j["sample_id"] = r.sample_id;
        j["dataset"] = r.dataset;
        j["global_rot"] = vector_to_json(r.global_rot);
        j["latent"] = vector_to_json(r.latent);
        j["body_pose"] = vector_to_json(r.body_pose);
        j["beta"] = vector_to_json(r.beta);
        j["translation"] = vector_to_json(r.translation);
        j["reproj_err_px"] = r.reproj_err_px;
        j["producer"] = r.producer;
        j["producer_version"] = r.producer_version;
        j["seed"] = r.seed;
        lines.push_back(std::move(j));
    }
    write_jsonl(path, lines);
}

std::vector<PseudoGTRecord> read_pseudo_gt(const std::string& path, const PosePriorVAE* prior) {
    static const std::vector<std::string> allowed = {
        "sample_id", "dataset",     "global_rot",       "latent", "body_pose", "beta",
        "translation", "reproj_err_px", "producer", "producer_version", "seed"};
    std::vector<PseudoGTRecord> out;
    int lineno = 0;
    for (const auto& j : read_jsonl(path)) {
        ++lineno;
        const std::string ctx = "pseudo-GT record " + std::to_string(lineno);
        reject_unknown_keys(j, allowed, ctx);
        PseudoGTRecord r;
        r.sample_id = require(j, "sample_id", ctx).get<std::string>();
        r.dataset = require(j, "dataset", ctx).get<std::string>();
        r.global_rot = Eigen::Vector3d(vector_from_json(require(j, "global_rot", ctx)));
        r.latent = vector_from_json(require(j, "latent", ctx));
        r.body_pose = vector_from_json(require(j, "body_pose", ctx));
        r.beta = vector_from_json(require(j, "beta", ctx));
        r.translation = Eigen::Vector3d(vector_from_json(require(j, "translation", ctx)));
        r.reproj_err_px = require(j, "reproj_err_px", ctx).get<double>();
        r.producer = require(j, "producer", ctx).get<std::string>();
        r.producer_version = require(j, "producer_version", ctx).get<std::string>();
        r.seed = require(j, "seed", ctx).get<uint64_t>();
        if (r.body_pose.size() % 3 != 0)
            throw ShapeError(ctx + ": body_pose length not a multiple of 3");
        if (prior && r.latent.size() > 0) {
            if (r.latent.size() != prior->latent_dim)
                throw ShapeError(ctx + ": latent size mismatch against prior");
            const Eigen::MatrixXd dec = decode(*prior, LatentCode{r.latent});
            Eigen::VectorXd dec_flat(dec.size());
            for (int rr = 0; rr < dec.rows(); ++rr)
                for (int cc = 0; cc < 3; ++cc) dec_flat(3 * rr + cc) = dec(rr, cc);
            if (dec_flat.size() != r.body_pose.size() ||
                (dec_flat - r.body_pose).cwiseAbs().maxCoeff() > 1e-9) {
                throw IntegrityError(ctx + " (" + r.sample_id +
                                     "): body_pose does not match decode(latent)");
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

double reprojection_error_px(const PseudoGTRecord& rec, const Sample& sample,
                             const KinematicModel& model) {
    PoseParams pose = model.zero_pose();
    pose.global_rot = rec.global_rot;
    for (int jj = 1; jj < model.joint_count; ++jj)
        for (int c = 0; c < 3; ++c) pose.body_pose(jj - 1, c) = rec.body_pose(3 * (jj - 1) + c);
    pose.translation = rec.translation;
    ShapeParams beta{rec.beta};
    const Eigen::MatrixXd kp = project(fk_joints(model, pose, beta), sample.camera);
    double err = 0.0;
    int n = 0;
    for (int jj = 0; jj < model.joint_count; ++jj) {
        if (sample.observed_conf(jj) <= 0.0) continue;
        err += (kp.row(jj) - sample.observed_kp.row(jj)).cwiseAbs().sum();
        n += 2;
    }
    if (n == 0) throw DataError("sample " + sample.id + ": no visible joints");
    return err / n;
}

}  // namespace pseudopose
