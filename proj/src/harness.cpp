#include "pseudopose/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "pseudopose/errors.hpp"
#include "pseudopose/jsonio.hpp"

namespace fs = std::filesystem;

namespace pseudopose {

using nlohmann::json;

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hash_hex(const json& j) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(j.dump())));
    return std::string(buf);
}

namespace {

json noise_to_json(const NoiseModel& n) {
    return {{"sigma_px", n.sigma_px},
            {"outlier_prob", n.outlier_prob},
            {"outlier_sigma_px", n.outlier_sigma_px},
            {"occlusion_prob", n.occlusion_prob},
            {"bias_mag_px", n.bias_mag_px}};
}

void noise_from_json(const json& j, NoiseModel& n) {
    n.sigma_px = j.value("sigma_px", n.sigma_px);
    n.outlier_prob = j.value("outlier_prob", n.outlier_prob);
    n.outlier_sigma_px = j.value("outlier_sigma_px", n.outlier_sigma_px);
    n.occlusion_prob = j.value("occlusion_prob", n.occlusion_prob);
    n.bias_mag_px = j.value("bias_mag_px", n.bias_mag_px);
}

json data_to_json(const BenchmarkConfig& d) {
    return {{"mocap_size", d.mocap_size},
            {"itw2d_size", d.itw2d_size},
            {"itw3d_size", d.itw3d_size},
            {"test_size", d.test_size},
            {"itw2d_multiplier", d.itw2d_multiplier},
            {"mocap_noise", noise_to_json(d.mocap_noise)},
            {"itw_noise", noise_to_json(d.itw_noise)},
            {"mocap_latent_std", d.mocap_latent_std},
            {"itw_latent_std", d.itw_latent_std},
            {"mocap_latent_mean", d.mocap_latent_mean},
            {"itw_yaw_std", d.itw_yaw_std},
            {"beta_range", d.beta_range},
            {"small_tilt_std", d.small_tilt_std},
            {"depth_min_mm", d.depth_min_mm},
            {"depth_max_mm", d.depth_max_mm},
            {"xy_range_mm", d.xy_range_mm}};
}

void data_from_json(const json& j, BenchmarkConfig& d) {
    d.mocap_size = j.value("mocap_size", d.mocap_size);
    d.itw2d_size = j.value("itw2d_size", d.itw2d_size);
    d.itw3d_size = j.value("itw3d_size", d.itw3d_size);
    d.test_size = j.value("test_size", d.test_size);
    d.itw2d_multiplier = j.value("itw2d_multiplier", d.itw2d_multiplier);
    if (j.contains("mocap_noise")) noise_from_json(j.at("mocap_noise"), d.mocap_noise);
    if (j.contains("itw_noise")) noise_from_json(j.at("itw_noise"), d.itw_noise);
    d.mocap_latent_std = j.value("mocap_latent_std", d.mocap_latent_std);
    d.itw_latent_std = j.value("itw_latent_std", d.itw_latent_std);
    d.mocap_latent_mean = j.value("mocap_latent_mean", d.mocap_latent_mean);
    d.itw_yaw_std = j.value("itw_yaw_std", d.itw_yaw_std);
    d.beta_range = j.value("beta_range", d.beta_range);
    d.small_tilt_std = j.value("small_tilt_std", d.small_tilt_std);
    d.depth_min_mm = j.value("depth_min_mm", d.depth_min_mm);
    d.depth_max_mm = j.value("depth_max_mm", d.depth_max_mm);
    d.xy_range_mm = j.value("xy_range_mm", d.xy_range_mm);
}

json train_to_json(const TrainConfig& t) {
    return {{"batch_size", t.batch_size},
            {"epochs", t.epochs},
            {"learning_rate", t.learning_rate},
            {"lr_drop_epochs", t.lr_drop_epochs},
            {"w_reproj", t.w_reproj},
            {"w_joints3d", t.w_joints3d},
            {"w_param", t.w_param},
            {"w_reg", t.w_reg},
            {"augment", t.augment},
            {"aug_scale", t.aug_scale},
            {"aug_rot_deg", t.aug_rot_deg},
            {"aug_flip_prob", t.aug_flip_prob}};
}

void train_from_json(const json& j, TrainConfig& t) {
    t.batch_size = j.value("batch_size", t.batch_size);
    t.epochs = j.value("epochs", t.epochs);
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    if (j.contains("lr_drop_epochs"))
        t.lr_drop_epochs = j.at("lr_drop_epochs").get<std::vector<int>>();
    t.w_reproj = j.value("w_reproj", t.w_reproj);
    t.w_joints3d = j.value("w_joints3d", t.w_joints3d);
    t.w_param = j.value("w_param", t.w_param);
    t.w_reg = j.value("w_reg", t.w_reg);
    t.augment = j.value("augment", t.augment);
    t.aug_scale = j.value("aug_scale", t.aug_scale);
    t.aug_rot_deg = j.value("aug_rot_deg", t.aug_rot_deg);
    t.aug_flip_prob = j.value("aug_flip_prob", t.aug_flip_prob);
}

json prior_to_json(const PriorTrainConfig& p) {
    return {{"epochs", p.epochs},
            {"batch_size", p.batch_size},
            {"learning_rate", p.learning_rate},
            {"kl_weight", p.kl_weight},
            {"corpus_id", p.corpus_id}};
}

void prior_from_json(const json& j, PriorTrainConfig& p) {
    p.epochs = j.value("epochs", p.epochs);
    p.batch_size = j.value("batch_size", p.batch_size);
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.kl_weight = j.value("kl_weight", p.kl_weight);
    p.corpus_id = j.value("corpus_id", p.corpus_id);
}

json pretrain_to_json(const PretrainConfig& p) {
    return {{"epochs", p.epochs},
            {"batch_size", p.batch_size},
            {"learning_rate", p.learning_rate},
            {"cluster_count", p.cluster_count},
            {"kmeans_iters", p.kmeans_iters}};
}

void pretrain_from_json(const json& j, PretrainConfig& p) {
    p.epochs = j.value("epochs", p.epochs);
    p.batch_size = j.value("batch_size", p.batch_size);
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.cluster_count = j.value("cluster_count", p.cluster_count);
    p.kmeans_iters = j.value("kmeans_iters", p.kmeans_iters);
}

json fit_to_json(const FitConfig& f) {
    return {{"stage1_iters", f.stage1_iters},
            {"stage2_iters", f.stage2_iters},
            {"prior_weight", f.prior_weight},
            {"tol", f.tol},
            {"init_step", f.init_step},
            {"torso_joints", f.torso_joints},
            {"yaw_candidates", f.yaw_candidates},
            {"producer_version", f.producer_version}};
}

void fit_from_json(const json& j, FitConfig& f) {
    f.stage1_iters = j.value("stage1_iters", f.stage1_iters);
    f.stage2_iters = j.value("stage2_iters", f.stage2_iters);
    f.prior_weight = j.value("prior_weight", f.prior_weight);
    f.tol = j.value("tol", f.tol);
    f.init_step = j.value("init_step", f.init_step);
    if (j.contains("torso_joints")) f.torso_joints = j.at("torso_joints").get<std::vector<int>>();
    if (j.contains("yaw_candidates"))
        f.yaw_candidates = j.at("yaw_candidates").get<std::vector<double>>();
    f.producer_version = j.value("producer_version", f.producer_version);
}

std::string sanitize_csv(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

void write_text(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw DataError("cannot write " + path);
        f << text;
    }
    fs::rename(tmp, path);
}

}  // namespace

json ExperimentConfig::to_json() const {
    json j;
    j["out_dir"] = out_dir;
    j["seeds"] = seeds;
    j["model_seed"] = model_seed;
    j["data_seed"] = data_seed;
    j["prior_seed"] = prior_seed;
    j["prior_corpus_size"] = prior_corpus_size;
    j["prior_latent_dim"] = prior_latent_dim;
    j["prior"] = prior_to_json(prior);
    j["data"] = data_to_json(data);
    j["pretrain"] = pretrain_to_json(pretrain);
    j["train"] = train_to_json(train);
    j["fit"] = fit_to_json(fit);
    j["pck_threshold_mm"] = pck_threshold_mm;
    j["jobs"] = jobs;
    j["cells"] = cells;
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    c.out_dir = j.value("out_dir", c.out_dir);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    if (c.seeds.empty()) throw ConfigError("seed list must be nonempty");
    c.model_seed = j.value("model_seed", c.model_seed);
    c.data_seed = j.value("data_seed", c.data_seed);
    c.prior_seed = j.value("prior_seed", c.prior_seed);
    c.prior_corpus_size = j.value("prior_corpus_size", c.prior_corpus_size);
    c.prior_latent_dim = j.value("prior_latent_dim", c.prior_latent_dim);
    if (j.contains("prior")) prior_from_json(j.at("prior"), c.prior);
    if (j.contains("data")) data_from_json(j.at("data"), c.data);
    if (j.contains("pretrain")) pretrain_from_json(j.at("pretrain"), c.pretrain);
    if (j.contains("train")) train_from_json(j.at("train"), c.train);
    if (j.contains("fit")) fit_from_json(j.at("fit"), c.fit);
    c.pck_threshold_mm = j.value("pck_threshold_mm", c.pck_threshold_mm);
    if (c.pck_threshold_mm <= 0) throw ConfigError("pck threshold must be positive");
    c.jobs = j.value("jobs", c.jobs);
    if (j.contains("cells")) c.cells = j.at("cells").get<std::vector<std::string>>();
    return c;
}

void ExperimentConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override '" + assignment + "' is not of the form path=value");
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    json root = to_json();
    json* node = &root;
    std::stringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ConfigError("empty override path");
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->contains(parts[i]))
            throw ConfigError("unknown config path '" + path + "'");
        node = &(*node)[parts[i]];
    }
    const std::string& leaf = parts.back();
    if (!node->contains(leaf)) throw ConfigError("unknown config path '" + path + "'");
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;  // plain string
    (*node)[leaf] = parsed;
    *this = from_json(root);
}

ExperimentConfig load_config(const std::string& path_or_empty,
                             const std::vector<std::string>& overrides) {
    ExperimentConfig cfg;
    if (!path_or_empty.empty()) cfg = ExperimentConfig::from_json(jsonio::read_file(path_or_empty));
    for (const auto& o : overrides) cfg.apply_override(o);
    return cfg;
}

const std::vector<CellSpec>& default_cells() {
    static const std::vector<CellSpec> cells = [] {
        std::vector<CellSpec> v;
        CellSpec base;
        base.name = "base";
        v.push_back(base);

        CellSpec c = base;
        c.name = "no-bridge";
        c.bridge = false;
        v.push_back(c);

        c = base;
        c.name = "bridge-no3d";
        c.strip_bridge_3d = true;
        v.push_back(c);

        c = base;
        c.name = "itw10x";
        c.bridge = false;
        c.itw_multiplier = 10;
        v.push_back(c);

        c = base;
        c.name = "init-random";
        c.init_mode = "random";
        v.push_back(c);

        c = base;
        c.name = "init-posecluster";
        c.init_mode = "posecluster";
        v.push_back(c);

        c = base;
        c.name = "no-prior";
        c.use_prior = false;
        v.push_back(c);

        const std::vector<std::pair<std::string, double>> sweep = {
            {"l2w-0", 0.0}, {"l2w-1e-1", 1e-1}, {"l2w-1e-3", 1e-3},
            {"l2w-1e-4", 1e-4}, {"l2w-1e-5", 1e-5}};
        for (const auto& [name, w] : sweep) {
            c = base;
            c.name = name;
            c.reg_weight = w;
            v.push_back(c);
        }

        c = base;
        c.name = "weak2d";
        c.variant = "weak2d";
        v.push_back(c);

        c = base;
        c.name = "f-direct";
        c.variant = "f-direct";
        v.push_back(c);

        c = base;
        c.name = "f-finetune";
        c.variant = "f-finetune";
        v.push_back(c);

        c = base;
        c.name = "fit-baseline";
        c.variant = "fit-baseline";
        v.push_back(c);
        return v;
    }();
    return cells;
}

CellSpec find_cell(const std::string& name) {
    for (const CellSpec& c : default_cells())
        if (c.name == name) return c;
    throw ConfigError("unknown cell '" + name + "'");
}

double median(std::vector<double> v) {
    if (v.empty()) throw ConfigError("median of empty set");
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Workspace::Workspace(const ExperimentConfig& cfg) : cfg_(cfg) {
    fs::create_directories(cfg_.out_dir + "/assets");
    fs::create_directories(cfg_.out_dir + "/cells");
}

std::string Workspace::model_path() const {
    return cfg_.out_dir + "/assets/model-" + hash_hex(json{{"model_seed", cfg_.model_seed}}) +
           ".json";
}

// Identifies the prior independently of where it is stored, so artifact
// hashes stay equal across output directories.
static json prior_key_json(const ExperimentConfig& cfg) {
    return {{"model_seed", cfg.model_seed},
            {"prior", prior_to_json(cfg.prior)},
            {"corpus_size", cfg.prior_corpus_size},
            {"latent_dim", cfg.prior_latent_dim},
            {"prior_seed", cfg.prior_seed}};
}

std::string Workspace::prior_path() const {
    return cfg_.out_dir + "/assets/prior-" + hash_hex(prior_key_json(cfg_)) + ".json";
}

const KinematicModel& Workspace::model() {
    if (!model_) {
        const std::string path = model_path();
        if (fs::exists(path)) {
            model_ = load_model(path);
        } else {
            model_ = make_synthetic_model(ModelSpec{}, cfg_.model_seed);
            save_model(*model_, path);
        }
    }
    return *model_;
}

const PosePriorVAE& Workspace::prior() {
    if (!prior_) {
        const std::string path = prior_path();
        if (fs::exists(path)) {
            prior_ = PosePriorVAE::load(path);
        } else {
            const auto corpus = generate_pose_corpus(model(), cfg_.prior_corpus_size,
                                                     cfg_.prior_seed);
            prior_ = train_prior(corpus, cfg_.prior, cfg_.prior_seed, cfg_.prior_latent_dim);
            prior_->save(path);
        }
    }
    return *prior_;
}

BenchmarkFiles Workspace::benchmark(int itw_multiplier) {
    json key{{"model_seed", cfg_.model_seed},
             {"prior_key", prior_key_json(cfg_)},
             {"data", data_to_json(cfg_.data)},
             {"itw_multiplier", itw_multiplier},
             {"data_seed", cfg_.data_seed}};
    const std::string dir = cfg_.out_dir + "/assets/bench-" + hash_hex(key);
    BenchmarkFiles files{dir + "/mocap.jsonl", dir + "/itw2d.jsonl", dir + "/itw3d.jsonl",
                         dir + "/test.jsonl"};
    if (!fs::exists(dir + "/done.json")) {
        BenchmarkConfig dc = cfg_.data;
        dc.itw2d_multiplier = itw_multiplier;
        generate_benchmark(dc, model(), prior(), cfg_.data_seed, dir);
        jsonio::write_file(dir + "/done.json", json{{"key", key}});
    }
    return files;
}

namespace {

double records_implausibility(const std::vector<PseudoGTRecord>& records,
                              const KinematicModel& model) {
    std::vector<Eigen::MatrixXd> poses;
    poses.reserve(records.size());
    for (const auto& r : records) {
        Eigen::MatrixXd bp(model.joint_count - 1, 3);
        for (int j = 0; j < model.joint_count - 1; ++j)
            for (int c = 0; c < 3; ++c) bp(j, c) = r.body_pose(3 * j + c);
        poses.push_back(std::move(bp));
    }
    return implausibility_rate(poses, model.joint_limits);
}

std::string encoder_artifact_path(const Workspace& ws, const CellSpec& cell, uint64_t seed) {
    const ExperimentConfig& cfg = ws.cfg();
    const std::string pretext = cell.init_mode == "random" ? "none" : cell.init_mode;
    json key{{"prior_key", prior_key_json(ws.cfg())},
             {"data", data_to_json(cfg.data)},
             {"itw_multiplier", cell.itw_multiplier},
             {"data_seed", cfg.data_seed},
             {"pretrain", pretrain_to_json(cfg.pretrain)},
             {"pretext", pretext},
             {"seed", seed}};
    return cfg.out_dir + "/assets/encoder-" + hash_hex(key) + ".json";
}

Mlp load_or_pretrain_encoder(Workspace& ws, const CellSpec& cell,
                             const std::vector<Sample>& mocap,
                             const std::vector<Sample>& itw2d, uint64_t seed) {
    const ExperimentConfig& cfg = ws.cfg();
    const std::string pretext = cell.init_mode == "random" ? "none" : cell.init_mode;
    const std::string path = encoder_artifact_path(ws, cell, seed);
    // Encoder artifacts are shared across cells; serialize creation so
    // parallel cells neither race on the file nor duplicate the work.
    static std::mutex encoder_mutex;
    std::lock_guard<std::mutex> lock(encoder_mutex);
    if (fs::exists(path)) {
        const json j = jsonio::read_file(path);
        if (j.value("kind", "") != "encoder")
            throw FormatError("file " + path + " is not an encoder checkpoint");
        return Mlp::from_json(j.at("mlp"));
    }
    std::vector<Sample> pool;
    if (pretext == "posecluster") {
        pool = mocap;
    } else if (pretext == "denoise2d") {
        pool = mocap;
        pool.insert(pool.end(), itw2d.begin(), itw2d.end());
    }
    Mlp enc = pretrain_encoder(pool, pretext, ws.model(), cfg.pretrain, seed);
    json j{{"kind", "encoder"}, {"pretext", pretext}, {"seed", seed}, {"mlp", enc.to_json()}};
    jsonio::write_file(path, j);
    return enc;
}

}  // namespace

std::string ensure_encoder_artifact(Workspace& ws, const CellSpec& cell, uint64_t seed) {
    const BenchmarkFiles files = ws.benchmark(cell.itw_multiplier);
    const auto mocap = read_samples(files.mocap);
    const auto itw2d = read_samples(files.itw2d);
    load_or_pretrain_encoder(ws, cell, mocap, itw2d, seed);
    return encoder_artifact_path(ws, cell, seed);
}

CellResult run_pipeline(Workspace& ws, const CellSpec& cell, uint64_t seed, PipelineStep upto) {
    const ExperimentConfig& cfg = ws.cfg();
    const KinematicModel& model = ws.model();
    const PosePriorVAE& prior = ws.prior();

    CellResult result;
    result.cell = cell.name;
    result.seed = seed;

    json cell_key{{"bridge", cell.bridge},
                  {"strip_bridge_3d", cell.strip_bridge_3d},
                  {"itw_multiplier", cell.itw_multiplier},
                  {"init_mode", cell.init_mode},
                  {"use_prior", cell.use_prior},
                  {"reg_weight", cell.reg_weight}};
    json shared_key{{"prior_key", prior_key_json(ws.cfg())},
                    {"data", data_to_json(cfg.data)},
                    {"data_seed", cfg.data_seed},
                    {"pretrain", pretrain_to_json(cfg.pretrain)},
                    {"train", train_to_json(cfg.train)},
                    {"seed", seed}};
    json f_key{{"cell", cell_key}, {"shared", shared_key}};
    const std::string f_hash = hash_hex(f_key);
    json g_key{{"f", f_key}, {"variant", cell.variant}, {"fit", fit_to_json(cfg.fit)}};
    const std::string g_hash = hash_hex(g_key);

    const std::string dir = cfg.out_dir + "/cells";
    const std::string eval_path = dir + "/eval-" + cell.name + "-" + g_hash + ".json";
    result.eval_path = eval_path;

    if (upto == PipelineStep::Eval && fs::exists(eval_path)) {
        const json e = jsonio::read_file(eval_path);
        result.report.pa_mpjpe = e.at("pa_mpjpe").get<double>();
        result.report.mpjpe = e.at("mpjpe").get<double>();
        for (int c = 0; c < 3; ++c) result.report.per_axis(c) = e.at("per_axis")[c].get<double>();
        result.report.pck3d = e.at("pck3d").get<double>();
        result.report.implausibility_rate = e.at("implausibility_rate").get<double>();
        result.report.sample_count = e.at("sample_count").get<long>();
        result.pgt_implausibility = e.value("pgt_implausibility", std::nan(""));
        return result;
    }

    const BenchmarkFiles files = ws.benchmark(cell.itw_multiplier);
    if (upto == PipelineStep::GenData) return result;
    const auto mocap = read_samples(files.mocap);
    const auto itw2d = read_samples(files.itw2d);
    const auto itw3d = read_samples(files.itw3d);
    const auto test = read_samples(files.test);

    const uint64_t f_seed = seed * 1000 + 1;
    const uint64_t g_seed = seed * 1000 + 2;
    const uint64_t enc_seed = seed * 1000 + 3;

    TrainConfig tc = cfg.train;
    tc.w_reg = cell.reg_weight;
    const Mlp init_enc = load_or_pretrain_encoder(ws, cell, mocap, itw2d, enc_seed);

    std::vector<PseudoGTRecord> pgt;
    std::string pgt_path;
    Network final_net;
    bool have_net = false;

    if (cell.variant == "weak2d") {
        if (upto == PipelineStep::TrainAnnot || upto == PipelineStep::Annotate) return result;
        final_net = train_estimator_weak2d(mocap, itw2d, prior, model, tc, init_enc,
                                           cell.init_mode, cell.use_prior, g_seed);
        have_net = true;
    } else if (cell.variant == "fit-baseline") {
        if (upto == PipelineStep::TrainAnnot) return result;
        pgt_path = dir + "/pgt-" + cell.name + "-" + g_hash + ".jsonl";
        if (fs::exists(pgt_path)) {
            pgt = read_pseudo_gt(pgt_path, &prior);
        } else {
            FitConfig fc = cfg.fit;
            fc.prior_weight = cell.reg_weight;
            pgt.reserve(itw2d.size());
            for (const Sample& s : itw2d) pgt.push_back(fit_sample(s, model, prior, fc, seed).record);
            write_pseudo_gt(pgt_path, pgt);
        }
        if (upto == PipelineStep::Annotate) return result;
        final_net = train_estimator(mocap, itw2d, pgt, prior, model, tc, init_enc,
                                    cell.init_mode, cell.use_prior, g_seed);
        have_net = true;
    } else {
        // Variants that need the stage-1 annotation network.
        Network f;
        const std::string f_path = dir + "/annot-" + cell.name + "-" + f_hash + ".json";
        if (fs::exists(f_path)) {
            f = Network::load(f_path);
            if (f.config_hash != f_hash)
                throw IntegrityError("checkpoint " + f_path + " carries a different config hash");
        } else {
            const std::vector<Sample> bridge = cell.bridge || cell.strip_bridge_3d
                                                   ? itw3d
                                                   : std::vector<Sample>{};
            f = train_annotator(mocap, itw2d, bridge, prior, model, tc, init_enc,
                                cell.init_mode, cell.use_prior, cell.strip_bridge_3d, f_seed);
            f.config_hash = f_hash;
            f.save(f_path);
        }
        if (upto == PipelineStep::TrainAnnot) return result;

        if (cell.variant == "f-direct") {
            final_net = f;
            have_net = true;
        } else {
            pgt_path = dir + "/pgt-" + cell.name + "-" + f_hash + ".jsonl";
            if (fs::exists(pgt_path)) {
                pgt = read_pseudo_gt(pgt_path, cell.use_prior ? &prior : nullptr);
            } else {
                pgt = annotate(f, prior, model, itw2d, "itw2d", "annotator-v1");
                write_pseudo_gt(pgt_path, pgt);
            }
            if (upto == PipelineStep::Annotate) return result;
            if (cell.variant == "f-finetune") {
                final_net = finetune_variant(f, mocap, itw2d, pgt, prior, model, tc, g_seed);
            } else if (cell.variant == "fresh-g") {
                final_net = train_estimator(mocap, itw2d, pgt, prior, model, tc, init_enc,
                                            cell.init_mode, cell.use_prior, g_seed);
            } else {
                throw ConfigError("unknown pipeline variant '" + cell.variant + "'");
            }
            have_net = true;
        }
    }
    if (!have_net) throw ConfigError("cell '" + cell.name + "' produced no network");

    const std::string net_path = dir + "/net-" + cell.name + "-" + g_hash + ".json";
    if (!fs::exists(net_path)) {
        final_net.config_hash = g_hash;
        final_net.save(net_path);
    }
    if (upto == PipelineStep::TrainEst) return result;

    const EvalResult ev = evaluate(final_net, prior, model, test, cfg.pck_threshold_mm);
    result.report = ev.report;
    if (!pgt.empty()) result.pgt_implausibility = records_implausibility(pgt, model);

    // Per-sample errors next to the summary.
    std::ostringstream ps;
    ps << "id,pa_mpjpe,mpjpe,pck3d\n";
    for (const auto& e : ev.per_sample)
        ps << e.id << "," << e.pa_mpjpe << "," << e.mpjpe << "," << e.pck3d << "\n";
    write_text(dir + "/per-sample-" + cell.name + "-" + g_hash + ".csv", ps.str());

    json e;
    e["cell"] = cell.name;
    e["seed"] = seed;
    e["pa_mpjpe"] = result.report.pa_mpjpe;
    e["mpjpe"] = result.report.mpjpe;
    e["per_axis"] = {result.report.per_axis(0), result.report.per_axis(1),
                     result.report.per_axis(2)};
    e["pck3d"] = result.report.pck3d;
    e["implausibility_rate"] = result.report.implausibility_rate;
    e["sample_count"] = result.report.sample_count;
    if (std::isfinite(result.pgt_implausibility))
        e["pgt_implausibility"] = result.pgt_implausibility;
    jsonio::write_file(eval_path, e);
    return result;
}

static std::string rows_csv_text(const std::vector<CellResult>& rows) {
    std::ostringstream out;
    out << "cell,seed,status,error,pa_mpjpe,mpjpe,ex,ey,ez,pck3d,implausibility_rate,n,"
           "pgt_implausibility\n";
    for (const auto& r : rows) {
        out << r.cell << "," << r.seed << "," << (r.failed ? "failed" : "ok") << ","
            << sanitize_csv(r.error) << ",";
        if (r.failed) {
            out << ",,,,,,,,\n";
        } else {
            out << r.report.pa_mpjpe << "," << r.report.mpjpe << "," << r.report.per_axis(0)
                << "," << r.report.per_axis(1) << "," << r.report.per_axis(2) << ","
                << r.report.pck3d << "," << r.report.implausibility_rate << ","
                << r.report.sample_count << ",";
            if (std::isfinite(r.pgt_implausibility)) out << r.pgt_implausibility;
            out << "\n";
        }
    }
    return out.str();
}

std::vector<CellResult> read_rows_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read " + path);
    std::string line;
    if (!std::getline(f, line)) throw FormatError("rows csv " + path + " is empty");
    std::vector<CellResult> rows;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
        cols.resize(13);
        CellResult r;
        r.cell = cols[0];
        r.seed = std::stoull(cols[1]);
        r.failed = cols[2] == "failed";
        r.error = cols[3];
        if (!r.failed) {
            try {
                r.report.pa_mpjpe = std::stod(cols[4]);
                r.report.mpjpe = std::stod(cols[5]);
                r.report.per_axis = Eigen::Vector3d(std::stod(cols[6]), std::stod(cols[7]),
                                                    std::stod(cols[8]));
                r.report.pck3d = std::stod(cols[9]);
                r.report.implausibility_rate = std::stod(cols[10]);
                r.report.sample_count = std::stol(cols[11]);
                r.pgt_implausibility = cols[12].empty() ? std::nan("") : std::stod(cols[12]);
            } catch (const std::exception&) {
                throw FormatError("rows csv " + path + ": bad number on line " +
                                  std::to_string(lineno));
            }
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

std::string svg_bar_chart(const std::vector<std::pair<std::string, double>>& bars,
                          const std::string& title) {
    const int w = 900, h = 420, left = 70, bottom = 90, top = 40;
    double vmax = 1.0;
    for (const auto& [_, v] : bars) vmax = std::max(vmax, v);
    std::ostringstream s;
    s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    s << "<text x='" << w / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
      << "</text>\n";
    const int plot_w = w - left - 20, plot_h = h - top - bottom;
    const double bw = bars.empty() ? 1.0 : plot_w / static_cast<double>(bars.size());
    s << "<line x1='" << left << "' y1='" << top << "' x2='" << left << "' y2='" << top + plot_h
      << "' stroke='black'/>\n";
    s << "<line x1='" << left << "' y1='" << top + plot_h << "' x2='" << left + plot_w
      << "' y2='" << top + plot_h << "' stroke='black'/>\n";
    for (int g = 0; g <= 4; ++g) {
        const double v = vmax * g / 4.0;
        const double y = top + plot_h - plot_h * g / 4.0;
        s << "<text x='" << left - 8 << "' y='" << y + 4
          << "' text-anchor='end' font-size='11'>" << static_cast<int>(v) << "</text>\n";
    }
    for (size_t i = 0; i < bars.size(); ++i) {
        const double bh = plot_h * bars[i].second / vmax;
        const double x = left + i * bw + bw * 0.15;
        s << "<rect x='" << x << "' y='" << top + plot_h - bh << "' width='" << bw * 0.7
          << "' height='" << bh << "' fill='#4878a8'/>\n";
        s << "<text x='" << left + i * bw + bw / 2 << "' y='" << top + plot_h + 14
          << "' text-anchor='end' font-size='11' transform='rotate(-45 "
          << left + i * bw + bw / 2 << " " << top + plot_h + 14 << ")'>" << bars[i].first
          << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

std::string svg_line_chart(const std::vector<std::pair<double, double>>& pts,
                           const std::string& title, const std::string& xlabel) {
    const int w = 700, h = 420, left = 70, bottom = 60, top = 40;
    std::ostringstream s;
    s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    s << "<text x='" << w / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
      << "</text>\n";
    if (!pts.empty()) {
        double xmin = pts.front().first, xmax = pts.front().first;
        double ymin = pts.front().second, ymax = pts.front().second;
        for (const auto& [x, y] : pts) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
        if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
        if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
        const int plot_w = w - left - 30, plot_h = h - top - bottom;
        auto px = [&](double x) { return left + plot_w * (x - xmin) / (xmax - xmin); };
        auto py = [&](double y) { return top + plot_h * (1.0 - (y - ymin) / (ymax - ymin)); };
        std::ostringstream poly;
        for (const auto& [x, y] : pts) poly << px(x) << "," << py(y) << " ";
        s << "<polyline points='" << poly.str()
          << "' fill='none' stroke='#a84848' stroke-width='2'/>\n";
        for (const auto& [x, y] : pts)
            s << "<circle cx='" << px(x) << "' cy='" << py(y) << "' r='4' fill='#a84848'/>\n";
        s << "<line x1='" << left << "' y1='" << top << "' x2='" << left << "' y2='"
          << top + plot_h << "' stroke='black'/>\n";
        s << "<line x1='" << left << "' y1='" << top + plot_h << "' x2='" << left + plot_w
          << "' y2='" << top + plot_h << "' stroke='black'/>\n";
        s << "<text x='" << w / 2 << "' y='" << h - 12 << "' text-anchor='middle' font-size='12'>"
          << xlabel << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace

void write_reports(const ExperimentConfig& cfg, const std::vector<CellResult>& rows) {
    write_text(cfg.out_dir + "/ablation_rows.csv", rows_csv_text(rows));

    // Summary with per-cell medians over successful seeds.
    std::vector<std::string> order;
    for (const auto& r : rows)
        if (std::find(order.begin(), order.end(), r.cell) == order.end()) order.push_back(r.cell);

    std::ostringstream sum;
    sum << "cell,runs,failures,pa_mpjpe,mpjpe,ex,ey,ez,pck3d,implausibility_rate,"
           "pgt_implausibility\n";
    std::vector<std::pair<std::string, double>> bars;
    std::vector<std::pair<double, double>> sweep;
    for (const auto& name : order) {
        std::vector<double> pa, mp, ex, ey, ez, pck, impl, pgtimpl;
        int runs = 0, failures = 0;
        for (const auto& r : rows) {
            if (r.cell != name) continue;
            ++runs;
            if (r.failed) {
                ++failures;
                continue;
            }
            pa.push_back(r.report.pa_mpjpe);
            mp.push_back(r.report.mpjpe);
            ex.push_back(r.report.per_axis(0));
            ey.push_back(r.report.per_axis(1));
            ez.push_back(r.report.per_axis(2));
            pck.push_back(r.report.pck3d);
            impl.push_back(r.report.implausibility_rate);
            if (std::isfinite(r.pgt_implausibility)) pgtimpl.push_back(r.pgt_implausibility);
        }
        sum << name << "," << runs << "," << failures << ",";
        if (!pa.empty()) {
            sum << median(pa) << "," << median(mp) << "," << median(ex) << "," << median(ey)
                << "," << median(ez) << "," << median(pck) << "," << median(impl) << ",";
            if (!pgtimpl.empty()) sum << median(pgtimpl);
            bars.emplace_back(name, median(pa));
            if (name.rfind("l2w-", 0) == 0 || name == "base") {
                const double w = name == "base" ? 1e-2 : std::stod(name.substr(4));
                // Weight 0 sits at the left edge of the log axis.
                sweep.emplace_back(w > 0 ? std::log10(w) : -7.0, median(pa));
            }
        } else {
            sum << ",,,,,,,";
        }
        sum << "\n";
    }
    write_text(cfg.out_dir + "/ablation_summary.csv", sum.str());
    std::sort(sweep.begin(), sweep.end());
    write_text(cfg.out_dir + "/pa_mpjpe_by_cell.svg",
               svg_bar_chart(bars, "Test PA-MPJPE (mm), median over seeds"));
    write_text(cfg.out_dir + "/l2_sweep.svg",
               svg_line_chart(sweep, "Regularizer weight sweep: test PA-MPJPE (mm)",
                              "log10(weight); leftmost point is weight 0"));
}

AblationResult run_ablation(const ExperimentConfig& cfg) {
    Workspace ws(cfg);
    // Materialize shared artifacts before any parallel section.
    ws.model();
    ws.prior();
    std::vector<CellSpec> cells;
    if (cfg.cells.empty()) {
        cells = default_cells();
    } else {
        for (const auto& name : cfg.cells) cells.push_back(find_cell(name));
    }
    {
        std::vector<int> mults;
        for (const auto& c : cells)
            if (std::find(mults.begin(), mults.end(), c.itw_multiplier) == mults.end())
                mults.push_back(c.itw_multiplier);
        for (int m : mults) ws.benchmark(m);
    }

    struct Task {
        CellSpec cell;
        uint64_t seed;
    };
    std::vector<Task> tasks;
    for (const auto& c : cells)
        for (uint64_t s : cfg.seeds) tasks.push_back({c, s});

    std::vector<CellResult> rows(tasks.size());
    std::atomic<size_t> next{0};
    std::mutex ws_mutex;
    const int jobs = cfg.jobs > 0 ? cfg.jobs
                                  : std::max(1u, std::thread::hardware_concurrency());
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const Task& t = tasks[i];
            CellResult r;
            try {
                // Each task reads shared assets; Workspace caches are
                // populated up front so run_pipeline only reads them here.
                r = run_pipeline(ws, t.cell, t.seed);
            } catch (const std::exception& e) {
                r.cell = t.cell.name;
                r.seed = t.seed;
                r.failed = true;
                r.error = e.what();
            }
            rows[i] = std::move(r);
        }
    };
    std::vector<std::thread> threads;
    for (int i = 0; i < std::min<size_t>(jobs, tasks.size()); ++i)
        threads.emplace_back(worker);
    for (auto& th : threads) th.join();
    (void)ws_mutex;

    write_reports(cfg, rows);
    AblationResult res;
    res.rows = std::move(rows);
    res.rows_csv = cfg.out_dir + "/ablation_rows.csv";
    res.summary_csv = cfg.out_dir + "/ablation_summary.csv";
    return res;
}

}  // namespace pseudopose
