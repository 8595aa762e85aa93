#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pseudopose/errors.hpp"
#include "pseudopose/harness.hpp"

using namespace pseudopose;

namespace {

// A matrix configuration small enough to run a full pipeline in seconds.
ExperimentConfig micro_cfg(const std::string& out_dir) {
    ExperimentConfig cfg;
    cfg.out_dir = out_dir;
    cfg.seeds = {7};
    cfg.prior_corpus_size = 1200;
    cfg.prior.epochs = 6;
    cfg.prior.batch_size = 64;
    cfg.data.mocap_size = 64;
    cfg.data.itw2d_size = 64;
    cfg.data.itw3d_size = 8;
    cfg.data.test_size = 16;
    cfg.pretrain.epochs = 1;
    cfg.train.batch_size = 32;
    cfg.train.epochs = 2;
    cfg.train.lr_drop_epochs = {};
    cfg.fit.stage1_iters = 20;
    cfg.fit.stage2_iters = 40;
    cfg.jobs = 1;
    return cfg;
}

std::string fresh_dir(const std::string& name) {
    const std::string dir = (std::filesystem::temp_directory_path() / name).string();
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("fnv1a64 matches known vectors and hash_hex is order-insensitive") {
    // Reference values for the 64-bit FNV-1a offset basis and a classic probe.
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
    // hash_hex serializes with sorted keys, so insertion order cannot matter.
    nlohmann::json a{{"x", 1}, {"y", 2}};
    nlohmann::json b{{"y", 2}, {"x", 1}};
    CHECK(hash_hex(a) == hash_hex(b));
    CHECK(hash_hex(a) != hash_hex(nlohmann::json{{"x", 1}, {"y", 3}}));
    CHECK(hash_hex(a).size() == 16);
}

TEST_CASE("median handles odd, even and single-element inputs") {
    CHECK(median({3.0}) == 3.0);
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
}

TEST_CASE("config json round-trip and dotted overrides") {
    ExperimentConfig cfg;
    cfg.train.epochs = 9;
    cfg.data.mocap_size = 123;
    const ExperimentConfig back = ExperimentConfig::from_json(cfg.to_json());
    CHECK(back.train.epochs == 9);
    CHECK(back.data.mocap_size == 123);
    CHECK(back.seeds == cfg.seeds);

    ExperimentConfig o;
    o.apply_override("train.epochs=3");
    CHECK(o.train.epochs == 3);
    o.apply_override("data.itw2d_multiplier=10");
    CHECK(o.data.itw2d_multiplier == 10);
    o.apply_override("train.learning_rate=0.0005");
    CHECK(o.train.learning_rate == doctest::Approx(5e-4).epsilon(1e-12));
    o.apply_override("out_dir=elsewhere");
    CHECK(o.out_dir == "elsewhere");
    CHECK_THROWS_AS(o.apply_override("no_equals_sign"), ConfigError);
    CHECK_THROWS_AS(o.apply_override("bogus.path=1"), ConfigError);
}

TEST_CASE("default cell matrix contains every documented variant") {
    const auto& cells = default_cells();
    std::vector<std::string> expect = {"base",      "no-bridge",  "bridge-no3d",
                                       "itw10x",    "init-random", "init-posecluster",
                                       "no-prior",  "l2w-0",      "l2w-1e-1",
                                       "l2w-1e-3",  "l2w-1e-4",   "l2w-1e-5",
                                       "weak2d",    "f-direct",   "f-finetune",
                                       "fit-baseline"};
    for (const auto& name : expect) {
        const CellSpec c = find_cell(name);
        CHECK(c.name == name);
    }
    CHECK(cells.size() == expect.size());
    CHECK_THROWS_AS(find_cell("no-such-cell"), ConfigError);

    const CellSpec base = find_cell("base");
    CHECK(base.bridge);
    CHECK(base.use_prior);
    CHECK(base.init_mode == "denoise2d");
    CHECK(base.reg_weight == 1e-2);
    CHECK(find_cell("no-bridge").bridge == false);
    CHECK(find_cell("itw10x").itw_multiplier == 10);
    CHECK(find_cell("no-prior").use_prior == false);
    CHECK(find_cell("l2w-0").reg_weight == 0.0);
    CHECK(find_cell("fit-baseline").variant == "fit-baseline");
}

TEST_CASE("rows csv round-trips results including failures") {
    std::vector<CellResult> rows(2);
    rows[0].cell = "base";
    rows[0].seed = 7;
    rows[0].report.pa_mpjpe = 55.5;
    rows[0].report.mpjpe = 70.25;
    rows[0].report.per_axis = Eigen::Vector3d(10, 20, 30);
    rows[0].report.pck3d = 92.5;
    rows[0].report.implausibility_rate = 0.003;
    rows[0].report.sample_count = 16;
    rows[0].pgt_implausibility = 0.01;
    rows[1].cell = "broken";
    rows[1].seed = 8;
    rows[1].failed = true;
    rows[1].error = "something, with\na newline";

    ExperimentConfig cfg = micro_cfg(fresh_dir("pp_csv_test"));
    std::filesystem::create_directories(cfg.out_dir);
    write_reports(cfg, rows);
    const auto back = read_rows_csv(cfg.out_dir + "/ablation_rows.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[0].cell == "base");
    CHECK(back[0].seed == 7);
    CHECK(!back[0].failed);
    CHECK(back[0].report.pa_mpjpe == 55.5);
    CHECK(back[0].report.per_axis(2) == 30.0);
    CHECK(back[0].pgt_implausibility == 0.01);
    CHECK(back[1].failed);
    CHECK(back[1].error.find(",") == std::string::npos);  // sanitized
    CHECK(back[1].error.find("\n") == std::string::npos);
    // Summary and plots exist.
    CHECK(std::filesystem::exists(cfg.out_dir + "/ablation_summary.csv"));
    CHECK(std::filesystem::exists(cfg.out_dir + "/pa_mpjpe_by_cell.svg"));
    CHECK(std::filesystem::exists(cfg.out_dir + "/l2_sweep.svg"));
    std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("workspace caches model and prior artifacts by config hash") {
    ExperimentConfig cfg = micro_cfg(fresh_dir("pp_ws_test"));
    Workspace ws(cfg);
    const KinematicModel& m1 = ws.model();
    CHECK(std::filesystem::exists(ws.model_path()));
    const auto mtime = std::filesystem::last_write_time(ws.model_path());
    // Second workspace re-reads instead of regenerating.
    Workspace ws2(cfg);
    const KinematicModel& m2 = ws2.model();
    CHECK(std::filesystem::last_write_time(ws2.model_path()) == mtime);
    CHECK((m1.template_vertices - m2.template_vertices).cwiseAbs().maxCoeff() == 0.0);
    ws.prior();
    CHECK(std::filesystem::exists(ws.prior_path()));
    // A different model seed hashes to a different artifact path.
    ExperimentConfig other = cfg;
    other.model_seed = 777;
    Workspace ws3(other);
    CHECK(ws3.model_path() != ws.model_path());
    std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("micro pipeline runs end to end, caches and is deterministic") {
    ExperimentConfig cfg = micro_cfg(fresh_dir("pp_pipe_test"));
    Workspace ws(cfg);
    const CellSpec base = find_cell("base");

    const CellResult r1 = run_pipeline(ws, base, 7);
    REQUIRE(!r1.failed);
    CHECK(r1.report.sample_count == 16);
    CHECK(std::isfinite(r1.report.pa_mpjpe));
    CHECK(r1.report.pa_mpjpe > 0.0);
    CHECK(std::isfinite(r1.pgt_implausibility));
    REQUIRE(std::filesystem::exists(r1.eval_path));

    // Second invocation hits the eval cache: artifacts keep their mtimes.
    const auto eval_mtime = std::filesystem::last_write_time(r1.eval_path);
    const CellResult r2 = run_pipeline(ws, base, 7);
    CHECK(std::filesystem::last_write_time(r1.eval_path) == eval_mtime);
    CHECK(r2.report.pa_mpjpe == r1.report.pa_mpjpe);

    // A fresh workspace over the same directory reproduces identical numbers.
    Workspace ws2(cfg);
    const CellResult r3 = run_pipeline(ws2, base, 7);
    CHECK(r3.report.pa_mpjpe == r1.report.pa_mpjpe);
    CHECK(r3.report.mpjpe == r1.report.mpjpe);

    // Byte-identical eval artifact when regenerated from scratch.
    std::stringstream before;
    before << std::ifstream(r1.eval_path).rdbuf();
    std::filesystem::remove(r1.eval_path);
    Workspace ws3(cfg);
    const CellResult r4 = run_pipeline(ws3, base, 7);
    std::stringstream after;
    after << std::ifstream(r4.eval_path).rdbuf();
    CHECK(before.str() == after.str());
    std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("pipeline honors the upto stage argument") {
    ExperimentConfig cfg = micro_cfg(fresh_dir("pp_upto_test"));
    Workspace ws(cfg);
    const CellSpec base = find_cell("base");
    run_pipeline(ws, base, 7, PipelineStep::GenData);
    // Benchmark exists but no annotator checkpoint yet.
    bool any_net = false;
    for (const auto& e : std::filesystem::recursive_directory_iterator(cfg.out_dir))
        if (e.path().filename().string().rfind("annot-", 0) == 0) any_net = true;
    CHECK(!any_net);
    run_pipeline(ws, base, 7, PipelineStep::TrainAnnot);
    for (const auto& e : std::filesystem::recursive_directory_iterator(cfg.out_dir))
        if (e.path().filename().string().rfind("annot-", 0) == 0) any_net = true;
    CHECK(any_net);
    std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("micro ablation over two cells writes reports and survives a bad cell") {
    ExperimentConfig cfg = micro_cfg(fresh_dir("pp_abl_test"));
    cfg.cells = {"base", "no-prior"};
    const AblationResult res = run_ablation(cfg);
    REQUIRE(res.rows.size() == 2);
    for (const auto& r : res.rows) CHECK(!r.failed);
    CHECK(std::filesystem::exists(res.rows_csv));
    CHECK(std::filesystem::exists(res.summary_csv));
    const auto back = read_rows_csv(res.rows_csv);
    CHECK(back.size() == 2);
    std::filesystem::remove_all(cfg.out_dir);
}
