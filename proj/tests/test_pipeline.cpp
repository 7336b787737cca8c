#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "m2se/pipeline.hpp"

using namespace m2se;
using namespace m2se::pipeline;
using nlohmann::json;

namespace {

const fs::path kSource = M2SE_SOURCE_DIR;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Toy run config with small model dims writing under a fresh temp directory.
json toy_json(const std::string& name) {
    const fs::path out = fs::temp_directory_path() / ("m2se_pipeline_" + name);
    fs::remove_all(out);
    return json{{"corpus_manifest", (kSource / "data" / "toy" / "manifest.json").string()},
                {"output_root", out.string()},
                {"seed", 7},
                {"plans", {{"stage1", {{"sample_budget", 6}}}}},
                {"model", {{"image_size", 64}, {"patch_size", 32}, {"d_vision", 8}, {"d_model", 16}, {"layers", 1},
                           {"d_ff", 32}}},
                {"adapter", {{"rank", 4}, {"alpha", 8.0}}},
                {"optim", {{"lr", 0.003}, {"epochs", 1}}},
                {"decode", {{"max_new_tokens", 24}}}};
}

RunConfig toy(const std::string& name) { return parse_run_config(toy_json(name).dump(), kSource); }

}  // namespace

TEST_CASE("run config parsing, round trip and validation") {
    const RunConfig c = toy("parse");
    CHECK(c.seed == 7);
    CHECK(c.model.seed == 7);
    CHECK(c.model.d_model == 16);
    CHECK(c.adapter->rank == 4);
    CHECK(c.tasks.size() == 5);
    const RunConfig back = parse_run_config(run_config_to_json(c), kSource);
    CHECK(run_config_to_json(back) == run_config_to_json(c));

    json j = toy_json("parse");
    j["no_such_key"] = 1;
    CHECK_THROWS_AS(parse_run_config(j.dump(), kSource), Error);

    j = toy_json("parse");
    j["adapter"] = nullptr;
    CHECK(!parse_run_config(j.dump(), kSource).adapter);

    j = toy_json("parse");
    j["tasks"] = {"MSA", "XYZ"};
    CHECK_THROWS_AS(parse_run_config(j.dump(), kSource), Error);
}

TEST_CASE("invalid configs fail before anything is written") {
    json j = toy_json("invalid");
    j["corpus_manifest"] = "/nonexistent/manifest.json";
    j["plans"] = {{"stage1", {{"task_rates", {{"ECPE", 1.0}}}}}};
    j["optim"]["lr"] = -1.0;
    const RunConfig c = parse_run_config(j.dump(), kSource);
    try {
        cmd_build_dataset(c);
        FAIL("expected Config");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
        const std::string msg = e.what();
        // Every problem is reported at once.
        CHECK(msg.find("manifest") != std::string::npos);
        CHECK(msg.find("ECPE") != std::string::npos);
        CHECK(msg.find("lr") != std::string::npos);
    }
    CHECK_THROWS_AS(cmd_plan(c), Error);
    CHECK_THROWS_AS(cmd_train(c), Error);
    CHECK(!fs::exists(c.output_root));
}

TEST_CASE("output root can be overridden from the environment") {
    const fs::path cfg = fs::temp_directory_path() / "m2se_pipeline_env.json";
    std::ofstream(cfg) << toy_json("env").dump();
    const fs::path other = fs::temp_directory_path() / "m2se_pipeline_env_override";
    ::setenv("M2SE_OUTPUT_ROOT", other.c_str(), 1);
    const RunConfig c = load_run_config(cfg);
    ::unsetenv("M2SE_OUTPUT_ROOT");
    CHECK(c.output_root == other);
    CHECK(load_run_config(cfg).output_root != other);
    fs::remove(cfg);
}

TEST_CASE("build-dataset is idempotent and plan dumps are stable") {
    const RunConfig c = toy("build");
    const auto s1 = cmd_build_dataset(c);
    const auto paths = output_paths(c);
    const std::string first = slurp(paths.records);
    const auto s2 = cmd_build_dataset(c);
    CHECK(slurp(paths.records) == first);
    CHECK(s1.records == 42);
    CHECK(s2.records == 42);
    CHECK(s1.rejections == 0);
    CHECK(s1.stats.shape_ok());
    CHECK(fs::exists(paths.stats));
    CHECK(fs::exists(paths.build_log));

    const std::string plan = cmd_plan(c);
    CHECK(plan == cmd_plan(c));
    CHECK(plan.find("published") != std::string::npos);
    const auto plans = json::parse(slurp(paths.plans));
    CHECK(plans["stage1"]["sample_budget"] == 6);

    const auto stats = json::parse(cmd_stats(c));
    CHECK(stats["per_task"]["ECPE"] == 6);
    fs::remove_all(c.output_root);
}

TEST_CASE("task filter restricts the built records") {
    json j = toy_json("filter");
    j["tasks"] = {"MSA", "ER"};
    const RunConfig c = parse_run_config(j.dump(), kSource);
    const auto s = cmd_build_dataset(c);
    CHECK(s.records == 20);
    CHECK(s.stats.per_task.at(TaskKind::FER) == 0);
    fs::remove_all(c.output_root);
}

TEST_CASE("resuming stage 2 reproduces the full run bit for bit") {
    const RunConfig c = toy("resume");
    cmd_build_dataset(c);
    const auto paths = output_paths(c);
    const auto full = cmd_train(c);
    REQUIRE(full.stages.size() == 2);
    CHECK(full.stages[0].items == 6);
    CHECK(full.stages[0].items_per_task.count(TaskKind::ERI) == 0);
    CHECK(full.stages[0].items_per_task.count(TaskKind::ECPE) == 0);
    CHECK(full.stages[1].items_per_task.count(TaskKind::FER) == 0);
    CHECK(full.adapter_parameters == 4 * (16 + 16) * 4 + 4 * (16 + 32) * 2);
    const std::string full_stage2 = slurp(paths.stage2_ckpt);

    const fs::path saved = fs::temp_directory_path() / "m2se_pipeline_stage1.ckpt";
    fs::copy_file(paths.stage1_ckpt, saved, fs::copy_options::overwrite_existing);
    fs::remove(paths.stage2_ckpt);
    const auto resumed = cmd_train(c, TrainOptions{2, saved});
    REQUIRE(resumed.stages.size() == 1);
    CHECK(slurp(paths.stage2_ckpt) == full_stage2);

    // One event per line, with a stage_done per stage of both runs.
    std::ifstream manifest(paths.manifest);
    int done = 0;
    for (std::string line; std::getline(manifest, line);) done += json::parse(line)["event"] == "stage_done";
    CHECK(done == 3);

    SUBCASE("a stage-2 checkpoint cannot seed stage 2") {
        CHECK_THROWS_AS(cmd_train(c, TrainOptions{2, paths.stage2_ckpt}), Error);
    }
    SUBCASE("a different stage-1 stream is refused") {
        json j = toy_json("resume");
        j["seed"] = 8;
        const RunConfig other = parse_run_config(j.dump(), kSource);
        CHECK_THROWS_AS(cmd_train(other, TrainOptions{2, saved}), Error);
    }
    SUBCASE("a changed vision encoder is refused while frozen") {
        auto m = model::load_checkpoint(saved);
        std::string meta;
        model::load_checkpoint(saved, &meta);
        m.param("vision.patch_b").value(0, 0) += 1.0;
        model::save_checkpoint(saved, m, meta);
        try {
            cmd_train(c, TrainOptions{2, saved});
            FAIL("expected FrozenViolation");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::FrozenViolation);
        }
    }
    SUBCASE("resume needs stage 2") { CHECK_THROWS_AS(cmd_train(c, TrainOptions{1, saved}), Error); }
    fs::remove(saved);
    fs::remove_all(c.output_root);
}

TEST_CASE("evaluate writes a well-formed report and rejects an empty test set") {
    const RunConfig c = toy("evaluate");
    cmd_build_dataset(c);
    const auto paths = output_paths(c);

    EvalOptions golden;
    golden.predictions = kSource / "tests" / "golden" / "predictions.jsonl";
    const auto report = cmd_evaluate(c, golden);
    CHECK(report.values.at("ER.acc") == doctest::Approx(0.6).epsilon(1e-12));
    const auto written = json::parse(slurp(paths.report_json));
    CHECK(written["values"]["ECPE.f1"] == report.values.at("ECPE.f1"));
    CHECK(fs::exists(paths.report_txt));

    EvalOptions nn = golden;
    nn.schemes = {evaluation::Acc2Scheme::NN};
    const auto only_nn = cmd_evaluate(c, nn);
    CHECK(only_nn.values.count("MSA.acc2_nn") == 1);
    CHECK(only_nn.values.count("MSA.acc2_np") == 0);

    const fs::path empty = fs::temp_directory_path() / "m2se_pipeline_empty.jsonl";
    std::ofstream(empty).close();
    EvalOptions e = golden;
    e.test_set = empty;
    try {
        cmd_evaluate(c, e);
        FAIL("expected UndefinedMetric");
    } catch (const Error& err) {
        CHECK(err.kind() == ErrorKind::UndefinedMetric);
    }
    fs::remove(empty);

    EvalOptions both = golden;
    both.checkpoint = paths.stage2_ckpt;
    CHECK_THROWS_AS(cmd_evaluate(c, both), Error);
    fs::remove_all(c.output_root);
}
