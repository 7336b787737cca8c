#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kSource = M2SE_SOURCE_DIR;
const fs::path kTmp = fs::temp_directory_path() / "m2se_cli_test";

struct Result {
    int code = -1;
    std::string out;
};

/// Runs the CLI with the output root redirected under kTmp/<root>.
Result cli(const std::string& args, const std::string& root = "default") {
    fs::create_directories(kTmp);
    const fs::path log = kTmp / "last.log";
    const std::string cmd = "M2SE_OUTPUT_ROOT='" + (kTmp / root).string() + "' '" + std::string(M2SE_CLI_PATH) +
                            "' " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::ostringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    return r;
}

std::string config(const std::string& name) { return "'" + (kSource / "configs" / name).string() + "'"; }

fs::path write_config(const std::string& name, const nlohmann::json& j) {
    fs::create_directories(kTmp);
    const fs::path p = kTmp / name;
    std::ofstream(p) << j.dump(2);
    return p;
}

}  // namespace

TEST_CASE("help and argument errors") {
    CHECK(cli("--help").code == 0);
    CHECK(cli("plan").code != 0);  // --config is required
    CHECK(cli("-c " + config("toy_t4.json") + " frobnicate").code != 0);
    CHECK(cli("-c " + config("toy_t4.json") + " --tasks MSA,XYZ plan").code != 0);
}

TEST_CASE("missing manifest fails without writing outputs") {
    const auto p = write_config("missing.json", {{"corpus_manifest", "/nonexistent/manifest.json"}});
    const auto r = cli("-c '" + p.string() + "' build-dataset", "missing");
    CHECK(r.code == 3);
    CHECK(r.out.find("corpus_manifest") != std::string::npos);
    CHECK(!fs::exists(kTmp / "missing"));
}

TEST_CASE("build-dataset prints counts and honours the task filter") {
    const auto all = cli("-c " + config("toy_t4.json") + " build-dataset", "build");
    CHECK(all.code == 0);
    CHECK(all.out.find("42") != std::string::npos);
    const auto stats = nlohmann::json::parse(cli("-c " + config("toy_t4.json") + " stats", "build").out);
    CHECK(stats["per_task"]["ECPE"] == 6);

    CHECK(cli("-c " + config("toy_t4.json") + " --tasks MSA,ER build-dataset", "filtered").code == 0);
    const auto filtered = nlohmann::json::parse(cli("-c " + config("toy_t4.json") + " stats", "filtered").out);
    CHECK(filtered["per_task"]["MSA"] == 10);
    CHECK(filtered["per_task"]["ER"] == 10);
    CHECK(filtered["per_task"]["FER"] == 0);
    CHECK(filtered["per_task"]["ECPE"] == 0);
}

TEST_CASE("rejected rows stop the build unless allowed") {
    const auto p = write_config("bad.json", {{"corpus_manifest", (kSource / "data" / "toy" / "manifest_bad.json").string()}});
    const auto strict = cli("-c '" + p.string() + "' build-dataset", "bad");
    CHECK(strict.code == 3);
    CHECK(strict.out.find("rejections 1") != std::string::npos);
    CHECK(cli("-c '" + p.string() + "' build-dataset --allow-rejects", "bad").code == 0);
    std::ifstream rej(kTmp / "bad" / "dataset" / "rejections.jsonl");
    std::string line;
    REQUIRE(std::getline(rej, line));
    CHECK(nlohmann::json::parse(line)["line"] == 12);
}

TEST_CASE("plans are reproducible and bad overrides are refused") {
    const auto a = cli("-c " + config("toy_t4.json") + " --seed 7 plan", "plan_a");
    const auto b = cli("-c " + config("toy_t4.json") + " --seed 7 plan", "plan_b");
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    std::ifstream fa(kTmp / "plan_a" / "plan" / "plans.json"), fb(kTmp / "plan_b" / "plan" / "plans.json");
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    CHECK(sa.str() == sb.str());
    CHECK(!sa.str().empty());

    const auto bad = write_config("bad_plan.json", {{"corpus_manifest", (kSource / "data" / "toy" / "manifest.json").string()},
                                                    {"plans", {{"stage2", {{"task_rates", {{"FER", 0.5}}}}}}}});
    const auto r = cli("-c '" + bad.string() + "' plan", "bad_plan");
    CHECK(r.code == 3);
    CHECK(r.out.find("FER") != std::string::npos);
}

TEST_CASE("evaluate scores a predictions file and refuses an empty test set") {
    REQUIRE(cli("-c " + config("toy_t4.json") + " build-dataset", "eval").code == 0);
    const std::string preds = "'" + (kSource / "tests" / "golden" / "predictions.jsonl").string() + "'";
    const auto r = cli("-c " + config("toy_t4.json") + " evaluate --predictions " + preds, "eval");
    CHECK(r.code == 0);
    const auto report = nlohmann::json::parse(std::ifstream(kTmp / "eval" / "eval" / "report.json"));
    CHECK(report["values"]["ECPE.f1"] == 0.5);
    CHECK(report["counts"]["ECPE.matched_pairs"] == 4);

    const auto nn = cli("-c " + config("toy_t4.json") + " evaluate --scheme nn --predictions " + preds, "eval");
    CHECK(nn.code == 0);
    const auto only_nn = nlohmann::json::parse(std::ifstream(kTmp / "eval" / "eval" / "report.json"));
    CHECK(!only_nn["values"].contains("MSA.acc2_np"));

    std::ofstream(kTmp / "empty.jsonl").close();
    const auto empty = cli("-c " + config("toy_t4.json") + " evaluate --predictions " + preds + " --test-set '" +
                               (kTmp / "empty.jsonl").string() + "'",
                           "eval");
    CHECK(empty.code == 8);

    CHECK(cli("-c " + config("toy_t4.json") + " evaluate --predictions " + preds + " --checkpoint x.ckpt", "eval").code !=
          0);
}

TEST_CASE("train needs a built dataset") {
    const auto r = cli("-c " + config("toy_t4.json") + " train", "untrained");
    CHECK(r.code == 4);
    CHECK(cli("-c " + config("toy_t4.json") + " train --stage 3", "untrained").code != 0);
}
