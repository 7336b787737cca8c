// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "m2se/evaluation.hpp"
#include "m2se/pipeline.hpp"
#include "m2se/scheduler.hpp"
#include "m2se/trainer.hpp"
#include "oracles.hpp"

using namespace m2se;
using m2se::dataset::TaskRecord;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Pinned tolerances and limits.
constexpr double kProjectTol = 1e-9;
constexpr double kGradRelTol = 1e-4;
constexpr double kMetricTol = 1e-12;
constexpr double kOverfitRatio = 0.10;
constexpr std::size_t kOverfitSteps = 200;
constexpr double kLimit1 = 10.0, kLimit2 = 5.0, kLimit8 = 300.0;  // seconds

const fs::path kSource = M2SE_SOURCE_DIR;
const fs::path kTmp = fs::temp_directory_path() / "m2se_acceptance";

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<dataset::TaskRecord> build_toy() {
    const auto ingest = dataset::ingest_corpus(kSource / "data" / "toy" / "manifest.json");
    dataset::MockSceneDescriber describer;
    dataset::MockReasonInferencer reasoner;
    dataset::BuildDeps deps;
    deps.describer = &describer;
    deps.reasoner = &reasoner;
    return dataset::build_corpus(ingest.samples, {kAllTasks.begin(), kAllTasks.end()}, deps).records;
}

// 1 ------------------------------------------------------------------------------------

Outcome au_peaks() {
    Outcome o;
    std::mt19937_64 rng(1001);
    for (int i = 0; i < 1000; ++i) {
        const auto tracks = oracle::random_tracks(rng);
        const auto expected = oracle::brute_peak(tracks);
        const auto got = au::select_final_peak(tracks);
        o.require(got.character_id == expected->character && got.frame_index == expected->frame &&
                      got.score == expected->score,
                  "select_final_peak differs on case " + std::to_string(i));
        for (const auto& t : tracks) {
            const auto single = oracle::brute_peak({t});
            const auto p = au::find_peak_frame(t);
            o.require(p.frame_index == single->frame && p.score == single->score,
                      "find_peak_frame differs on case " + std::to_string(i));
        }
    }
    o.detail = o.pass ? "1000 cases match the brute-force scan" : o.detail;
    return o;
}

// 2 ------------------------------------------------------------------------------------

Outcome common_aus() {
    Outcome o;
    std::mt19937_64 rng(1002);
    const auto table = au::default_emotion_au_table();
    auto subset = [](const std::set<std::string>& a, const std::set<std::string>& b) {
        return std::includes(b.begin(), b.end(), a.begin(), a.end());
    };
    for (int i = 0; i < 1000; ++i) {
        const auto tracks = oracle::random_tracks(rng, 1, 1);
        const auto& frame = tracks.front().frames.front();
        const auto e = kAllEmotions[rng() % 7];
        const double lo = 0.5 * static_cast<double>(rng() % 8);
        const auto got = au::common_aus(frame, e, table, lo);
        std::set<std::string> present;
        for (const auto& [k, v] : frame.au_intensities) {
            if (v > lo) present.insert(k);
        }
        o.require(got == oracle::brute_common(frame, table.at(e), lo), "intersection differs on case " + std::to_string(i));
        o.require(subset(got, present) && subset(got, table.at(e)), "not a subset of both operands");
        o.require(subset(au::common_aus(frame, e, table, lo + 0.5), got), "not monotone in presence_threshold");
    }
    o.detail = o.pass ? "1000 cases: intersection, subset and monotonicity hold" : o.detail;
    return o;
}

// 3 ------------------------------------------------------------------------------------

Outcome dataset_build() {
    Outcome o;
    fs::create_directories(kTmp);
    const auto a = build_toy();
    const auto b = build_toy();
    dataset::write_records(kTmp / "a.jsonl", a);
    dataset::write_records(kTmp / "b.jsonl", b);
    o.require(slurp(kTmp / "a.jsonl") == slurp(kTmp / "b.jsonl"), "record files differ between builds");
    for (const auto& r : a) o.require(dataset::validate_record(r).empty(), r.record_id + " fails validation");

    const auto stats = dataset::dataset_stats(a);
    const json matrix = json::parse(slurp(kSource / "tests" / "golden" / "task_matrix.json"));
    for (TaskKind t : kAllTasks) {
        const std::string name(to_string(t));
        o.require(stats.per_task.at(t) == matrix["per_task"][name].get<std::size_t>(), name + " count differs");
    }
    o.require(stats.distinct_samples == matrix["distinct_samples"].get<std::size_t>(), "distinct count differs");
    o.require(stats.shape_ok(), "per-task / distinct / summed shape violated");
    if (o.pass) {
        std::ostringstream d;
        d << a.size() << " records, byte-identical, matrix";
        for (TaskKind t : kAllTasks) d << " " << to_string(t) << "=" << stats.per_task.at(t);
        o.detail = d.str();
    }
    return o;
}

// 4 ------------------------------------------------------------------------------------

Outcome scheduler_streams() {
    Outcome o;
    std::vector<TaskRecord> pool;
    const std::map<TaskKind, int> sizes = {{TaskKind::MSA, 8000}, {TaskKind::ER, 6000}, {TaskKind::FER, 6000},
                                           {TaskKind::ERI, 5000}, {TaskKind::ECPE, 5000}};
    for (const auto& [t, n] : sizes) {
        for (int i = 0; i < n; ++i) {
            TaskRecord r;
            r.task = t;
            r.record_id = "p" + std::to_string(i) + ":" + to_lower(to_string(t));
            r.task_identifier = std::string(task_identifier(t));
            r.query = "q";
            r.response = "a";
            r.source_sample_id = "p" + std::to_string(i);
            pool.push_back(std::move(r));
        }
    }
    const auto plans = scheduler::default_plans();
    const auto s1 = scheduler::assign_stream(pool, plans.stage1);
    std::map<TaskKind, std::size_t> c1, c2;
    for (const auto& i : s1) ++c1[i.record.task];
    o.require(c1[TaskKind::MSA] == 6000 && c1[TaskKind::FER] == 6000 && c1[TaskKind::ER] == 3000,
              "stage-1 counts differ from 6000/6000/3000");
    o.require(c1[TaskKind::ERI] == 0 && c1[TaskKind::ECPE] == 0, "stage 1 contains ERI or ECPE");
    const auto s2 = scheduler::assign_stream(scheduler::remaining_records(pool, s1), plans.stage2);
    for (const auto& i : s2) ++c2[i.record.task];
    o.require(c2[TaskKind::FER] == 0, "stage 2 contains FER");
    o.require(scheduler::stream_to_jsonl(s1) == scheduler::stream_to_jsonl(scheduler::assign_stream(pool, plans.stage1)),
              "stage-1 stream not reproducible");
    o.require(scheduler::stream_to_jsonl(s2) ==
                  scheduler::stream_to_jsonl(scheduler::assign_stream(scheduler::remaining_records(pool, s1), plans.stage2)),
              "stage-2 stream not reproducible");
    if (o.pass) {
        o.detail = "stage 1 MSA/FER/ER = " + std::to_string(c1[TaskKind::MSA]) + "/" + std::to_string(c1[TaskKind::FER]) +
                   "/" + std::to_string(c1[TaskKind::ER]) + ", stage 2 " + std::to_string(s2.size()) +
                   " items without FER, streams reproducible";
    }
    return o;
}

// 5 ------------------------------------------------------------------------------------

Outcome model_numerics() {
    Outcome o;
    std::mt19937_64 rng(1005);
    std::normal_distribution<double> nd(0.0, 1.0);
    auto randm = [&](Eigen::Index r, Eigen::Index c) {
        model::Matrix m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
        return m;
    };

    model::ModelConfig wide;
    wide.encoder.d_vision = 64;
    wide.d_model = 64;
    const model::ToyModel mw(wide);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const model::VisualTokens v{randm(1 + static_cast<Eigen::Index>(rng() % 30), 64), "rand"};
        const auto expected = oracle::naive_matmul(v.tokens, mw.param("projector.w_v").value);
        worst = std::max(worst, (model::project(v, mw).tokens - expected).cwiseAbs().maxCoeff());
    }
    o.require(worst <= kProjectTol, "projection error " + std::to_string(worst));

    const model::ProjectedTokens pv{randm(9, 64)};
    const model::TextTokens tt = model::embed_text({1, 40, 50, 60, 3}, mw);
    const auto fused = model::fuse(pv, tt);
    const model::Matrix head = fused.x.topRows(static_cast<Eigen::Index>(fused.boundary));
    const model::Matrix tail = fused.x.bottomRows(fused.x.rows() - static_cast<Eigen::Index>(fused.boundary));
    o.require(fused.boundary == 9 &&
                  std::memcmp(head.data(), pv.tokens.data(), sizeof(double) * static_cast<std::size_t>(head.size())) == 0 &&
                  std::memcmp(tail.data(), tt.embedded.data(), sizeof(double) * static_cast<std::size_t>(tail.size())) == 0,
              "fuse does not round-trip bit-exactly");

    model::ModelConfig toy;
    toy.encoder.image_size = 64;
    toy.encoder.patch_size = 32;
    toy.encoder.d_vision = 6;
    toy.d_model = 8;
    toy.layers = 1;
    toy.d_ff = 12;
    toy.seed = 4;
    model::ToyModel m(toy);
    model::GrayImage img{40, 40, {}};
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1600; ++i) img.pixels.push_back(u(rng));
    TaskRecord rec;
    rec.record_id = "g:er";
    rec.task = TaskKind::ER;
    rec.task_identifier = "<emotion>";
    rec.query = "Utterance: \"fine\"";
    rec.response = "neutral";
    const auto ex = model::make_example(rec, std::make_shared<const model::MediaInput>(model::media_from_frames({img}, toy.encoder)));
    m.zero_grad();
    model::loss_and_grad(m, ex);
    const model::Matrix analytic = m.param("projector.w_v").grad;
    model::Matrix numeric(analytic.rows(), analytic.cols());
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        double& w = m.param("projector.w_v").value.data()[i];
        const double keep = w;
        w = keep + h;
        const double up = model::loss(m, ex);
        w = keep - h;
        const double down = model::loss(m, ex);
        w = keep;
        numeric.data()[i] = (up - down) / (2 * h);
    }
    const double rel = (analytic - numeric).norm() / numeric.norm();
    o.require(rel <= kGradRelTol, "W_v gradient relative error " + std::to_string(rel));
    if (o.pass) {
        std::ostringstream d;
        d << "projection max err " << worst << ", fuse bit-exact, W_v grad rel err " << rel;
        o.detail = d.str();
    }
    return o;
}

// 6 ------------------------------------------------------------------------------------

/// Σ r * (d_in + d_out) over every targeted block linear, computed from layer shapes.
std::size_t adapter_oracle(const model::ModelConfig& c, const model::AdapterConfig& a) {
    const std::map<std::string, std::pair<int, int>> shapes = {
        {"attn_q", {c.d_model, c.d_model}}, {"attn_k", {c.d_model, c.d_model}}, {"attn_v", {c.d_model, c.d_model}},
        {"attn_o", {c.d_model, c.d_model}}, {"mlp_in", {c.d_model, c.d_ff}},    {"mlp_out", {c.d_ff, c.d_model}}};
    std::size_t n = 0;
    for (const auto& t : a.targets) {
        n += static_cast<std::size_t>(a.rank * (shapes.at(t).first + shapes.at(t).second));
    }
    return n * static_cast<std::size_t>(c.layers);
}

Outcome training_contracts() {
    Outcome o;
    TaskRecord rec;
    rec.record_id = "o:er";
    rec.task = TaskKind::ER;
    rec.task_identifier = "<emotion>";
    rec.query = "Utterance: \"Stop reading my messages!\"";
    rec.response = "anger";
    rec.media = {"media/s10.pgm#frame=1"};
    rec.source_sample_id = "o";
    scheduler::TrainingItem item;
    item.record = rec;

    // Overfit one batch.
    model::ToyModel m = model::apply_adapters(model::ToyModel(model::ModelConfig{}), model::AdapterConfig{});
    const auto vision_before = m.params();
    model::MediaCache media(kSource / "data" / "toy", m.config().encoder);
    model::OptimConfig opt;
    opt.lr = 1e-2;
    opt.schedule = model::LrSchedule::Constant;
    opt.epochs = static_cast<int>(kOverfitSteps);
    const auto report = model::train_stage({item}, m, opt, media);
    const double first = report.loss_trace.front();
    const double last = report.loss_trace.back();
    o.require(report.steps <= kOverfitSteps && last < kOverfitRatio * first,
              "loss " + std::to_string(first) + " -> " + std::to_string(last));

    // Vision bytes unchanged.
    bool vision_same = true;
    for (std::size_t i = 0; i < m.params().size(); ++i) {
        const auto& p = m.params()[i];
        if (p.group != model::ParamGroup::Vision) continue;
        vision_same = vision_same && std::memcmp(p.value.data(), vision_before[i].value.data(),
                                                 sizeof(double) * static_cast<std::size_t>(p.value.size())) == 0;
    }
    o.require(vision_same, "vision parameters changed while frozen");

    // Adapter count against the shape oracle, default and reduced dims.
    const std::size_t adapters = m.parameter_count(model::ParamGroup::Adapter);
    const std::size_t expected = adapter_oracle(m.config(), model::AdapterConfig{});
    o.require(adapters == expected, "adapter count " + std::to_string(adapters) + " != " + std::to_string(expected));
    model::ModelConfig other;
    other.d_model = 16;
    other.d_ff = 40;
    other.layers = 3;
    model::AdapterConfig partial{4, 8.0, {"attn_q", "mlp_out"}};
    o.require(model::apply_adapters(model::ToyModel(other), partial).parameter_count(model::ParamGroup::Adapter) ==
                  adapter_oracle(other, partial),
              "adapter count differs on reduced dims");

    // The run manifest records the fine-tuning values with their provenance.
    const fs::path root = kTmp / "c6";
    fs::remove_all(root);
    const json cfg = {{"corpus_manifest", (kSource / "data" / "toy" / "manifest.json").string()},
                      {"output_root", root.string()},
                      {"plans", {{"stage1", {{"sample_budget", 3}}}, {"stage2", {{"sample_budget", 3}}}}},
                      {"model", {{"image_size", 64}, {"patch_size", 32}, {"d_vision", 8}, {"d_model", 16},
                                 {"layers", 1}, {"d_ff", 32}}},
                      {"optim", {{"epochs", 1}}}};
    const auto rc = pipeline::parse_run_config(cfg.dump(), kSource);
    pipeline::cmd_build_dataset(rc);
    pipeline::cmd_train(rc);
    std::ifstream manifest(pipeline::output_paths(rc).manifest);
    std::string line;
    std::getline(manifest, line);
    const json hp = json::parse(line)["hyperparameters"];
    o.require(hp["adapter_rank"]["value"] == 8 && hp["adapter_rank"]["source"] == "published", "adapter rank not recorded");
    o.require(hp["adapter_alpha"]["value"] == 32.0 && hp["adapter_alpha"]["source"] == "published",
              "adapter alpha not recorded");
    o.require(hp["lr"]["value"] == 1e-5 && hp["epochs"]["value"] == 1 && hp["epochs"]["source"] == "override",
              "optimizer values not recorded");
    o.require(hp["schedule"]["value"] == "warmup_cosine", "schedule not recorded");
    fs::remove_all(root);

    if (o.pass) {
        std::ostringstream d;
        d << "overfit " << first << " -> " << last << " in " << report.steps << " steps, vision bytes unchanged, adapters "
          << adapters << " = oracle, manifest records r=8 alpha=32";
        o.detail = d.str();
    }
    return o;
}

// 7 ------------------------------------------------------------------------------------

Outcome metrics() {
    Outcome o;
    std::mt19937_64 rng(1007);
    int np_differ = 0;
    for (int b = 0; b < 500; ++b) {
        // Scored MSA with zeros present.
        std::vector<std::optional<SentimentClass>> sp;
        std::vector<double> sg;
        const int n = 2 + static_cast<int>(rng() % 40);
        for (int i = 0; i < n; ++i) {
            sg.push_back(i == 0 ? 0.0 : i == 1 ? 1.5 : 0.5 * static_cast<double>(static_cast<int>(rng() % 9) - 4));
            const auto k = rng() % 4;
            sp.push_back(k == 3 ? std::nullopt : std::optional<SentimentClass>(static_cast<SentimentClass>(k)));
        }
        const double nn = evaluation::acc2(sp, sg, evaluation::Acc2Scheme::NN);
        const double np = evaluation::acc2(sp, sg, evaluation::Acc2Scheme::NP);
        o.require(std::abs(nn - oracle::acc2(sp, sg, false)) <= kMetricTol, "acc2 N/N differs");
        o.require(std::abs(np - oracle::acc2(sp, sg, true)) <= kMetricTol, "acc2 N/P differs");
        long z = 0, zr = 0, r = 0, rr = 0;
        for (std::size_t i = 0; i < sg.size(); ++i) {
            const bool ok = sp[i] && ((*sp[i] == SentimentClass::Negative) == (sg[i] < 0));
            (sg[i] == 0.0 ? z : r) += 1;
            (sg[i] == 0.0 ? zr : rr) += ok;
        }
        o.require((nn != np) == (z > 0 && zr * r != rr * z), "N/N vs N/P difference rule violated");
        np_differ += nn != np;

        // Seven-class ER.
        std::vector<EmotionLabel> eg;
        std::vector<std::optional<EmotionLabel>> ep;
        const auto m = 1 + rng() % 50;
        for (std::size_t i = 0; i < m; ++i) {
            eg.push_back(kAllEmotions[rng() % 7]);
            const auto k = rng() % 9;
            ep.push_back(k == 8 ? std::nullopt : std::optional<EmotionLabel>(k == 7 ? eg.back() : kAllEmotions[k]));
        }
        const auto es = oracle::emotion_scores(ep, eg);
        o.require(std::abs(evaluation::accuracy(ep, eg) - es.accuracy) <= kMetricTol, "accuracy differs");
        o.require(std::abs(evaluation::weighted_f1(ep, eg) - es.weighted_f1) <= kMetricTol, "weighted_f1 differs");

        // Cause pairs, at most 20 per conversation.
        std::vector<evaluation::ConversationPairs> convs(1 + rng() % 5);
        std::vector<std::pair<std::vector<oracle::Pair>, std::vector<oracle::Pair>>> plain;
        auto pair = [&] {
            return oracle::Pair{"u" + std::to_string(rng() % 5), "u" + std::to_string(rng() % 5), kAllEmotions[rng() % 7]};
        };
        for (auto& c : convs) {
            const auto ng = 1 + rng() % 20, np2 = rng() % 21;
            for (std::size_t i = 0; i < ng; ++i) c.gold.push_back(pair());
            for (std::size_t i = 0; i < np2; ++i) c.predicted.push_back(rng() % 2 ? c.gold[rng() % c.gold.size()] : pair());
            plain.emplace_back(c.predicted, c.gold);
        }
        const auto want = oracle::pair_scores(plain);
        const auto got = evaluation::ecpe_scores(convs);
        o.require(std::abs(got.precision - want.precision) <= kMetricTol && std::abs(got.recall - want.recall) <= kMetricTol &&
                      std::abs(got.f1 - want.f1) <= kMetricTol && std::abs(got.weighted_f1 - want.weighted_f1) <= kMetricTol,
                  "ecpe_scores differ on bundle " + std::to_string(b));
    }
    o.require(np_differ > 0, "no bundle exercised a N/N vs N/P difference");
    if (o.pass) o.detail = "500 bundles within 1e-12; N/N != N/P on " + std::to_string(np_differ) + " of them";
    return o;
}

// 8 ------------------------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& root, const fs::path& log) {
    const std::string cmd = "M2SE_OUTPUT_ROOT='" + root.string() + "' '" + std::string(M2SE_CLI_PATH) + "' " + args +
                            " >> '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::set<std::string> stream_tasks(const fs::path& p) {
    std::set<std::string> out;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) out.insert(json::parse(line)["task"].get<std::string>());
    }
    return out;
}

bool well_formed(const json& r) {
    if (r.value("unit", "") != "fraction" || !r["values"].is_object() || r["values"].empty()) return false;
    for (const auto& [k, v] : r["values"].items()) {
        if (!v.is_number() || v.get<double>() < 0.0 || v.get<double>() > 1.0) return false;
    }
    for (const char* k : {"MSA.acc2_nn", "MSA.acc2_np", "ER.acc", "ER.weighted_f1", "ECPE.f1", "ECPE.weighted_f1"}) {
        if (!r["values"].contains(k)) return false;
    }
    return r["counts"].is_object();
}

Outcome end_to_end() {
    Outcome o;
    const std::map<std::string, std::set<std::string>> expected = {
        {"t4", {"MSA", "ER", "ERI", "ECPE"}}, {"t3", {"ER", "ERI", "ECPE"}}, {"t1", {"ER"}}};
    std::ostringstream d;
    for (const auto& [name, tasks] : expected) {
        const fs::path root = kTmp / ("e2e_" + name);
        fs::remove_all(root);
        fs::create_directories(root);
        const fs::path log = root / "cli.log";
        const std::string cfg = "-c '" + (kSource / "configs" / ("toy_" + name + ".json")).string() + "' ";
        for (const char* cmd : {"build-dataset", "plan --quiet", "train", "evaluate"}) {
            const int code = run_cli(cfg + cmd, root, log);
            o.require(code == 0, name + " " + cmd + " exited " + std::to_string(code) + " (see " + log.string() + ")");
        }
        if (!o.pass) return o;
        const auto s1 = stream_tasks(root / "train" / "stream_stage1.jsonl");
        const auto s2 = stream_tasks(root / "train" / "stream_stage2.jsonl");
        o.require(s2 == tasks, name + " stage 2 ran an unexpected task set");
        o.require(s1.count("ERI") == 0 && s1.count("ECPE") == 0 && s2.count("FER") == 0, name + " stage task leak");
        json report;
        try {
            report = json::parse(slurp(root / "eval" / "report.json"));
        } catch (const json::exception&) {
        }
        o.require(well_formed(report), name + " report is not a well-formed MetricReport");
        d << name << " stage 2 {";
        bool first = true;
        for (const auto& t : s2) {
            d << (first ? "" : ",") << t;
            first = false;
        }
        d << "} ";
    }
    if (o.pass) o.detail = d.str() + "reports well-formed";
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double limit;  // seconds, 0 for none
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "AU oracle equivalence", kLimit1, au_peaks},
        {2, "common AU properties", kLimit2, common_aus},
        {3, "dataset determinism and schema", 0, dataset_build},
        {4, "scheduler exactness", 0, scheduler_streams},
        {5, "projection, fusion and gradient numerics", 0, model_numerics},
        {6, "training contracts", 0, training_contracts},
        {7, "metric oracles", 0, metrics},
        {8, "end-to-end smoke (t4, t3, t1)", kLimit8, end_to_end},
    };
    fs::create_directories(kTmp);
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.limit > 0 && secs >= c.limit) {
            o.pass = false;
            o.detail += "; took " + std::to_string(secs) + " s, limit " + std::to_string(c.limit) + " s";
        }
        failed += !o.pass;
        std::printf("%s  %d. %s (%.2f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
