#include "m2se/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace m2se::pipeline {

using nlohmann::json;

namespace {

const std::set<std::string> kTopLevelKeys = {
    "corpus_manifest", "output_root", "tasks", "au", "sentiment", "reason_generator", "plans", "seed",
    "model", "adapter", "optim", "decode", "test_set",
};

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << text;
}

std::string now_utc() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string schedule_name(model::LrSchedule s) {
    return s == model::LrSchedule::Constant ? "constant" : "warmup_cosine";
}

au::EmotionAUTable table_for(const RunConfig& c) {
    return c.emotion_au_table ? au::load_emotion_au_table(*c.emotion_au_table) : au::default_emotion_au_table();
}

au::AULexicon lexicon_for(const RunConfig& c) {
    return c.au_lexicon ? au::load_au_lexicon(*c.au_lexicon) : au::default_au_lexicon();
}

model::ToyModel fresh_model(const RunConfig& c) {
    model::ToyModel m(c.model);
    if (c.adapter) m = model::apply_adapters(std::move(m), *c.adapter);
    return m;
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) h = (h ^ ch) * 1099511628211ULL;
    return h;
}

json items_json(const std::map<TaskKind, std::size_t>& items) {
    json j = json::object();
    for (const auto& [t, n] : items) j[std::string(to_string(t))] = n;
    return j;
}

// Hyperparameters with their origin, for the run manifest.
json hyperparameters(const RunConfig& c) {
    const model::OptimConfig d;
    const model::AdapterConfig da;
    const model::ModelConfig dm;
    auto entry = [](auto value, bool is_default, const char* when_default) {
        return json{{"value", value}, {"source", is_default ? when_default : "override"}};
    };
    json j{
        {"lr", entry(c.optim.lr, c.optim.lr == d.lr, "published")},
        {"epochs", entry(c.optim.epochs, c.optim.epochs == d.epochs, "published")},
        {"schedule", entry(schedule_name(c.optim.schedule), c.optim.schedule == d.schedule, "published")},
        {"warmup_ratio", entry(c.optim.warmup_ratio, c.optim.warmup_ratio == d.warmup_ratio, "chosen default")},
        {"grad_clip", entry(c.optim.grad_clip, c.optim.grad_clip == d.grad_clip, "chosen default")},
        {"image_size", entry(c.model.encoder.image_size, c.model.encoder.image_size == dm.encoder.image_size,
                             "published")},
        {"freeze_vision", entry(c.model.freeze_vision, c.model.freeze_vision == dm.freeze_vision, "published")},
    };
    if (c.adapter) {
        j["adapter_rank"] = entry(c.adapter->rank, c.adapter->rank == da.rank, "published");
        j["adapter_alpha"] = entry(c.adapter->alpha, c.adapter->alpha == da.alpha, "published");
        j["adapter_targets"] = entry(c.adapter->targets, c.adapter->targets == da.targets, "chosen default");
    }
    return j;
}

void append_manifest(const fs::path& path, const json& event) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << event.dump() << '\n';
}

std::string stream_digest(const std::vector<scheduler::TrainingItem>& stream) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(scheduler::stream_to_jsonl(stream))));
    return buf;
}

}  // namespace

// Config ------------------------------------------------------------------------

RunConfig parse_run_config(const std::string& json_text, const fs::path& base_dir) {
    RunConfig c;
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, std::string("run config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::Config, "run config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!kTopLevelKeys.contains(key)) fail(ErrorKind::Config, "unknown run config key '" + key + "'");
    }

    try {
        if (j.contains("corpus_manifest")) {
            c.corpus_manifest = resolve(base_dir, j["corpus_manifest"].get<std::string>());
        }
        c.output_root = resolve(base_dir, j.value("output_root", std::string("out")));
        if (j.contains("tasks")) {
            c.tasks.clear();
            for (const auto& t : j["tasks"]) c.tasks.insert(task_from_string(t.get<std::string>()));
        }
        if (j.contains("au")) {
            const json& a = j["au"];
            if (a.contains("emotion_au_table")) c.emotion_au_table = resolve(base_dir, a["emotion_au_table"]);
            if (a.contains("lexicon")) c.au_lexicon = resolve(base_dir, a["lexicon"]);
            c.presence_threshold = a.value("presence_threshold", c.presence_threshold);
        }
        if (j.contains("sentiment")) {
            c.sentiment.negative_below = j["sentiment"].value("negative_below", c.sentiment.negative_below);
            c.sentiment.positive_above = j["sentiment"].value("positive_above", c.sentiment.positive_above);
        }
        if (j.contains("reason_generator")) {
            const std::string g = j["reason_generator"].get<std::string>();
            if (g != "mock" && g != "none") fail(ErrorKind::Config, "reason_generator must be \"mock\" or \"none\"");
            c.reason_generator = g == "mock";
        }
        if (j.contains("plans")) c.plan_overrides = j["plans"].dump();
        c.seed = j.value("seed", c.seed);

        json m = j.value("model", json::object());
        if (!m.contains("seed")) m["seed"] = c.seed;
        c.model = model::model_config_from_json(m.dump());

        if (j.contains("adapter")) {
            if (j["adapter"].is_null()) {
                c.adapter.reset();
            } else {
                const json& a = j["adapter"];
                c.adapter->rank = a.value("rank", c.adapter->rank);
                c.adapter->alpha = a.value("alpha", c.adapter->alpha);
                if (a.contains("targets")) c.adapter->targets = a["targets"].get<std::vector<std::string>>();
            }
        }
        if (j.contains("optim")) {
            const json& o = j["optim"];
            c.optim.lr = o.value("lr", c.optim.lr);
            c.optim.epochs = o.value("epochs", c.optim.epochs);
            c.optim.warmup_ratio = o.value("warmup_ratio", c.optim.warmup_ratio);
            c.optim.grad_clip = o.value("grad_clip", c.optim.grad_clip);
            if (o.contains("schedule")) {
                const std::string s = o["schedule"].get<std::string>();
                if (s == "constant") c.optim.schedule = model::LrSchedule::Constant;
                else if (s == "warmup_cosine") c.optim.schedule = model::LrSchedule::WarmupCosine;
                else fail(ErrorKind::Config, "unknown lr schedule '" + s + "'");
            }
        }
        if (j.contains("decode")) {
            const json& d = j["decode"];
            c.decode.greedy = d.value("greedy", c.decode.greedy);
            c.decode.temperature = d.value("temperature", c.decode.temperature);
            c.decode.max_new_tokens = d.value("max_new_tokens", c.decode.max_new_tokens);
            c.decode.seed = d.value("seed", c.seed);
        } else {
            c.decode.seed = c.seed;
        }
        if (j.contains("test_set")) c.test_set = resolve(base_dir, j["test_set"].get<std::string>());
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, std::string("run config: ") + e.what());
    }
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Config, "cannot open run config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    RunConfig c = parse_run_config(ss.str(), fs::absolute(path).parent_path());
    if (const char* env = std::getenv("M2SE_OUTPUT_ROOT"); env != nullptr && *env != '\0') {
        c.output_root = fs::absolute(env).lexically_normal();
    }
    return c;
}

std::string run_config_to_json(const RunConfig& c) {
    json tasks = json::array();
    for (TaskKind t : c.tasks) tasks.push_back(std::string(to_string(t)));
    json au{{"presence_threshold", c.presence_threshold}};
    if (c.emotion_au_table) au["emotion_au_table"] = c.emotion_au_table->string();
    if (c.au_lexicon) au["lexicon"] = c.au_lexicon->string();
    json j{
        {"corpus_manifest", c.corpus_manifest.string()},
        {"output_root", c.output_root.string()},
        {"tasks", tasks},
        {"au", au},
        {"sentiment", {{"negative_below", c.sentiment.negative_below}, {"positive_above", c.sentiment.positive_above}}},
        {"reason_generator", c.reason_generator ? "mock" : "none"},
        {"plans", json::parse(c.plan_overrides)},
        {"seed", c.seed},
        {"model", json::parse(model::model_config_to_json(c.model))},
        {"optim",
         {{"lr", c.optim.lr},
          {"epochs", c.optim.epochs},
          {"schedule", schedule_name(c.optim.schedule)},
          {"warmup_ratio", c.optim.warmup_ratio},
          {"grad_clip", c.optim.grad_clip}}},
        {"decode",
         {{"greedy", c.decode.greedy},
          {"temperature", c.decode.temperature},
          {"max_new_tokens", c.decode.max_new_tokens},
          {"seed", c.decode.seed}}},
    };
    j["adapter"] = c.adapter ? json{{"rank", c.adapter->rank}, {"alpha", c.adapter->alpha}, {"targets", c.adapter->targets}}
                             : json(nullptr);
    if (c.test_set) j["test_set"] = c.test_set->string();
    return j.dump(2);
}

scheduler::ResolvedPlans resolve_plans(const RunConfig& c) {
    json overrides;
    try {
        overrides = json::parse(c.plan_overrides);
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, std::string("plan overrides: ") + e.what());
    }
    if (!overrides.is_object()) fail(ErrorKind::Config, "plan overrides must be a JSON object");
    if (!overrides.contains("seed") && c.seed != 0) overrides["seed"] = c.seed;
    return scheduler::default_plans(overrides.dump());
}

void validate(const RunConfig& c) {
    std::vector<std::string> problems;
    auto check = [&](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            problems.push_back(e.what());
        }
    };

    if (c.corpus_manifest.empty()) {
        problems.push_back("corpus_manifest is not set");
    } else if (!fs::is_regular_file(c.corpus_manifest)) {
        problems.push_back("corpus_manifest " + c.corpus_manifest.string() + " does not exist");
    }
    if (c.output_root.empty()) problems.push_back("output_root is not set");
    if (c.tasks.empty()) problems.push_back("no tasks selected");
    if (!std::isfinite(c.presence_threshold) || c.presence_threshold < 0.0) {
        problems.push_back("au.presence_threshold must be a finite value >= 0");
    }
    if (!(c.sentiment.negative_below <= c.sentiment.positive_above)) {
        problems.push_back("sentiment.negative_below must not exceed sentiment.positive_above");
    }
    check([&] { au::validate_lexicon(lexicon_for(c), table_for(c)); });
    check([&] { resolve_plans(c); });
    check([&] { fresh_model(c); });
    if (!std::isfinite(c.optim.lr) || c.optim.lr < 0.0) problems.push_back("optim.lr must be finite and >= 0");
    if (c.optim.epochs < 1) problems.push_back("optim.epochs must be >= 1");
    if (!(c.optim.warmup_ratio >= 0.0 && c.optim.warmup_ratio < 1.0)) {
        problems.push_back("optim.warmup_ratio must lie in [0, 1)");
    }
    if (!(c.optim.grad_clip >= 0.0)) problems.push_back("optim.grad_clip must be >= 0");
    if (!(c.decode.temperature > 0.0)) problems.push_back("decode.temperature must be > 0");
    if (c.decode.max_new_tokens < 1) problems.push_back("decode.max_new_tokens must be >= 1");

    if (!problems.empty()) {
        std::string msg = "invalid run config:";
        for (const auto& p : problems) msg += "\n  - " + p;
        fail(ErrorKind::Config, msg);
    }
}

OutputPaths output_paths(const RunConfig& c) {
    OutputPaths p;
    p.dataset_dir = c.output_root / "dataset";
    p.records = p.dataset_dir / "records.jsonl";
    p.stats = p.dataset_dir / "stats.json";
    p.rejections = p.dataset_dir / "rejections.jsonl";
    p.build_log = p.dataset_dir / "build.log";
    p.plan_dir = c.output_root / "plan";
    p.plans = p.plan_dir / "plans.json";
    p.train_dir = c.output_root / "train";
    p.stage1_ckpt = p.train_dir / "stage1.ckpt";
    p.stage2_ckpt = p.train_dir / "stage2.ckpt";
    p.manifest = p.train_dir / "manifest.jsonl";
    p.eval_dir = c.output_root / "eval";
    p.predictions = p.eval_dir / "predictions.jsonl";
    p.report_json = p.eval_dir / "report.json";
    p.report_txt = p.eval_dir / "report.txt";
    return p;
}

// Commands ------------------------------------------------------------------------

BuildSummary cmd_build_dataset(const RunConfig& c) {
    validate(c);
    const OutputPaths paths = output_paths(c);

    const dataset::IngestResult ingest = dataset::ingest_corpus(c.corpus_manifest);
    dataset::MockSceneDescriber describer;
    dataset::MockReasonInferencer reasoner;
    dataset::BuildDeps deps;
    deps.table = table_for(c);
    deps.lexicon = lexicon_for(c);
    deps.presence_threshold = c.presence_threshold;
    deps.sentiment = c.sentiment;
    if (c.reason_generator) {
        deps.describer = &describer;
        deps.reasoner = &reasoner;
    }
    const dataset::BuildOutcome outcome = dataset::build_corpus(ingest.samples, c.tasks, deps);

    for (const auto& r : outcome.records) {
        const auto problems = dataset::validate_record(r);
        if (!problems.empty()) fail(ErrorKind::Validation, r.record_id + ": " + problems.front());
    }
    BuildSummary summary;
    summary.stats = dataset::dataset_stats(outcome.records);
    if (!summary.stats.shape_ok()) {
        fail(ErrorKind::Validation, "task counts violate count <= distinct <= sum: " + dataset::stats_to_json(summary.stats));
    }
    summary.records = outcome.records.size();
    summary.rejections = ingest.rejections.size();
    summary.skipped = outcome.skipped.size();

    fs::create_directories(paths.dataset_dir);
    dataset::write_records(paths.records, outcome.records);
    write_file(paths.stats, dataset::stats_to_json(summary.stats) + "\n");
    std::string rej;
    for (const auto& r : ingest.rejections) rej += dataset::rejection_to_json_line(r) + "\n";
    write_file(paths.rejections, rej);
    std::ostringstream log;
    log << "samples " << ingest.samples.size() << ", records " << summary.records << ", rejections "
        << summary.rejections << ", skipped " << summary.skipped << "\n";
    for (const auto& s : outcome.skipped) log << "skip " << s << "\n";
    for (const auto& r : ingest.rejections) {
        log << "reject " << r.source << ":" << r.line << (r.sample_id.empty() ? "" : " " + r.sample_id) << ": "
            << r.reason << "\n";
    }
    write_file(paths.build_log, log.str());
    return summary;
}

std::string cmd_plan(const RunConfig& c) {
    validate(c);
    const OutputPaths paths = output_paths(c);
    const scheduler::ResolvedPlans plans = resolve_plans(c);
    fs::create_directories(paths.plan_dir);
    write_file(paths.plans, scheduler::plans_to_json(plans) + "\n");
    return scheduler::plans_to_text(plans);
}

TrainSummary cmd_train(const RunConfig& c, const TrainOptions& options) {
    validate(c);
    if (options.stage < 0 || options.stage > 2) fail(ErrorKind::Config, "--stage must be 1 or 2");
    if (options.resume && options.stage != 2) fail(ErrorKind::Config, "--resume requires --stage 2");
    const OutputPaths paths = output_paths(c);
    if (!fs::exists(paths.records)) {
        fail(ErrorKind::Io, "no records at " + paths.records.string() + "; run build-dataset first");
    }
    const std::vector<dataset::TaskRecord> records = dataset::read_records(paths.records);
    const scheduler::ResolvedPlans plans = resolve_plans(c);
    const std::vector<scheduler::TrainingItem> stream1 = scheduler::assign_stream(records, plans.stage1);
    const std::string digest1 = stream_digest(stream1);
    model::MediaCache media(c.corpus_manifest.parent_path(), c.model.encoder);

    fs::create_directories(paths.train_dir);
    if (options.stage != 2) std::ofstream(paths.manifest, std::ios::trunc);
    append_manifest(paths.manifest, {{"event", "start"},
                                     {"time", now_utc()},
                                     {"stage", options.stage == 0 ? json("both") : json(options.stage)},
                                     {"config", json::parse(run_config_to_json(c))},
                                     {"hyperparameters", hyperparameters(c)}});

    TrainSummary summary;
    auto run = [&](int stage_id, const std::vector<scheduler::TrainingItem>& stream, model::ToyModel& m,
                   const fs::path& ckpt, const json& metadata) {
        const fs::path stream_path = paths.train_dir / ("stream_stage" + std::to_string(stage_id) + ".jsonl");
        const fs::path loss_path = paths.train_dir / ("loss_stage" + std::to_string(stage_id) + ".jsonl");
        write_file(stream_path, scheduler::stream_to_jsonl(stream));
        std::ofstream loss_out(loss_path, std::ios::binary | std::ios::trunc);
        const model::TrainReport report = model::train_stage(
            stream, m, c.optim, media, [&](std::size_t step, double lr, double value, TaskKind task) {
                loss_out << json{{"step", step}, {"lr", lr}, {"loss", value}, {"task", to_string(task)}}.dump() << '\n';
            });
        model::save_checkpoint(ckpt, m, metadata.dump());

        StageSummary s;
        s.stage_id = stage_id;
        s.items = stream.size();
        for (const auto& item : stream) ++s.items_per_task[item.record.task];
        s.first_loss = report.loss_trace.front();
        s.last_loss = report.loss_trace.back();
        s.checkpoint = ckpt;
        summary.trainable_parameters = m.trainable_parameter_count();
        summary.adapter_parameters = m.parameter_count(model::ParamGroup::Adapter);
        json event{{"event", "stage_done"},
                   {"time", now_utc()},
                   {"stage", stage_id},
                   {"items", s.items},
                   {"items_per_task", items_json(s.items_per_task)},
                   {"steps", report.steps},
                   {"first_loss", s.first_loss},
                   {"last_loss", s.last_loss},
                   {"checkpoint", ckpt.string()},
                   {"trainable_parameters", summary.trainable_parameters},
                   {"adapter_parameters", summary.adapter_parameters}};
        if (m.adapters()) {
            event["expected_adapter_parameters"] = model::expected_adapter_parameters(m.config(), *m.adapters());
        }
        append_manifest(paths.manifest, event);
        summary.stages.push_back(std::move(s));
    };

    std::optional<model::ToyModel> m;
    if (options.stage != 2) {
        m = fresh_model(c);
        run(1, stream1, *m, paths.stage1_ckpt, {{"stage", 1}, {"stream_digest", digest1}});
        if (options.stage == 1) return summary;
    } else {
        const fs::path from = options.resume.value_or(paths.stage1_ckpt);
        std::string metadata;
        m = model::load_checkpoint(from, &metadata);
        const json meta = json::parse(metadata);
        if (meta.value("stage", 0) != 1) fail(ErrorKind::Config, from.string() + " is not a stage-1 checkpoint");
        if (meta.value("stream_digest", std::string()) != digest1) {
            fail(ErrorKind::Config, from.string() + " was trained on a different stage-1 stream than this config produces");
        }
        m->set_freeze_vision(c.model.freeze_vision);
        if (c.model.freeze_vision && !model::vision_matches_pretrained(*m)) {
            append_manifest(paths.manifest, {{"event", "abort"}, {"time", now_utc()}, {"reason", "frozen vision mismatch"}});
            fail(ErrorKind::FrozenViolation,
                 "vision encoder weights in " + from.string() + " differ from the pretrained weights but freeze_vision is set");
        }
    }

    const std::vector<dataset::TaskRecord> rest = scheduler::remaining_records(records, stream1);
    const std::vector<scheduler::TrainingItem> stream2 = scheduler::assign_stream(rest, plans.stage2);
    run(2, stream2, *m, paths.stage2_ckpt, {{"stage", 2}, {"stream_digest", stream_digest(stream2)}});
    return summary;
}

evaluation::MetricReport cmd_evaluate(const RunConfig& c, const EvalOptions& options) {
    validate(c);
    if (options.checkpoint && options.predictions) {
        fail(ErrorKind::Config, "pass either a checkpoint or a predictions file, not both");
    }
    if (options.schemes.empty()) fail(ErrorKind::Config, "no Acc2 scheme selected");
    const OutputPaths paths = output_paths(c);
    const fs::path test_path = options.test_set ? *options.test_set : c.test_set ? *c.test_set : paths.records;
    const std::vector<dataset::TaskRecord> gold = dataset::read_records(test_path);

    std::vector<evaluation::Prediction> predictions;
    if (options.predictions) {
        predictions = evaluation::read_predictions(*options.predictions);
    } else {
        const fs::path ckpt = options.checkpoint.value_or(paths.stage2_ckpt);
        const model::ToyModel m = model::load_checkpoint(ckpt);
        model::MediaCache media(c.corpus_manifest.parent_path(), m.config().encoder);
        for (const auto& r : gold) {
            if (r.task != TaskKind::MSA && r.task != TaskKind::ER && r.task != TaskKind::ECPE) continue;
            predictions.push_back({r.record_id, model::respond(m, r, *media.for_record(r), c.decode)});
        }
    }

    const evaluation::MetricReport report = evaluation::evaluate_records(gold, predictions, options.schemes);
    fs::create_directories(paths.eval_dir);
    evaluation::write_predictions(paths.predictions, predictions);
    write_file(paths.report_json, report.to_json());
    write_file(paths.report_txt, report.to_table());
    return report;
}

std::string cmd_stats(const RunConfig& c) {
    const OutputPaths paths = output_paths(c);
    const auto records = dataset::read_records(paths.records);
    return dataset::stats_to_json(dataset::dataset_stats(records));
}

}  // namespace m2se::pipeline
