#pragma once

// Run configuration and the five operator commands. Every command validates
// the whole configuration before it touches the output directory.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "m2se/dataset.hpp"
#include "m2se/evaluation.hpp"
#include "m2se/model.hpp"
#include "m2se/scheduler.hpp"
#include "m2se/trainer.hpp"

namespace m2se::pipeline {

namespace fs = std::filesystem;

struct RunConfig {
    fs::path corpus_manifest;
    fs::path output_root = "out";
    std::set<TaskKind> tasks = {kAllTasks.begin(), kAllTasks.end()};

    std::optional<fs::path> emotion_au_table;  // built-in table when unset
    std::optional<fs::path> au_lexicon;
    double presence_threshold = 0.0;
    dataset::SentimentThresholds sentiment;
    bool reason_generator = true;  // offline describer + reasoner for ERI

    std::string plan_overrides = "{}";  // JSON, see scheduler::default_plans
    std::uint64_t seed = 0;

    model::ModelConfig model;
    std::optional<model::AdapterConfig> adapter = model::AdapterConfig{};
    model::OptimConfig optim;
    model::DecodeConfig decode;

    std::optional<fs::path> test_set;  // records file; dataset/records.jsonl when unset
};

/// Reads a JSON run config. Relative paths resolve against the file's
/// directory; M2SE_OUTPUT_ROOT, when set, replaces output_root.
RunConfig load_run_config(const fs::path& path);
RunConfig parse_run_config(const std::string& json_text, const fs::path& base_dir);
std::string run_config_to_json(const RunConfig& config);

/// Checks every module precondition reachable from the config. Throws Config
/// listing all problems at once.
void validate(const RunConfig& config);

/// Plans with the config's overrides and seed applied.
scheduler::ResolvedPlans resolve_plans(const RunConfig& config);

struct OutputPaths {
    fs::path dataset_dir, records, stats, rejections, build_log;
    fs::path plan_dir, plans;
    fs::path train_dir, stage1_ckpt, stage2_ckpt, manifest;
    fs::path eval_dir, predictions, report_json, report_txt;
};

OutputPaths output_paths(const RunConfig& config);

// Commands ------------------------------------------------------------------------

struct BuildSummary {
    dataset::DatasetStats stats;
    std::size_t records = 0;
    std::size_t rejections = 0;
    std::size_t skipped = 0;
};

BuildSummary cmd_build_dataset(const RunConfig& config);

/// Writes plan/plans.json and returns the human-readable dump.
std::string cmd_plan(const RunConfig& config);

struct TrainOptions {
    int stage = 0;  // 0: both stages, otherwise only that stage
    std::optional<fs::path> resume;  // stage-1 checkpoint for a stage-2 run
};

struct StageSummary {
    int stage_id = 0;
    std::size_t items = 0;
    std::map<TaskKind, std::size_t> items_per_task;
    double first_loss = 0.0;
    double last_loss = 0.0;
    fs::path checkpoint;
};

struct TrainSummary {
    std::vector<StageSummary> stages;
    std::size_t trainable_parameters = 0;
    std::size_t adapter_parameters = 0;
};

TrainSummary cmd_train(const RunConfig& config, const TrainOptions& options = {});

struct EvalOptions {
    std::optional<fs::path> checkpoint;   // generates predictions with this model
    std::optional<fs::path> predictions;  // scores an existing predictions file instead
    std::optional<fs::path> test_set;
    std::set<evaluation::Acc2Scheme> schemes = {evaluation::Acc2Scheme::NN, evaluation::Acc2Scheme::NP};
};

evaluation::MetricReport cmd_evaluate(const RunConfig& config, const EvalOptions& options = {});

/// Statistics of the built record file as JSON.
std::string cmd_stats(const RunConfig& config);

}  // namespace m2se::pipeline
