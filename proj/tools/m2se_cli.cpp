// m2se command line. Links only the C interface.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "m2se/m2se.h"

namespace {

const char* kTaskNames[M2SE_TASK_COUNT] = {"MSA", "ER", "FER", "ERI", "ECPE"};

int report_failure(m2se_status status) {
    std::cerr << "m2se: " << m2se_status_name(status) << ": " << m2se_last_error() << "\n";
    return static_cast<int>(status);
}

struct ConfigHandle {
    m2se_config* ptr = nullptr;
    ~ConfigHandle() { m2se_config_free(ptr); }
};

struct OwnedString {
    char* ptr = nullptr;
    ~OwnedString() { m2se_string_free(ptr); }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage multitask sentiment and emotion instruction tuning toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string tasks;
    app.add_option("-c,--config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Seed for sampling, initialization and decoding");
    app.add_option("--tasks", tasks, "Comma-separated task subset, e.g. MSA,ER");

    auto* build = app.add_subcommand("build-dataset", "Convert the source corpus into task records");
    bool allow_rejects = false;
    build->add_flag("--allow-rejects", allow_rejects, "Exit 0 even when rows were rejected");

    auto* plan = app.add_subcommand("plan", "Resolve and print the stage plans");
    bool quiet_plan = false;
    plan->add_flag("--quiet", quiet_plan, "Only write plan/plans.json");

    auto* train = app.add_subcommand("train", "Run the training stages");
    int stage = 0;
    std::string resume;
    train->add_option("--stage", stage, "Run only this stage (1 or 2)")->check(CLI::Range(1, 2));
    train->add_option("--resume", resume, "Stage-1 checkpoint to continue from (with --stage 2)");

    auto* eval = app.add_subcommand("evaluate", "Score a checkpoint or a predictions file");
    std::string checkpoint, predictions, test_set, scheme = "both";
    eval->add_option("--checkpoint", checkpoint, "Checkpoint to generate predictions with");
    eval->add_option("--predictions", predictions, "Existing predictions (JSONL)");
    eval->add_option("--test-set", test_set, "Gold records (JSONL)");
    eval->add_option("--scheme", scheme, "Acc2 scheme: nn, np or both")
        ->check(CLI::IsMember({"nn", "np", "both"}, CLI::ignore_case));
    eval->get_option("--checkpoint")->excludes("--predictions");

    auto* stats = app.add_subcommand("stats", "Per-task record counts of the built dataset");

    CLI11_PARSE(app, argc, argv);

    ConfigHandle cfg;
    m2se_status st = m2se_config_load(config_path.c_str(), &cfg.ptr);
    if (st != M2SE_OK) return report_failure(st);
    if (seed && (st = m2se_config_set_seed(cfg.ptr, *seed)) != M2SE_OK) return report_failure(st);
    if (!tasks.empty() && (st = m2se_config_set_tasks(cfg.ptr, tasks.c_str())) != M2SE_OK) return report_failure(st);

    if (build->parsed()) {
        m2se_build_summary s{};
        if ((st = m2se_build_dataset(cfg.ptr, &s)) != M2SE_OK) return report_failure(st);
        for (int t = 0; t < M2SE_TASK_COUNT; ++t) std::cout << kTaskNames[t] << " " << s.per_task[t] << "\n";
        std::cout << "distinct " << s.distinct_samples << "\nrecords " << s.records << "\nskipped " << s.skipped
                  << "\nrejections " << s.rejections << "\n";
        if (s.rejections > 0 && !allow_rejects) {
            std::cerr << "m2se: " << s.rejections << " row(s) rejected; see dataset/rejections.jsonl"
                      << " (pass --allow-rejects to accept)\n";
            return 3;
        }
        return 0;
    }
    if (plan->parsed()) {
        OwnedString text;
        if ((st = m2se_plan(cfg.ptr, &text.ptr)) != M2SE_OK) return report_failure(st);
        if (!quiet_plan) std::cout << text.ptr;
        return 0;
    }
    if (train->parsed()) {
        if (!resume.empty() && stage != 2) {
            std::cerr << "m2se: --resume requires --stage 2\n";
            return static_cast<int>(M2SE_ERR_INVALID_ARGUMENT);
        }
        m2se_train_summary s{};
        if ((st = m2se_train(cfg.ptr, stage, resume.empty() ? nullptr : resume.c_str(), &s)) != M2SE_OK) {
            return report_failure(st);
        }
        for (const auto& stage_summary : s.stages) {
            if (stage_summary.stage_id == 0) continue;
            std::cout << "stage " << stage_summary.stage_id << ": " << stage_summary.items << " items (";
            bool first = true;
            for (int t = 0; t < M2SE_TASK_COUNT; ++t) {
                if (stage_summary.items_per_task[t] == 0) continue;
                std::cout << (first ? "" : ", ") << kTaskNames[t] << " " << stage_summary.items_per_task[t];
                first = false;
            }
            std::cout << "), loss " << stage_summary.first_loss << " -> " << stage_summary.last_loss << "\n";
        }
        std::cout << "trainable parameters " << s.trainable_parameters << ", adapter parameters "
                  << s.adapter_parameters << "\n";
        return 0;
    }
    if (eval->parsed()) {
        unsigned mask = 0;
        const std::string sch = CLI::detail::to_lower(scheme);
        if (sch == "nn" || sch == "both") mask |= M2SE_SCHEME_NN;
        if (sch == "np" || sch == "both") mask |= M2SE_SCHEME_NP;
        OwnedString table;
        st = m2se_evaluate(cfg.ptr, checkpoint.empty() ? nullptr : checkpoint.c_str(),
                           predictions.empty() ? nullptr : predictions.c_str(),
                           test_set.empty() ? nullptr : test_set.c_str(), mask, nullptr, &table.ptr);
        if (st != M2SE_OK) return report_failure(st);
        std::cout << table.ptr;
        return 0;
    }
    if (stats->parsed()) {
        OwnedString json;
        if ((st = m2se_stats(cfg.ptr, &json.ptr)) != M2SE_OK) return report_failure(st);
        std::cout << json.ptr << "\n";
        return 0;
    }
    return 0;
}
