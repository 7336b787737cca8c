#pragma once

// Two-stage multitask sampling: stage plans, quota assignment and task
// identifiers.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "m2se/common.hpp"
#include "m2se/dataset.hpp"

namespace m2se::scheduler {

using dataset::TaskRecord;

enum class SamplingMode { Quota, Iid };

struct StagePlan {
    int stage_id = 1;
    std::map<TaskKind, double> task_rates;
    std::optional<std::int64_t> sample_budget;  // nullopt: every remaining record
    std::uint64_t seed = 0;
    SamplingMode mode = SamplingMode::Quota;

    /// Tasks with a strictly positive rate.
    std::set<TaskKind> active_tasks() const;
};

/// Where each resolved plan field came from, e.g. "stage1.sample_budget" ->
/// "default (15,000 samples)" or "override".
using Provenance = std::map<std::string, std::string>;

struct ResolvedPlans {
    StagePlan stage1;
    StagePlan stage2;
    Provenance provenance;
};

const std::set<TaskKind>& allowed_tasks(int stage_id);

/// Empty when the plan is valid.
std::vector<std::string> verify_plan(const StagePlan& plan);

/// Built-in plans with `overrides_json` applied, e.g.
/// {"stage2": {"task_rates": {"MSA": 0.0, "ER": 0.34, ...}}, "seed": 7}.
/// Recognized per-stage keys: task_rates (merged per task into the defaults),
/// sample_budget (integer or "remaining"), seed, mode ("quota" | "iid").
/// A top-level "seed" applies to both stages. Throws Config listing every
/// verify_plan violation.
ResolvedPlans default_plans(const std::string& overrides_json = "{}");

std::string plans_to_json(const ResolvedPlans& plans);
std::string plans_to_text(const ResolvedPlans& plans);

/// Largest-remainder apportionment of `budget` over the rates. Ties in the
/// remainder go to the earlier task in TaskKind order.
std::map<TaskKind, std::int64_t> quotas(const std::map<TaskKind, double>& rates, std::int64_t budget);

struct TrainingItem {
    TaskRecord record;
    int stage_id = 1;
    std::int64_t position = 0;
};

/// Deterministic training stream for one stage. The pool is ordered by
/// record_id first, so the result does not depend on input order. With a
/// fixed budget, a task pool smaller than its quota is cycled through in
/// freshly shuffled passes; with "remaining", quotas are capped at the pool.
/// Throws Shortage naming every planned task whose pool is empty.
std::vector<TrainingItem> assign_stream(const std::vector<TaskRecord>& records, const StagePlan& plan);

/// Records not used by `consumed` (matched by record_id).
std::vector<TaskRecord> remaining_records(const std::vector<TaskRecord>& records,
                                          const std::vector<TrainingItem>& consumed);

/// Identifier token, a space, then the query. Never prepends twice.
std::string attach_identifier(const TaskRecord& record);
std::string attach_identifier(const TaskRecord& record, const std::map<TaskKind, std::string>& identifiers);

std::map<TaskKind, std::string> default_identifier_map();

std::string stream_to_jsonl(const std::vector<TrainingItem>& stream);

/// Uniform integer in [0, n) from the raw engine output, so streams are
/// identical across standard library implementations.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

template <class T>
void deterministic_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::swap(items[i - 1], items[uniform_below(rng, i)]);
    }
}

}  // namespace m2se::scheduler
