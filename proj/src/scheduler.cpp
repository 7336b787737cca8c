#include "m2se/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace m2se::scheduler {

using nlohmann::json;

std::set<TaskKind> StagePlan::active_tasks() const {
    std::set<TaskKind> out;
    for (const auto& [t, r] : task_rates) {
        if (r > 0.0) out.insert(t);
    }
    return out;
}

const std::set<TaskKind>& allowed_tasks(int stage_id) {
    static const std::set<TaskKind> stage1{TaskKind::MSA, TaskKind::ER, TaskKind::FER};
    static const std::set<TaskKind> stage2{TaskKind::MSA, TaskKind::ER, TaskKind::ERI, TaskKind::ECPE};
    static const std::set<TaskKind> none;
    if (stage_id == 1) return stage1;
    if (stage_id == 2) return stage2;
    return none;
}

std::vector<std::string> verify_plan(const StagePlan& plan) {
    std::vector<std::string> v;
    const std::string stage = "stage " + std::to_string(plan.stage_id);
    if (plan.stage_id != 1 && plan.stage_id != 2) v.push_back("stage_id must be 1 or 2");

    double sum = 0.0;
    for (const auto& [task, rate] : plan.task_rates) {
        const std::string name(to_string(task));
        if (!std::isfinite(rate) || rate < 0.0 || rate > 1.0) {
            v.push_back(stage + ": rate for " + name + " must lie in [0, 1]");
            continue;
        }
        sum += rate;
        if (rate > 0.0 && !allowed_tasks(plan.stage_id).contains(task)) {
            v.push_back(stage + ": task " + name + " is not allowed in this stage");
        }
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        std::ostringstream msg;
        msg << stage << ": rates sum to " << sum << ", expected 1";
        v.push_back(msg.str());
    }
    if (plan.sample_budget && *plan.sample_budget <= 0) {
        v.push_back(stage + ": sample_budget must be positive");
    }
    return v;
}

namespace {

constexpr const char* kPublished = "published";
constexpr const char* kChosen = "chosen default";
constexpr const char* kOverride = "override";

StagePlan builtin_stage1() {
    StagePlan p;
    p.stage_id = 1;
    p.task_rates = {{TaskKind::MSA, 0.40}, {TaskKind::ER, 0.20}, {TaskKind::FER, 0.40}};
    p.sample_budget = 15000;
    return p;
}

StagePlan builtin_stage2() {
    StagePlan p;
    p.stage_id = 2;
    p.task_rates = {{TaskKind::MSA, 0.10}, {TaskKind::ER, 0.30}, {TaskKind::ERI, 0.30}, {TaskKind::ECPE, 0.30}};
    p.sample_budget = std::nullopt;
    return p;
}

void record_defaults(const StagePlan& p, Provenance& prov) {
    const std::string key = "stage" + std::to_string(p.stage_id);
    for (const auto& [t, r] : p.task_rates) {
        prov[key + ".task_rates." + std::string(to_string(t))] =
            std::string(kChosen) + " (only the rate ordering is published)";
    }
    if (p.stage_id == 1) {
        prov[key + ".sample_budget"] = std::string(kPublished) + " (15,000 randomly selected samples)";
        prov[key + ".tasks"] = std::string(kPublished) + " (MSA, ER, FER)";
    } else {
        prov[key + ".sample_budget"] = std::string(kPublished) + " (remaining samples)";
        prov[key + ".tasks"] = std::string(kPublished) + " (MSA, ER, ERI, ECPE)";
    }
    prov[key + ".seed"] = kChosen;
    prov[key + ".mode"] = kChosen;
}

void apply_stage_override(StagePlan& p, const json& o, Provenance& prov) {
    const std::string key = "stage" + std::to_string(p.stage_id);
    if (!o.is_object()) fail(ErrorKind::Config, key + " override must be an object");
    for (const auto& [name, value] : o.items()) {
        if (name == "task_rates") {
            if (!value.is_object()) fail(ErrorKind::Config, key + ".task_rates must be an object");
            for (const auto& [task_name, rate] : value.items()) {
                if (!rate.is_number()) fail(ErrorKind::Config, key + ".task_rates." + task_name + " must be a number");
                const TaskKind t = task_from_string(task_name);
                p.task_rates[t] = rate.get<double>();
                prov[key + ".task_rates." + std::string(to_string(t))] = kOverride;
            }
        } else if (name == "sample_budget") {
            if (value.is_string() && value.get<std::string>() == "remaining") {
                p.sample_budget = std::nullopt;
            } else if (value.is_number_integer()) {
                p.sample_budget = value.get<std::int64_t>();
            } else {
                fail(ErrorKind::Config, key + ".sample_budget must be an integer or \"remaining\"");
            }
            prov[key + ".sample_budget"] = kOverride;
        } else if (name == "seed") {
            if (!value.is_number_integer()) fail(ErrorKind::Config, key + ".seed must be an integer");
            p.seed = value.get<std::uint64_t>();
            prov[key + ".seed"] = kOverride;
        } else if (name == "mode") {
            const std::string m = value.is_string() ? value.get<std::string>() : "";
            if (m == "quota") p.mode = SamplingMode::Quota;
            else if (m == "iid") p.mode = SamplingMode::Iid;
            else fail(ErrorKind::Config, key + ".mode must be \"quota\" or \"iid\"");
            prov[key + ".mode"] = kOverride;
        } else {
            fail(ErrorKind::Config, "unknown plan field " + key + "." + name);
        }
    }
}

json plan_to_json(const StagePlan& p) {
    json rates = json::object();
    for (const auto& [t, r] : p.task_rates) rates[std::string(to_string(t))] = r;
    json j{{"stage_id", p.stage_id},
           {"task_rates", rates},
           {"seed", p.seed},
           {"mode", p.mode == SamplingMode::Quota ? "quota" : "iid"}};
    if (p.sample_budget) j["sample_budget"] = *p.sample_budget;
    else j["sample_budget"] = "remaining";
    return j;
}

}  // namespace

ResolvedPlans default_plans(const std::string& overrides_json) {
    ResolvedPlans out{builtin_stage1(), builtin_stage2(), {}};
    record_defaults(out.stage1, out.provenance);
    record_defaults(out.stage2, out.provenance);

    json o;
    try {
        o = json::parse(overrides_json.empty() ? "{}" : overrides_json);
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, std::string("plan overrides: ") + e.what());
    }
    if (!o.is_object()) fail(ErrorKind::Config, "plan overrides must be an object");
    if (o.contains("seed")) {
        if (!o.at("seed").is_number_integer()) fail(ErrorKind::Config, "seed must be an integer");
        out.stage1.seed = out.stage2.seed = o.at("seed").get<std::uint64_t>();
        out.provenance["stage1.seed"] = out.provenance["stage2.seed"] = kOverride;
    }
    for (const auto& [name, value] : o.items()) {
        if (name == "seed") continue;
        if (name == "stage1") apply_stage_override(out.stage1, value, out.provenance);
        else if (name == "stage2") apply_stage_override(out.stage2, value, out.provenance);
        else fail(ErrorKind::Config, "unknown plan override '" + name + "'");
    }

    std::vector<std::string> problems = verify_plan(out.stage1);
    for (auto& p : verify_plan(out.stage2)) problems.push_back(std::move(p));
    if (!problems.empty()) {
        std::string msg = "invalid stage plan:";
        for (const auto& p : problems) msg += "\n  - " + p;
        fail(ErrorKind::Config, msg);
    }
    return out;
}

std::string plans_to_json(const ResolvedPlans& plans) {
    return json{{"stage1", plan_to_json(plans.stage1)},
                {"stage2", plan_to_json(plans.stage2)},
                {"provenance", plans.provenance}}
        .dump(2);
}

std::string plans_to_text(const ResolvedPlans& plans) {
    std::ostringstream out;
    const auto& prov = plans.provenance;
    auto source = [&](const std::string& key) {
        auto it = prov.find(key);
        return it == prov.end() ? std::string("?") : it->second;
    };
    for (const StagePlan* p : {&plans.stage1, &plans.stage2}) {
        const std::string key = "stage" + std::to_string(p->stage_id);
        out << "Stage " << p->stage_id << "\n";
        out << "  tasks:         ";
        bool first = true;
        for (TaskKind t : p->active_tasks()) {
            out << (first ? "" : ", ") << to_string(t) << " " << task_identifier(t);
            first = false;
        }
        out << "  [" << source(key + ".tasks") << "]\n";
        out << "  sample_budget: ";
        if (p->sample_budget) out << *p->sample_budget;
        else out << "remaining";
        out << "  [" << source(key + ".sample_budget") << "]\n";
        for (const auto& [t, r] : p->task_rates) {
            out << "  rate " << to_string(t) << ": " << r << "  [" << source(key + ".task_rates." + std::string(to_string(t)))
                << "]\n";
        }
        out << "  seed:          " << p->seed << "  [" << source(key + ".seed") << "]\n";
        out << "  mode:          " << (p->mode == SamplingMode::Quota ? "quota" : "iid") << "  ["
            << source(key + ".mode") << "]\n";
    }
    return out.str();
}

std::map<TaskKind, std::int64_t> quotas(const std::map<TaskKind, double>& rates, std::int64_t budget) {
    std::map<TaskKind, std::int64_t> q;
    std::vector<std::pair<double, TaskKind>> remainders;
    std::int64_t assigned = 0;
    for (const auto& [t, r] : rates) {
        if (r <= 0.0) continue;
        const double exact = r * static_cast<double>(budget);
        // Absorb representation error such as 0.3 * 10 = 3.0000000000000004.
        const auto floor_v = static_cast<std::int64_t>(std::floor(exact + 1e-9));
        q[t] = floor_v;
        assigned += floor_v;
        remainders.emplace_back(std::max(0.0, exact - static_cast<double>(floor_v)), t);
    }
    if (q.empty()) return q;
    // Largest remainder first; earlier task wins ties.
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < budget; i = (i + 1) % remainders.size()) {
        ++q[remainders[i].second];
        ++assigned;
    }
    for (std::size_t i = remainders.size(); assigned > budget;) {
        i = (i == 0 ? remainders.size() : i) - 1;
        auto& slot = q[remainders[i].second];
        if (slot > 0) {
            --slot;
            --assigned;
        }
    }
    return q;
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

namespace {

double uniform_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

std::vector<TrainingItem> assign_stream(const std::vector<TaskRecord>& records, const StagePlan& plan) {
    const std::set<TaskKind> active = plan.active_tasks();

    std::map<TaskKind, std::vector<const TaskRecord*>> pools;
    for (TaskKind t : active) pools[t];
    std::size_t pool_total = 0;
    for (const TaskRecord& r : records) {
        auto it = pools.find(r.task);
        if (it == pools.end()) continue;
        it->second.push_back(&r);
        ++pool_total;
    }
    std::vector<std::string> short_tasks;
    for (auto& [t, pool] : pools) {
        if (pool.empty()) short_tasks.emplace_back(to_string(t));
        std::sort(pool.begin(), pool.end(), [](const TaskRecord* a, const TaskRecord* b) {
            return a->record_id < b->record_id;
        });
    }
    if (!short_tasks.empty()) {
        std::string msg = "stage " + std::to_string(plan.stage_id) + ": no records for planned task(s):";
        for (const auto& t : short_tasks) msg += " " + t;
        fail(ErrorKind::Shortage, msg);
    }

    const auto budget = plan.sample_budget.value_or(static_cast<std::int64_t>(pool_total));
    std::mt19937_64 rng(plan.seed);
    std::vector<const TaskRecord*> picked;

    if (plan.mode == SamplingMode::Iid) {
        std::vector<std::pair<TaskKind, double>> cumulative;
        double acc = 0.0;
        for (TaskKind t : active) cumulative.emplace_back(t, acc += plan.task_rates.at(t));
        for (std::int64_t i = 0; i < budget; ++i) {
            const double u = uniform_unit(rng) * acc;
            TaskKind chosen = cumulative.back().first;
            for (const auto& [t, c] : cumulative) {
                if (u < c) {
                    chosen = t;
                    break;
                }
            }
            const auto& pool = pools.at(chosen);
            picked.push_back(pool[uniform_below(rng, pool.size())]);
        }
    } else {
        auto q = quotas(plan.task_rates, budget);
        std::map<TaskKind, std::vector<const TaskRecord*>> selected;
        for (auto& [t, pool] : pools) {
            std::int64_t want = q[t];
            if (!plan.sample_budget) want = std::min<std::int64_t>(want, static_cast<std::int64_t>(pool.size()));
            auto& out = selected[t];
            while (static_cast<std::int64_t>(out.size()) < want) {
                std::vector<const TaskRecord*> pass = pool;
                deterministic_shuffle(pass, rng);
                const auto take = std::min<std::size_t>(pass.size(), static_cast<std::size_t>(want) - out.size());
                out.insert(out.end(), pass.begin(), pass.begin() + static_cast<std::ptrdiff_t>(take));
            }
        }
        std::vector<TaskKind> slots;
        for (const auto& [t, list] : selected) slots.insert(slots.end(), list.size(), t);
        deterministic_shuffle(slots, rng);
        std::map<TaskKind, std::size_t> cursor;
        for (TaskKind t : slots) picked.push_back(selected[t][cursor[t]++]);
    }

    std::vector<TrainingItem> stream;
    stream.reserve(picked.size());
    for (const TaskRecord* r : picked) {
        stream.push_back({*r, plan.stage_id, static_cast<std::int64_t>(stream.size())});
    }
    return stream;
}

std::vector<TaskRecord> remaining_records(const std::vector<TaskRecord>& records,
                                          const std::vector<TrainingItem>& consumed) {
    std::set<std::string> used;
    for (const auto& item : consumed) used.insert(item.record.record_id);
    std::vector<TaskRecord> out;
    for (const auto& r : records) {
        if (!used.contains(r.record_id)) out.push_back(r);
    }
    return out;
}

std::map<TaskKind, std::string> default_identifier_map() {
    std::map<TaskKind, std::string> m;
    for (TaskKind t : kAllTasks) m[t] = std::string(task_identifier(t));
    return m;
}

std::string attach_identifier(const TaskRecord& record, const std::map<TaskKind, std::string>& identifiers) {
    auto it = identifiers.find(record.task);
    if (it == identifiers.end()) {
        fail(ErrorKind::Config, "no task identifier for " + std::string(to_string(record.task)));
    }
    const std::string& id = it->second;
    if (record.query.starts_with(id)) return record.query;
    return id + " " + record.query;
}

std::string attach_identifier(const TaskRecord& record) {
    static const auto map = default_identifier_map();
    return attach_identifier(record, map);
}

std::string stream_to_jsonl(const std::vector<TrainingItem>& stream) {
    std::string out;
    for (const auto& item : stream) {
        out += json{{"position", item.position},
                    {"stage_id", item.stage_id},
                    {"record_id", item.record.record_id},
                    {"task", std::string(to_string(item.record.task))}}
                   .dump();
        out += '\n';
    }
    return out;
}

}  // namespace m2se::scheduler
