#include "m2se/m2se.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>

#include "m2se/au_analysis.hpp"
#include "m2se/evaluation.hpp"
#include "m2se/pipeline.hpp"

struct m2se_config {
    m2se::pipeline::RunConfig run;
};

namespace {

thread_local std::string g_last_error;

m2se_status status_for(m2se::ErrorKind kind) {
    using m2se::ErrorKind;
    switch (kind) {
        case ErrorKind::Validation: return M2SE_ERR_VALIDATION;
        case ErrorKind::EmptyInput: return M2SE_ERR_EMPTY_INPUT;
        case ErrorKind::Config: return M2SE_ERR_CONFIG;
        case ErrorKind::Io: return M2SE_ERR_IO;
        case ErrorKind::Shape: return M2SE_ERR_SHAPE;
        case ErrorKind::Numeric: return M2SE_ERR_NUMERIC;
        case ErrorKind::Shortage: return M2SE_ERR_SHORTAGE;
        case ErrorKind::UndefinedMetric: return M2SE_ERR_UNDEFINED_METRIC;
        case ErrorKind::Generator: return M2SE_ERR_GENERATOR;
        case ErrorKind::FrozenViolation: return M2SE_ERR_FROZEN_VIOLATION;
    }
    return M2SE_ERR_INTERNAL;
}

template <class F>
m2se_status guarded(F&& fn) {
    try {
        g_last_error.clear();
        fn();
        return M2SE_OK;
    } catch (const m2se::Error& e) {
        g_last_error = e.what();
        return status_for(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return M2SE_ERR_INTERNAL;
    } catch (const std::filesystem::filesystem_error& e) {
        g_last_error = e.what();
        return M2SE_ERR_IO;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return M2SE_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return M2SE_ERR_INTERNAL;
    }
}

m2se_status invalid(const char* what) {
    g_last_error = what;
    return M2SE_ERR_INVALID_ARGUMENT;
}

char* dup(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void put(char** out, const std::string& s) {
    if (out != nullptr) *out = dup(s);
}

std::size_t task_index(m2se::TaskKind t) { return static_cast<std::size_t>(t); }

}  // namespace

extern "C" {

const char* m2se_version(void) { return "0.1.0"; }

const char* m2se_last_error(void) { return g_last_error.c_str(); }

const char* m2se_status_name(m2se_status status) {
    switch (status) {
        case M2SE_OK: return "ok";
        case M2SE_ERR_VALIDATION: return "validation error";
        case M2SE_ERR_EMPTY_INPUT: return "empty input";
        case M2SE_ERR_CONFIG: return "config error";
        case M2SE_ERR_IO: return "io error";
        case M2SE_ERR_SHAPE: return "shape error";
        case M2SE_ERR_NUMERIC: return "numeric error";
        case M2SE_ERR_SHORTAGE: return "shortage";
        case M2SE_ERR_UNDEFINED_METRIC: return "undefined metric";
        case M2SE_ERR_GENERATOR: return "generator error";
        case M2SE_ERR_FROZEN_VIOLATION: return "frozen parameter violation";
        case M2SE_ERR_INVALID_ARGUMENT: return "invalid argument";
        case M2SE_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

void m2se_string_free(char* s) { std::free(s); }

m2se_status m2se_config_default(m2se_config** out) {
    if (out == nullptr) return invalid("out is NULL");
    return guarded([&] { *out = new m2se_config{}; });
}

m2se_status m2se_config_load(const char* path, m2se_config** out) {
    if (path == nullptr || out == nullptr) return invalid("path and out must not be NULL");
    return guarded([&] { *out = new m2se_config{m2se::pipeline::load_run_config(path)}; });
}

void m2se_config_free(m2se_config* config) { delete config; }

m2se_status m2se_config_set_seed(m2se_config* config, uint64_t seed) {
    if (config == nullptr) return invalid("config is NULL");
    return guarded([&] {
        config->run.seed = seed;
        config->run.model.seed = seed;
        config->run.decode.seed = seed;
    });
}

m2se_status m2se_config_set_tasks(m2se_config* config, const char* tasks) {
    if (config == nullptr || tasks == nullptr) return invalid("config and tasks must not be NULL");
    return guarded([&] {
        std::set<m2se::TaskKind> parsed;
        std::stringstream in(tasks);
        std::string item;
        while (std::getline(in, item, ',')) {
            if (m2se::trim(item).empty()) continue;
            parsed.insert(m2se::task_from_string(m2se::trim(item)));
        }
        if (parsed.empty()) m2se::fail(m2se::ErrorKind::Config, "no tasks given");
        config->run.tasks = std::move(parsed);
    });
}

m2se_status m2se_config_set_output_root(m2se_config* config, const char* path) {
    if (config == nullptr || path == nullptr) return invalid("config and path must not be NULL");
    return guarded([&] { config->run.output_root = path; });
}

m2se_status m2se_config_set_corpus_manifest(m2se_config* config, const char* path) {
    if (config == nullptr || path == nullptr) return invalid("config and path must not be NULL");
    return guarded([&] { config->run.corpus_manifest = path; });
}

m2se_status m2se_config_validate(const m2se_config* config) {
    if (config == nullptr) return invalid("config is NULL");
    return guarded([&] { m2se::pipeline::validate(config->run); });
}

m2se_status m2se_config_to_json(const m2se_config* config, char** json_out) {
    if (config == nullptr || json_out == nullptr) return invalid("config and json_out must not be NULL");
    return guarded([&] { put(json_out, m2se::pipeline::run_config_to_json(config->run)); });
}

m2se_status m2se_build_dataset(const m2se_config* config, m2se_build_summary* out) {
    if (config == nullptr) return invalid("config is NULL");
    return guarded([&] {
        const auto s = m2se::pipeline::cmd_build_dataset(config->run);
        if (out == nullptr) return;
        *out = m2se_build_summary{};
        for (const auto& [t, n] : s.stats.per_task) out->per_task[task_index(t)] = n;
        out->distinct_samples = s.stats.distinct_samples;
        out->records = s.records;
        out->rejections = s.rejections;
        out->skipped = s.skipped;
    });
}

m2se_status m2se_plan(const m2se_config* config, char** text_out) {
    if (config == nullptr) return invalid("config is NULL");
    return guarded([&] { put(text_out, m2se::pipeline::cmd_plan(config->run)); });
}

m2se_status m2se_train(const m2se_config* config, int stage, const char* resume_checkpoint,
                       m2se_train_summary* out) {
    if (config == nullptr) return invalid("config is NULL");
    if (stage < 0 || stage > 2) return invalid("stage must be 0, 1 or 2");
    return guarded([&] {
        m2se::pipeline::TrainOptions opts;
        opts.stage = stage;
        if (resume_checkpoint != nullptr) opts.resume = resume_checkpoint;
        const auto s = m2se::pipeline::cmd_train(config->run, opts);
        if (out == nullptr) return;
        *out = m2se_train_summary{};
        for (const auto& st : s.stages) {
            m2se_stage_summary& o = out->stages[st.stage_id - 1];
            o.stage_id = st.stage_id;
            o.items = st.items;
            for (const auto& [t, n] : st.items_per_task) o.items_per_task[task_index(t)] = n;
            o.first_loss = st.first_loss;
            o.last_loss = st.last_loss;
        }
        out->trainable_parameters = s.trainable_parameters;
        out->adapter_parameters = s.adapter_parameters;
    });
}

m2se_status m2se_evaluate(const m2se_config* config, const char* checkpoint, const char* predictions,
                          const char* test_set, unsigned scheme_mask, char** report_json_out,
                          char** report_table_out) {
    if (config == nullptr) return invalid("config is NULL");
    if ((scheme_mask & (M2SE_SCHEME_NN | M2SE_SCHEME_NP)) == 0) return invalid("no Acc2 scheme selected");
    return guarded([&] {
        m2se::pipeline::EvalOptions opts;
        if (checkpoint != nullptr) opts.checkpoint = checkpoint;
        if (predictions != nullptr) opts.predictions = predictions;
        if (test_set != nullptr) opts.test_set = test_set;
        opts.schemes.clear();
        if (scheme_mask & M2SE_SCHEME_NN) opts.schemes.insert(m2se::evaluation::Acc2Scheme::NN);
        if (scheme_mask & M2SE_SCHEME_NP) opts.schemes.insert(m2se::evaluation::Acc2Scheme::NP);
        const auto report = m2se::pipeline::cmd_evaluate(config->run, opts);
        put(report_json_out, report.to_json());
        put(report_table_out, report.to_table());
    });
}

m2se_status m2se_stats(const m2se_config* config, char** json_out) {
    if (config == nullptr || json_out == nullptr) return invalid("config and json_out must not be NULL");
    return guarded([&] { put(json_out, m2se::pipeline::cmd_stats(config->run)); });
}

m2se_status m2se_au_peak(const char* csv_text, char** character_out, int64_t* frame_out, double* score_out) {
    if (csv_text == nullptr) return invalid("csv_text is NULL");
    return guarded([&] {
        const auto tracks = m2se::au::parse_au_table(csv_text);
        const auto peak = m2se::au::select_final_peak(tracks);
        put(character_out, peak.character_id);
        if (frame_out != nullptr) *frame_out = peak.frame_index;
        if (score_out != nullptr) *score_out = peak.score;
    });
}

m2se_status m2se_acc2(const int* predicted_classes, const double* gold_scores, size_t n, unsigned scheme,
                      double* out) {
    if ((n > 0 && (predicted_classes == nullptr || gold_scores == nullptr)) || out == nullptr) {
        return invalid("NULL array or output");
    }
    if (scheme != M2SE_SCHEME_NN && scheme != M2SE_SCHEME_NP) return invalid("scheme must be NN or NP");
    return guarded([&] {
        std::vector<std::optional<m2se::SentimentClass>> pred(n);
        for (size_t i = 0; i < n; ++i) {
            const int c = predicted_classes[i];
            if (c < M2SE_CLASS_NONE || c > M2SE_CLASS_POSITIVE) {
                m2se::fail(m2se::ErrorKind::Validation, "unknown sentiment class code " + std::to_string(c));
            }
            if (c != M2SE_CLASS_NONE) pred[i] = static_cast<m2se::SentimentClass>(c);
        }
        *out = m2se::evaluation::acc2(pred, std::span<const double>(gold_scores, n),
                                      scheme == M2SE_SCHEME_NN ? m2se::evaluation::Acc2Scheme::NN
                                                               : m2se::evaluation::Acc2Scheme::NP);
    });
}

}  // extern "C"
