#include "m2se/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace m2se::dataset {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string required_string(const json& row, const char* key) {
    if (!row.contains(key) || !row.at(key).is_string() || row.at(key).get<std::string>().empty()) {
        fail(ErrorKind::Validation, std::string("missing or empty '") + key + "'");
    }
    return row.at(key).get<std::string>();
}

bool present(const json& row, const char* key) { return row.contains(key) && !row.at(key).is_null(); }

}  // namespace

SourceSample parse_sample(const std::string& json_row, const fs::path& corpus_root) {
    json row;
    try {
        row = json::parse(json_row);
    } catch (const json::exception& e) {
        fail(ErrorKind::Validation, std::string("malformed JSON: ") + e.what());
    }
    if (!row.is_object()) fail(ErrorKind::Validation, "row is not an object");

    SourceSample s;
    s.sample_id = required_string(row, "sample_id");
    try {
        if (present(row, "media_ref")) s.media_ref = row.at("media_ref").get<std::string>();
        if (present(row, "utterance_text")) s.utterance_text = row.at("utterance_text").get<std::string>();

        if (present(row, "sentiment_score")) {
            const double score = row.at("sentiment_score").get<double>();
            if (!std::isfinite(score) || score < -3.0 || score > 3.0) {
                fail(ErrorKind::Validation, "sentiment_score outside [-3, 3]");
            }
            s.sentiment_score = score;
        }
        if (present(row, "emotion_label")) {
            s.emotion_label = emotion_from_string(row.at("emotion_label").get<std::string>());
        }
        if (present(row, "dialogue_context")) {
            for (const json& t : row.at("dialogue_context")) {
                s.dialogue_context.push_back({required_string(t, "utterance_id"),
                                              t.value("speaker", std::string()),
                                              t.value("text", std::string())});
            }
        }
        if (present(row, "cause_pairs") && !row.at("cause_pairs").empty()) {
            std::set<std::string> ids;
            for (const auto& t : s.dialogue_context) ids.insert(t.utterance_id);
            std::vector<CausePair> pairs;
            for (const json& p : row.at("cause_pairs")) {
                CausePair cp{required_string(p, "emotion_utterance_id"),
                             required_string(p, "cause_utterance_id"),
                             emotion_from_string(required_string(p, "emotion"))};
                for (const auto* id : {&cp.emotion_utterance_id, &cp.cause_utterance_id}) {
                    if (!ids.contains(*id)) {
                        fail(ErrorKind::Validation, "cause pair references unknown utterance '" + *id + "'");
                    }
                }
                pairs.push_back(std::move(cp));
            }
            s.cause_pairs = std::move(pairs);
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::Validation, std::string("type error: ") + e.what());
    }

    if (!s.sentiment_score && !s.emotion_label && !s.cause_pairs) {
        fail(ErrorKind::Validation, "no sentiment_score, emotion_label or cause_pairs");
    }

    if (present(row, "au_table")) {
        const fs::path au_path = corpus_root / row.at("au_table").get<std::string>();
        try {
            s.au_tracks = au::load_au_table(au_path);
        } catch (const Error& e) {
            // An unreadable AU table is a problem with this row, not the corpus.
            fail(ErrorKind::Validation, e.what());
        }
    }
    return s;
}

IngestResult ingest_corpus(const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in) fail(ErrorKind::Io, "cannot open manifest " + manifest.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, manifest.string() + ": " + e.what());
    }

    IngestResult result;
    result.corpus_root = manifest.parent_path();
    if (!doc.contains("sources")) return result;
    if (!doc.at("sources").is_array()) fail(ErrorKind::Config, manifest.string() + ": 'sources' must be a list");

    std::unordered_set<std::string> seen;
    for (const json& source : doc.at("sources")) {
        if (!source.contains("annotations")) {
            fail(ErrorKind::Config, manifest.string() + ": source without 'annotations'");
        }
        const fs::path file = result.corpus_root / source.at("annotations").get<std::string>();
        std::ifstream rows(file);
        if (!rows) fail(ErrorKind::Io, "cannot open annotation file " + file.string());

        std::string line;
        std::size_t line_no = 0;
        while (std::getline(rows, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            try {
                SourceSample s = parse_sample(line, result.corpus_root);
                if (!seen.insert(s.sample_id).second) {
                    result.rejections.push_back(
                        {file.string(), line_no, s.sample_id, "duplicate sample_id"});
                    continue;
                }
                result.samples.push_back(std::move(s));
            } catch (const Error& e) {
                std::string id;
                try {
                    id = json::parse(line).value("sample_id", std::string());
                } catch (const json::exception&) {
                }
                result.rejections.push_back({file.string(), line_no, id, e.what()});
            }
        }
    }
    return result;
}

// Reason generation ------------------------------------------------------------

std::string MockSceneDescriber::describe(const SourceSample& sample) {
    const std::string speaker =
        sample.dialogue_context.empty() || sample.dialogue_context.back().speaker.empty()
            ? std::string("The speaker")
            : sample.dialogue_context.back().speaker;
    const std::string emotion =
        sample.emotion_label ? std::string(to_string(*sample.emotion_label)) : "an unlabeled emotion";
    return speaker + " appears to feel " + emotion + " while speaking; the conversation has " +
           std::to_string(sample.dialogue_context.size()) + " turns.";
}

std::string MockReasonInferencer::infer(const std::string& description, const std::string& utterance) {
    return description + " The words \"" + utterance +
           "\" suggest the feeling is a response to what was just said.";
}

std::string generate_reason(const SourceSample& sample, SceneDescriber& describer,
                            ReasonInferencer& reasoner) {
    std::string reason;
    try {
        reason = reasoner.infer(describer.describe(sample), sample.utterance_text);
    } catch (const std::exception& e) {
        fail(ErrorKind::Generator, sample.sample_id + ": reason generation failed: " + e.what());
    }
    if (trim(reason).empty()) fail(ErrorKind::Generator, sample.sample_id + ": empty reason");
    return reason;
}

// Record building ----------------------------------------------------------------

SentimentClass sentiment_class(double score, const SentimentThresholds& thresholds) {
    if (score < thresholds.negative_below) return SentimentClass::Negative;
    if (score > thresholds.positive_above) return SentimentClass::Positive;
    return SentimentClass::Neutral;
}

std::string format_cause_pairs(const std::vector<CausePair>& pairs) {
    std::string out;
    for (const CausePair& p : pairs) {
        if (!out.empty()) out += '\n';
        out += p.emotion_utterance_id + " -> " + p.cause_utterance_id + " : " +
               std::string(to_string(p.emotion));
    }
    return out;
}

namespace {

std::string quoted_utterance(const SourceSample& s) { return "\"" + s.utterance_text + "\""; }

std::string query_for(TaskKind task, const SourceSample& s) {
    switch (task) {
        case TaskKind::MSA:
            return "Utterance: " + quoted_utterance(s) +
                   " What is the speaker's sentiment? Answer negative, neutral or positive.";
        case TaskKind::ER:
            return "Utterance: " + quoted_utterance(s) +
                   " Which emotion is expressed? Answer one of anger, disgust, sadness, joy, "
                   "neutral, surprise, fear.";
        case TaskKind::FER:
            return "Describe the facial action units of the most expressive face.";
        case TaskKind::ERI:
            return "Utterance: " + quoted_utterance(s) + " Why does the speaker feel this way?";
        case TaskKind::ECPE: {
            std::string q = "Conversation:";
            for (const DialogueTurn& t : s.dialogue_context) {
                q += "\n" + t.utterance_id + " " + t.speaker + ": " + t.text;
            }
            q += "\nList each emotion cause pair as 'emotion_utt -> cause_utt : emotion'.";
            return q;
        }
    }
    return {};
}

TaskRecord make_record(TaskKind task, const SourceSample& s) {
    TaskRecord r;
    r.record_id = s.sample_id + ":" + to_lower(to_string(task));
    r.task = task;
    r.task_identifier = std::string(task_identifier(task));
    r.query = query_for(task, s);
    r.source_sample_id = s.sample_id;
    if (!s.media_ref.empty()) r.media.push_back(s.media_ref);
    return r;
}

}  // namespace

BuildOutcome build_records(const SourceSample& sample, const std::set<TaskKind>& tasks,
                           const BuildDeps& deps) {
    BuildOutcome out;
    auto skip = [&](TaskKind t, const std::string& why) {
        out.skipped.push_back(sample.sample_id + " " + std::string(to_string(t)) + ": " + why);
    };

    for (TaskKind task : tasks) {
        if (is_vision_conditioned(task) && sample.media_ref.empty()) {
            skip(task, "no media_ref");
            continue;
        }
        TaskRecord r = make_record(task, sample);
        switch (task) {
            case TaskKind::MSA:
                if (!sample.sentiment_score) {
                    skip(task, "no sentiment_score");
                    continue;
                }
                r.response = std::string(to_string(sentiment_class(*sample.sentiment_score, deps.sentiment)));
                break;
            case TaskKind::ER:
                if (!sample.emotion_label) {
                    skip(task, "no emotion_label");
                    continue;
                }
                r.response = std::string(to_string(*sample.emotion_label));
                break;
            case TaskKind::FER: {
                if (!sample.emotion_label || !sample.au_tracks) {
                    skip(task, "needs au_table and emotion_label");
                    continue;
                }
                try {
                    const au::PeakSelection peak = au::select_final_peak(*sample.au_tracks);
                    const au::AUTrack* track = nullptr;
                    for (const auto& t : *sample.au_tracks) {
                        if (t.character_id == peak.character_id && !t.frames.empty()) {
                            track = &t;
                            break;
                        }
                    }
                    const au::AUFrame& frame = au::frame_at(*track, peak.frame_index);
                    const auto aus = au::common_aus(frame, *sample.emotion_label, deps.table,
                                                    deps.presence_threshold);
                    r.response = au::caption_from_aus(aus, deps.lexicon);
                    r.media = {sample.media_ref + "#frame=" + std::to_string(peak.frame_index)};
                } catch (const Error& e) {
                    skip(task, e.what());
                    continue;
                }
                break;
            }
            case TaskKind::ERI:
                if (!sample.emotion_label) {
                    skip(task, "no emotion_label");
                    continue;
                }
                if (deps.describer == nullptr || deps.reasoner == nullptr) {
                    skip(task, "no reason generator configured");
                    continue;
                }
                try {
                    r.response = generate_reason(sample, *deps.describer, *deps.reasoner);
                } catch (const Error& e) {
                    skip(task, e.what());
                    continue;
                }
                break;
            case TaskKind::ECPE:
                if (!sample.cause_pairs) {
                    skip(task, "no cause_pairs");
                    continue;
                }
                r.response = format_cause_pairs(*sample.cause_pairs);
                break;
        }
        out.records.push_back(std::move(r));
    }
    return out;
}

BuildOutcome build_corpus(const std::vector<SourceSample>& samples, const std::set<TaskKind>& tasks,
                          const BuildDeps& deps) {
    BuildOutcome all;
    for (const SourceSample& s : samples) {
        BuildOutcome one = build_records(s, tasks, deps);
        std::move(one.records.begin(), one.records.end(), std::back_inserter(all.records));
        std::move(one.skipped.begin(), one.skipped.end(), std::back_inserter(all.skipped));
    }
    return all;
}

// Statistics and validation ---------------------------------------------------

std::size_t DatasetStats::summed() const {
    std::size_t n = 0;
    for (const auto& [t, c] : per_task) n += c;
    return n;
}

bool DatasetStats::shape_ok() const {
    for (const auto& [t, c] : per_task) {
        if (c > distinct_samples) return false;
    }
    return distinct_samples <= summed();
}

DatasetStats dataset_stats(const std::vector<TaskRecord>& records) {
    DatasetStats stats;
    for (TaskKind t : kAllTasks) stats.per_task[t] = 0;
    std::set<std::string> ids;
    for (const TaskRecord& r : records) {
        ++stats.per_task[r.task];
        ids.insert(r.source_sample_id);
    }
    stats.distinct_samples = ids.size();
    return stats;
}

std::string stats_to_json(const DatasetStats& stats) {
    json per_task = json::object();
    for (const auto& [t, c] : stats.per_task) per_task[std::string(to_string(t))] = c;
    return json{{"per_task", per_task},
                {"distinct_samples", stats.distinct_samples},
                {"summed", stats.summed()},
                {"shape_ok", stats.shape_ok()}}
        .dump(2);
}

std::vector<std::string> validate_record(const TaskRecord& record) {
    std::vector<std::string> v;
    if (record.record_id.empty()) v.push_back("empty record_id");
    if (record.source_sample_id.empty()) v.push_back("empty source_sample_id");
    const std::string_view expected = task_identifier(record.task);
    if (record.task_identifier != expected) {
        v.push_back("task_identifier '" + record.task_identifier + "' does not match " +
                    std::string(to_string(record.task)) + " (expected '" + std::string(expected) + "')");
    }
    if (trim(record.query).empty()) v.push_back("empty query");
    if (trim(record.response).empty()) v.push_back("empty response");
    if (is_vision_conditioned(record.task) && record.media.empty()) {
        v.push_back(std::string(to_string(record.task)) + " record has no media");
    }
    for (const auto& m : record.media) {
        if (m.empty()) v.push_back("empty media reference");
    }
    return v;
}

// Serialization ----------------------------------------------------------------

std::string record_to_json_line(const TaskRecord& r) {
    return json{{"record_id", r.record_id},
                {"task", std::string(to_string(r.task))},
                {"task_identifier", r.task_identifier},
                {"query", r.query},
                {"response", r.response},
                {"media", r.media},
                {"source_sample_id", r.source_sample_id}}
        .dump();
}

TaskRecord record_from_json_line(const std::string& line) {
    try {
        const json j = json::parse(line);
        TaskRecord r;
        r.record_id = j.at("record_id").get<std::string>();
        auto task = parse_task(j.at("task").get<std::string>());
        if (!task) fail(ErrorKind::Validation, "unknown task in record " + r.record_id);
        r.task = *task;
        r.task_identifier = j.at("task_identifier").get<std::string>();
        r.query = j.at("query").get<std::string>();
        r.response = j.at("response").get<std::string>();
        r.media = j.at("media").get<std::vector<std::string>>();
        r.source_sample_id = j.at("source_sample_id").get<std::string>();
        return r;
    } catch (const json::exception& e) {
        fail(ErrorKind::Validation, std::string("bad record line: ") + e.what());
    }
}

void write_records(const fs::path& path, const std::vector<TaskRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    for (const TaskRecord& r : records) out << record_to_json_line(r) << '\n';
}

std::vector<TaskRecord> read_records(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open records " + path.string());
    std::vector<TaskRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) records.push_back(record_from_json_line(line));
    }
    return records;
}

std::string rejection_to_json_line(const Rejection& r) {
    return json{{"source", r.source}, {"line", r.line}, {"sample_id", r.sample_id}, {"reason", r.reason}}
        .dump();
}

}  // namespace m2se::dataset
