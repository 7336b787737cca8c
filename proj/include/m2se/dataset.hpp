#pragma once

// Source annotations -> instruction-tuning task records.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "m2se/au_analysis.hpp"
#include "m2se/common.hpp"

namespace m2se::dataset {

struct DialogueTurn {
    std::string utterance_id;
    std::string speaker;
    std::string text;
};

struct CausePair {
    std::string emotion_utterance_id;
    std::string cause_utterance_id;
    EmotionLabel emotion = EmotionLabel::Neutral;

    auto operator<=>(const CausePair&) const = default;
};

struct SourceSample {
    std::string sample_id;
    std::string media_ref;  // relative to the corpus root
    std::string utterance_text;
    std::optional<double> sentiment_score;  // [-3, 3]
    std::optional<EmotionLabel> emotion_label;
    std::vector<DialogueTurn> dialogue_context;
    std::optional<std::vector<CausePair>> cause_pairs;
    std::optional<std::vector<au::AUTrack>> au_tracks;
};

struct TaskRecord {
    std::string record_id;
    TaskKind task = TaskKind::MSA;
    std::string task_identifier;
    std::string query;
    std::string response;
    std::vector<std::string> media;
    std::string source_sample_id;

    bool operator==(const TaskRecord&) const = default;
};

// Ingestion ------------------------------------------------------------------

struct Rejection {
    std::string source;  // annotation file
    std::size_t line = 0;
    std::string sample_id;  // empty when the row could not be read that far
    std::string reason;
};

struct IngestResult {
    std::vector<SourceSample> samples;
    std::vector<Rejection> rejections;
    std::filesystem::path corpus_root;  // directory of the manifest
};

/// Reads the manifest and every annotation file it lists. Rows that violate the
/// sample schema land in `rejections`; an unreadable manifest or annotation
/// file throws Io.
IngestResult ingest_corpus(const std::filesystem::path& manifest);

/// Validates one annotation row; `corpus_root` resolves its AU table path.
SourceSample parse_sample(const std::string& json_row, const std::filesystem::path& corpus_root);

// Reason generation ------------------------------------------------------------

class SceneDescriber {
public:
    virtual ~SceneDescriber() = default;
    virtual std::string describe(const SourceSample& sample) = 0;
};

class ReasonInferencer {
public:
    virtual ~ReasonInferencer() = default;
    virtual std::string infer(const std::string& description, const std::string& utterance) = 0;
};

// Offline stand-ins: pure templates over the sample's fields.
class MockSceneDescriber final : public SceneDescriber {
public:
    std::string describe(const SourceSample& sample) override;
};

class MockReasonInferencer final : public ReasonInferencer {
public:
    std::string infer(const std::string& description, const std::string& utterance) override;
};

/// reasoner(describer(sample), utterance). Any failure is rethrown as a
/// Generator error whose message starts with the sample id.
std::string generate_reason(const SourceSample& sample, SceneDescriber& describer,
                            ReasonInferencer& reasoner);

// Record building ----------------------------------------------------------------

struct SentimentThresholds {
    double negative_below = 0.0;  // score < this -> negative
    double positive_above = 0.0;  // score > this -> positive, otherwise neutral
};

SentimentClass sentiment_class(double score, const SentimentThresholds& thresholds = {});

struct BuildDeps {
    au::EmotionAUTable table = au::default_emotion_au_table();
    au::AULexicon lexicon = au::default_au_lexicon();
    double presence_threshold = 0.0;
    SentimentThresholds sentiment;
    SceneDescriber* describer = nullptr;  // ERI is unsatisfiable without both
    ReasonInferencer* reasoner = nullptr;
};

struct BuildOutcome {
    std::vector<TaskRecord> records;
    std::vector<std::string> skipped;  // "<sample_id> <TASK>: <reason>"
};

/// One record per requested task the sample can satisfy, in task order.
BuildOutcome build_records(const SourceSample& sample, const std::set<TaskKind>& tasks,
                           const BuildDeps& deps);

BuildOutcome build_corpus(const std::vector<SourceSample>& samples, const std::set<TaskKind>& tasks,
                          const BuildDeps& deps);

std::string format_cause_pairs(const std::vector<CausePair>& pairs);

// Statistics and validation ---------------------------------------------------

struct DatasetStats {
    std::map<TaskKind, std::size_t> per_task;  // always holds all five tasks
    std::size_t distinct_samples = 0;

    /// Each per-task count <= distinct total <= sum of per-task counts
    /// (the second bound only when there is at least one record).
    bool shape_ok() const;
    std::size_t summed() const;
};

DatasetStats dataset_stats(const std::vector<TaskRecord>& records);
std::string stats_to_json(const DatasetStats& stats);

/// Empty when the record is well formed.
std::vector<std::string> validate_record(const TaskRecord& record);

// Serialization ----------------------------------------------------------------

std::string record_to_json_line(const TaskRecord& record);
TaskRecord record_from_json_line(const std::string& line);
void write_records(const std::filesystem::path& path, const std::vector<TaskRecord>& records);
std::vector<TaskRecord> read_records(const std::filesystem::path& path);
std::string rejection_to_json_line(const Rejection& r);

}  // namespace m2se::dataset
