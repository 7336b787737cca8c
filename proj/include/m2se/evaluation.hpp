#pragma once

// Response parsing and the sentiment / emotion / cause-pair metrics.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "m2se/common.hpp"
#include "m2se/dataset.hpp"

namespace m2se::evaluation {

using dataset::CausePair;

struct ParseFailure {
    std::string text;
};

using ParsedResponse =
    std::variant<ParseFailure, SentimentClass, EmotionLabel, std::vector<CausePair>, std::string>;

/// MSA and ER: case-insensitive exact label, then a label that is the only
/// one occurring as a substring (MSA also accepts a bare score). ECPE: one
/// "emo_utt -> cause_utt : emotion" pair per line. FER and ERI return the
/// trimmed text. Failures are values, never exceptions.
ParsedResponse parse_response(TaskKind task, std::string_view text);

std::optional<SentimentClass> parse_sentiment_response(std::string_view text);
std::optional<EmotionLabel> parse_emotion_response(std::string_view text);
std::optional<std::vector<CausePair>> parse_cause_pairs(std::string_view text);

enum class Acc2Scheme { NN, NP };

std::string_view to_string(Acc2Scheme scheme);

/// Binary sentiment accuracy. N/N: gold negative iff score < 0, every item
/// counts. N/P: items with gold score 0 are dropped first. A predicted
/// neutral counts as non-negative; a missing prediction is always wrong.
/// Throws UndefinedMetric when no item remains, Validation when the lengths
/// differ.
double acc2(std::span<const std::optional<SentimentClass>> predictions, std::span<const double> gold,
            Acc2Scheme scheme);

/// Exact-match fraction; a missing prediction is a mismatch.
double accuracy(std::span<const std::optional<EmotionLabel>> predictions, std::span<const EmotionLabel> gold);

/// Per-class F1 weighted by gold support.
double weighted_f1(std::span<const std::optional<EmotionLabel>> predictions,
                   std::span<const EmotionLabel> gold);

using ConfusionMatrix = std::map<std::string, std::map<std::string, std::size_t>>;  // gold -> predicted -> n
ConfusionMatrix confusion_matrix(std::span<const std::optional<EmotionLabel>> predictions,
                                 std::span<const EmotionLabel> gold);

struct ConversationPairs {
    std::vector<CausePair> predicted;
    std::vector<CausePair> gold;
};

struct EcpeScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double weighted_f1 = 0.0;  // per-emotion F1 weighted by gold pair support
    std::size_t matched = 0;
    std::size_t predicted = 0;
    std::size_t gold = 0;
};

/// A predicted pair matches only a gold pair of the same conversation with
/// equal emotion utterance, cause utterance and emotion. Duplicate pairs
/// within a conversation count once. Throws UndefinedMetric without gold pairs.
EcpeScores ecpe_scores(std::span<const ConversationPairs> conversations);

// Reports -----------------------------------------------------------------------------

struct MetricReport {
    std::map<std::string, double> values;  // fractions in [0, 1]
    std::map<std::string, std::size_t> counts;
    std::map<std::string, std::string> notes;
    ConfusionMatrix er_confusion;

    std::string to_json() const;
    /// Human-readable table with values rendered as percentages.
    std::string to_table() const;
};

struct Prediction {
    std::string record_id;
    std::string response;
};

std::vector<Prediction> read_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path, const std::vector<Prediction>& predictions);

/// Scores predictions against gold records. MSA gold sign comes from the
/// record's response class; ER and ECPE records are scored per the metric
/// definitions above; FER and ERI are only counted. Metrics that are
/// undefined for this bundle are omitted with a note. Throws UndefinedMetric
/// when no record is scorable.
MetricReport evaluate_records(const std::vector<dataset::TaskRecord>& gold_records,
                              const std::vector<Prediction>& predictions,
                              const std::set<Acc2Scheme>& schemes = {Acc2Scheme::NN, Acc2Scheme::NP});

}  // namespace m2se::evaluation
