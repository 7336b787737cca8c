#include "m2se/evaluation.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

namespace m2se::evaluation {

using nlohmann::json;

namespace {

std::string normalize(std::string_view text) {
    std::string s = to_lower(trim(text));
    while (!s.empty() && (s.back() == '.' || s.back() == '!')) s.pop_back();
    return std::string(trim(s));
}

template <class Label, std::size_t N>
std::optional<Label> match_label(std::string_view text, const std::array<Label, N>& labels) {
    const std::string s = normalize(text);
    for (Label l : labels) {
        if (s == to_string(l)) return l;
    }
    std::optional<Label> found;
    for (Label l : labels) {
        if (s.find(to_string(l)) != std::string::npos) {
            if (found) return std::nullopt;  // ambiguous
            found = l;
        }
    }
    return found;
}

}  // namespace

std::optional<SentimentClass> parse_sentiment_response(std::string_view text) {
    static constexpr std::array<SentimentClass, 3> kClasses = {
        SentimentClass::Negative, SentimentClass::Neutral, SentimentClass::Positive};
    if (auto c = match_label(text, kClasses)) return c;
    const std::string s = normalize(text);
    double score = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), score);
    if (!s.empty() && ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(score)) {
        return score < 0 ? SentimentClass::Negative : score > 0 ? SentimentClass::Positive : SentimentClass::Neutral;
    }
    return std::nullopt;
}

std::optional<EmotionLabel> parse_emotion_response(std::string_view text) {
    return match_label(text, kAllEmotions);
}

std::optional<std::vector<CausePair>> parse_cause_pairs(std::string_view text) {
    static const std::regex kLine(R"(^\s*(\S+)\s*->\s*(\S+)\s*:\s*([A-Za-z]+)\s*$)");
    std::vector<CausePair> pairs;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (!std::regex_match(line, m, kLine)) continue;
        auto e = parse_emotion(m[3].str());
        if (!e) continue;
        pairs.push_back({m[1].str(), m[2].str(), *e});
    }
    if (pairs.empty()) return std::nullopt;
    return pairs;
}

ParsedResponse parse_response(TaskKind task, std::string_view text) {
    switch (task) {
        case TaskKind::MSA:
            if (auto c = parse_sentiment_response(text)) return *c;
            break;
        case TaskKind::ER:
            if (auto e = parse_emotion_response(text)) return *e;
            break;
        case TaskKind::ECPE:
            if (auto p = parse_cause_pairs(text)) return std::move(*p);
            break;
        case TaskKind::FER:
        case TaskKind::ERI:
            if (!trim(text).empty()) return std::string(trim(text));
            break;
    }
    return ParseFailure{std::string(text)};
}

std::string_view to_string(Acc2Scheme scheme) { return scheme == Acc2Scheme::NN ? "nn" : "np"; }

double acc2(std::span<const std::optional<SentimentClass>> predictions, std::span<const double> gold,
            Acc2Scheme scheme) {
    if (predictions.size() != gold.size()) fail(ErrorKind::Validation, "acc2: predictions and gold differ in length");
    std::size_t n = 0, correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (scheme == Acc2Scheme::NP && gold[i] == 0.0) continue;
        ++n;
        const bool gold_negative = gold[i] < 0.0;
        if (predictions[i] && ((*predictions[i] == SentimentClass::Negative) == gold_negative)) ++correct;
    }
    if (n == 0) {
        fail(ErrorKind::UndefinedMetric,
             std::string("acc2 (") + std::string(to_string(scheme)) + ") has no items to score");
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

double accuracy(std::span<const std::optional<EmotionLabel>> predictions, std::span<const EmotionLabel> gold) {
    if (predictions.size() != gold.size()) fail(ErrorKind::Validation, "accuracy: predictions and gold differ in length");
    if (gold.empty()) fail(ErrorKind::UndefinedMetric, "accuracy of an empty bundle");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (predictions[i] && *predictions[i] == gold[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(gold.size());
}

double weighted_f1(std::span<const std::optional<EmotionLabel>> predictions,
                   std::span<const EmotionLabel> gold) {
    if (predictions.size() != gold.size()) fail(ErrorKind::Validation, "weighted_f1: predictions and gold differ in length");
    if (gold.empty()) fail(ErrorKind::UndefinedMetric, "weighted F1 of an empty bundle");
    std::map<EmotionLabel, std::size_t> tp, predicted, support;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        ++support[gold[i]];
        if (!predictions[i]) continue;
        ++predicted[*predictions[i]];
        if (*predictions[i] == gold[i]) ++tp[gold[i]];
    }
    double total = 0.0;
    for (const auto& [label, n] : support) {
        const double t = static_cast<double>(tp[label]);
        const double p = predicted[label] ? t / static_cast<double>(predicted[label]) : 0.0;
        const double r = t / static_cast<double>(n);
        const double f1 = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        total += f1 * static_cast<double>(n);
    }
    return total / static_cast<double>(gold.size());
}

ConfusionMatrix confusion_matrix(std::span<const std::optional<EmotionLabel>> predictions,
                                 std::span<const EmotionLabel> gold) {
    ConfusionMatrix m;
    for (std::size_t i = 0; i < gold.size() && i < predictions.size(); ++i) {
        const std::string pred = predictions[i] ? std::string(to_string(*predictions[i])) : "<unparsed>";
        ++m[std::string(to_string(gold[i]))][pred];
    }
    return m;
}

EcpeScores ecpe_scores(std::span<const ConversationPairs> conversations) {
    EcpeScores s;
    std::map<EmotionLabel, std::size_t> tp, predicted, support;
    for (const ConversationPairs& c : conversations) {
        const std::set<CausePair> pred(c.predicted.begin(), c.predicted.end());
        const std::set<CausePair> gold(c.gold.begin(), c.gold.end());
        for (const CausePair& p : pred) {
            ++predicted[p.emotion];
            if (gold.contains(p)) {
                ++tp[p.emotion];
                ++s.matched;
            }
        }
        for (const CausePair& g : gold) ++support[g.emotion];
        s.predicted += pred.size();
        s.gold += gold.size();
    }
    if (s.gold == 0) fail(ErrorKind::UndefinedMetric, "ECPE scores need at least one gold pair");

    auto f1 = [](double t, double np, double ng) {
        const double p = np > 0 ? t / np : 0.0;
        const double r = ng > 0 ? t / ng : 0.0;
        return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    };
    s.precision = s.predicted ? static_cast<double>(s.matched) / static_cast<double>(s.predicted) : 0.0;
    s.recall = static_cast<double>(s.matched) / static_cast<double>(s.gold);
    s.f1 = f1(static_cast<double>(s.matched), static_cast<double>(s.predicted), static_cast<double>(s.gold));
    double weighted = 0.0;
    for (const auto& [e, n] : support) {
        weighted += static_cast<double>(n) *
                    f1(static_cast<double>(tp[e]), static_cast<double>(predicted[e]), static_cast<double>(n));
    }
    s.weighted_f1 = weighted / static_cast<double>(s.gold);
    return s;
}

// Reports -----------------------------------------------------------------------------

std::string MetricReport::to_json() const {
    json j{{"values", values}, {"counts", counts}, {"notes", notes}, {"unit", "fraction"}};
    if (!er_confusion.empty()) j["er_confusion"] = er_confusion;
    return j.dump(2) + "\n";
}

std::string MetricReport::to_table() const {
    std::ostringstream out;
    out << "metric                  value (%)\n";
    out << "----------------------  ---------\n";
    for (const auto& [name, v] : values) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%-22s  %9.2f\n", name.c_str(), 100.0 * v);
        out << buf;
    }
    if (!counts.empty()) {
        out << "\ncounts\n";
        for (const auto& [name, n] : counts) out << "  " << name << ": " << n << "\n";
    }
    if (!notes.empty()) {
        out << "\nnotes\n";
        for (const auto& [name, text] : notes) out << "  " << name << ": " << text << "\n";
    }
    return out.str();
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open predictions " + path.string());
    std::vector<Prediction> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            const json j = json::parse(line);
            out.push_back({j.at("record_id").get<std::string>(), j.at("response").get<std::string>()});
        } catch (const json::exception& e) {
            fail(ErrorKind::Validation, path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

void write_predictions(const std::filesystem::path& path, const std::vector<Prediction>& predictions) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    for (const auto& p : predictions) out << json{{"record_id", p.record_id}, {"response", p.response}}.dump() << '\n';
}

MetricReport evaluate_records(const std::vector<dataset::TaskRecord>& gold_records,
                              const std::vector<Prediction>& predictions, const std::set<Acc2Scheme>& schemes) {
    std::map<std::string, std::string> by_id;
    for (const auto& p : predictions) by_id[p.record_id] = p.response;
    auto response_for = [&](const dataset::TaskRecord& r) -> std::optional<std::string> {
        auto it = by_id.find(r.record_id);
        if (it == by_id.end()) return std::nullopt;
        return it->second;
    };

    MetricReport report;
    std::vector<std::optional<SentimentClass>> msa_pred;
    std::vector<double> msa_gold;
    std::vector<std::optional<EmotionLabel>> er_pred;
    std::vector<EmotionLabel> er_gold;
    std::vector<ConversationPairs> ecpe;
    std::map<std::string, std::size_t> failures, missing;

    for (const auto& r : gold_records) {
        const auto resp = response_for(r);
        const std::string task(to_string(r.task));
        ++report.counts[task + ".items"];
        const bool scored_task = r.task == TaskKind::MSA || r.task == TaskKind::ER || r.task == TaskKind::ECPE;
        if (!resp && scored_task) ++missing[task];
        switch (r.task) {
            case TaskKind::MSA: {
                const auto g = parse_sentiment_class(r.response);
                if (!g) fail(ErrorKind::Validation, r.record_id + ": gold MSA response is not a class");
                msa_gold.push_back(*g == SentimentClass::Negative ? -1.0 : *g == SentimentClass::Positive ? 1.0 : 0.0);
                msa_pred.push_back(resp ? parse_sentiment_response(*resp) : std::nullopt);
                if (resp && !msa_pred.back()) ++failures[task];
                break;
            }
            case TaskKind::ER: {
                const auto g = parse_emotion(r.response);
                if (!g) fail(ErrorKind::Validation, r.record_id + ": gold ER response is not an emotion");
                er_gold.push_back(*g);
                er_pred.push_back(resp ? parse_emotion_response(*resp) : std::nullopt);
                if (resp && !er_pred.back()) ++failures[task];
                break;
            }
            case TaskKind::ECPE: {
                ConversationPairs c;
                auto g = parse_cause_pairs(r.response);
                if (!g) fail(ErrorKind::Validation, r.record_id + ": gold ECPE response has no pairs");
                c.gold = std::move(*g);
                if (resp) {
                    if (auto p = parse_cause_pairs(*resp)) c.predicted = std::move(*p);
                    else ++failures[task];
                }
                ecpe.push_back(std::move(c));
                break;
            }
            case TaskKind::FER:
            case TaskKind::ERI:
                break;
        }
    }
    for (const auto& [task, n] : failures) report.counts[task + ".parse_failures"] = n;
    for (const auto& [task, n] : missing) report.counts[task + ".missing_predictions"] = n;

    bool scored = false;
    if (!msa_gold.empty()) {
        for (Acc2Scheme s : schemes) {
            const std::string key = "MSA.acc2_" + std::string(to_string(s));
            try {
                report.values[key] = acc2(msa_pred, msa_gold, s);
                scored = true;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::UndefinedMetric) throw;
                report.notes[key] = e.what();
            }
        }
        std::size_t zeros = 0;
        for (double g : msa_gold) zeros += g == 0.0 ? 1 : 0;
        report.counts["MSA.gold_zero"] = zeros;
    }
    if (!er_gold.empty()) {
        report.values["ER.acc"] = accuracy(er_pred, er_gold);
        report.values["ER.weighted_f1"] = weighted_f1(er_pred, er_gold);
        report.er_confusion = confusion_matrix(er_pred, er_gold);
        scored = true;
    }
    if (!ecpe.empty()) {
        const EcpeScores s = ecpe_scores(ecpe);
        report.values["ECPE.f1"] = s.f1;
        report.values["ECPE.weighted_f1"] = s.weighted_f1;
        report.values["ECPE.precision"] = s.precision;
        report.values["ECPE.recall"] = s.recall;
        report.counts["ECPE.gold_pairs"] = s.gold;
        report.counts["ECPE.predicted_pairs"] = s.predicted;
        report.counts["ECPE.matched_pairs"] = s.matched;
        scored = true;
    }
    if (!scored) fail(ErrorKind::UndefinedMetric, "no scorable MSA, ER or ECPE records in the test set");
    return report;
}

}  // namespace m2se::evaluation
