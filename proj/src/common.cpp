#include "m2se/common.hpp"

#include <algorithm>
#include <cctype>

namespace m2se {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Validation: return "validation";
        case ErrorKind::EmptyInput: return "empty-input";
        case ErrorKind::Config: return "config";
        case ErrorKind::Io: return "io";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::Shortage: return "shortage";
        case ErrorKind::UndefinedMetric: return "undefined-metric";
        case ErrorKind::Generator: return "generator";
        case ErrorKind::FrozenViolation: return "frozen-violation";
    }
    return "unknown";
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

std::string to_lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view text) {
    const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
    while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
    return text;
}

std::string_view to_string(EmotionLabel label) {
    switch (label) {
        case EmotionLabel::Anger: return "anger";
        case EmotionLabel::Disgust: return "disgust";
        case EmotionLabel::Sadness: return "sadness";
        case EmotionLabel::Joy: return "joy";
        case EmotionLabel::Neutral: return "neutral";
        case EmotionLabel::Surprise: return "surprise";
        case EmotionLabel::Fear: return "fear";
    }
    return "unknown";
}

std::optional<EmotionLabel> parse_emotion(std::string_view text) {
    const std::string key = to_lower(trim(text));
    for (EmotionLabel e : kAllEmotions) {
        if (key == to_string(e)) return e;
    }
    return std::nullopt;
}

EmotionLabel emotion_from_string(std::string_view text) {
    if (auto e = parse_emotion(text)) return *e;
    fail(ErrorKind::Validation, "unknown emotion label '" + std::string(text) + "'");
}

std::string_view to_string(TaskKind task) {
    switch (task) {
        case TaskKind::MSA: return "MSA";
        case TaskKind::ER: return "ER";
        case TaskKind::FER: return "FER";
        case TaskKind::ERI: return "ERI";
        case TaskKind::ECPE: return "ECPE";
    }
    return "unknown";
}

std::optional<TaskKind> parse_task(std::string_view text) {
    std::string key(trim(text));
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    for (TaskKind t : kAllTasks) {
        if (key == to_string(t)) return t;
    }
    return std::nullopt;
}

TaskKind task_from_string(std::string_view text) {
    if (auto t = parse_task(text)) return *t;
    fail(ErrorKind::Config, "unknown task '" + std::string(text) + "'");
}

std::string_view task_identifier(TaskKind task) {
    switch (task) {
        case TaskKind::MSA: return "<sentiment>";
        case TaskKind::ER: return "<emotion>";
        case TaskKind::FER: return "<caption>";
        case TaskKind::ERI: return "<reason>";
        case TaskKind::ECPE: return "<emotion cause-pair>";
    }
    return "";
}

std::optional<TaskKind> task_for_identifier(std::string_view identifier) {
    for (TaskKind t : kAllTasks) {
        if (identifier == task_identifier(t)) return t;
    }
    return std::nullopt;
}

bool is_vision_conditioned(TaskKind task) { return task != TaskKind::ECPE; }

std::string_view to_string(SentimentClass c) {
    switch (c) {
        case SentimentClass::Negative: return "negative";
        case SentimentClass::Neutral: return "neutral";
        case SentimentClass::Positive: return "positive";
    }
    return "unknown";
}

std::optional<SentimentClass> parse_sentiment_class(std::string_view text) {
    const std::string key = to_lower(trim(text));
    for (auto c : {SentimentClass::Negative, SentimentClass::Neutral, SentimentClass::Positive}) {
        if (key == to_string(c)) return c;
    }
    return std::nullopt;
}

}  // namespace m2se
