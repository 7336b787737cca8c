#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace m2se {

// Every failure raised by the core carries one of these kinds; the C API maps
// them one-to-one onto status codes.
enum class ErrorKind {
    Validation,
    EmptyInput,
    Config,
    Io,
    Shape,
    Numeric,
    Shortage,
    UndefinedMetric,
    Generator,
    FrozenViolation,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

enum class EmotionLabel { Anger, Disgust, Sadness, Joy, Neutral, Surprise, Fear };

inline constexpr std::array<EmotionLabel, 7> kAllEmotions = {
    EmotionLabel::Anger,   EmotionLabel::Disgust,  EmotionLabel::Sadness, EmotionLabel::Joy,
    EmotionLabel::Neutral, EmotionLabel::Surprise, EmotionLabel::Fear,
};

std::string_view to_string(EmotionLabel label);
std::optional<EmotionLabel> parse_emotion(std::string_view text);
EmotionLabel emotion_from_string(std::string_view text);  // throws Validation

enum class TaskKind { MSA, ER, FER, ERI, ECPE };

inline constexpr std::array<TaskKind, 5> kAllTasks = {
    TaskKind::MSA, TaskKind::ER, TaskKind::FER, TaskKind::ERI, TaskKind::ECPE,
};

std::string_view to_string(TaskKind task);
std::optional<TaskKind> parse_task(std::string_view text);
TaskKind task_from_string(std::string_view text);  // throws Config

/// Literal token that selects a task when prepended to a query.
std::string_view task_identifier(TaskKind task);
std::optional<TaskKind> task_for_identifier(std::string_view identifier);

/// Tasks whose records must reference at least one image or video.
bool is_vision_conditioned(TaskKind task);

enum class SentimentClass { Negative, Neutral, Positive };

std::string_view to_string(SentimentClass c);
std::optional<SentimentClass> parse_sentiment_class(std::string_view text);

std::string to_lower(std::string_view text);
std::string_view trim(std::string_view text);

}  // namespace m2se
