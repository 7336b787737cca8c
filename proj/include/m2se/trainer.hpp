#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "m2se/model.hpp"
#include "m2se/scheduler.hpp"

namespace m2se::model {

enum class LrSchedule { Constant, WarmupCosine };

struct OptimConfig {
    double lr = 1e-5;
    int epochs = 2;
    LrSchedule schedule = LrSchedule::WarmupCosine;
    double warmup_ratio = 0.03;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double grad_clip = 1.0;  // global-norm clip, 0 disables
};

/// Learning rate at 0-based `step` out of `total_steps`.
double scheduled_lr(const OptimConfig& config, std::size_t step, std::size_t total_steps);

/// Decoded media keyed by reference; decoding happens once per reference.
class MediaCache {
public:
    MediaCache(std::filesystem::path root, EncoderConfig config)
        : root_(std::move(root)), config_(config) {}

    /// The record's first media reference, or a blank frame when it has none.
    std::shared_ptr<const MediaInput> for_record(const dataset::TaskRecord& record);
    std::shared_ptr<const MediaInput> get(const std::string& ref);

private:
    std::filesystem::path root_;
    EncoderConfig config_;
    std::map<std::string, std::shared_ptr<const MediaInput>> entries_;
};

struct TrainReport {
    std::vector<double> loss_trace;  // one entry per optimizer step
    std::map<TaskKind, std::size_t> items_per_task;
    std::size_t steps = 0;
};

using StepCallback = std::function<void(std::size_t step, double lr, double loss, TaskKind task)>;

/// Runs `config.epochs` passes over the stream with one item per step (Adam).
/// Only trainable parameters move. A non-finite loss throws Numeric with the
/// trace so far in the message. Throws FrozenViolation if the vision encoder
/// changes while frozen.
TrainReport train_stage(const std::vector<scheduler::TrainingItem>& stream, ToyModel& model,
                        const OptimConfig& config, MediaCache& media, const StepCallback& on_step = {});

}  // namespace m2se::model
