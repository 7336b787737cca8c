#include "m2se/trainer.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace m2se::model {

double scheduled_lr(const OptimConfig& config, std::size_t step, std::size_t total_steps) {
    if (config.schedule == LrSchedule::Constant || total_steps == 0) return config.lr;
    const auto warmup = static_cast<std::size_t>(std::ceil(config.warmup_ratio * static_cast<double>(total_steps)));
    if (step < warmup) {
        return config.lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
    }
    const std::size_t decay_steps = total_steps - warmup;
    if (decay_steps <= 1) return config.lr;
    const double progress = static_cast<double>(step - warmup) / static_cast<double>(decay_steps - 1);
    return config.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::shared_ptr<const MediaInput> MediaCache::get(const std::string& ref) {
    auto it = entries_.find(ref);
    if (it != entries_.end()) return it->second;
    auto media = std::make_shared<const MediaInput>(load_media(ref, root_, config_));
    entries_.emplace(ref, media);
    return media;
}

std::shared_ptr<const MediaInput> MediaCache::for_record(const dataset::TaskRecord& record) {
    if (record.media.empty()) {
        static const std::string kBlank = "<blank>";
        auto it = entries_.find(kBlank);
        if (it != entries_.end()) return it->second;
        auto media = std::make_shared<const MediaInput>(MediaInput::blank(config_));
        entries_.emplace(kBlank, media);
        return media;
    }
    return get(record.media.front());
}

namespace {

std::string trace_tail(const std::vector<double>& trace) {
    std::ostringstream out;
    out << "loss trace (" << trace.size() << " steps):";
    const std::size_t from = trace.size() > 8 ? trace.size() - 8 : 0;
    if (from > 0) out << " ...";
    for (std::size_t i = from; i < trace.size(); ++i) out << " " << trace[i];
    return out.str();
}

}  // namespace

TrainReport train_stage(const std::vector<scheduler::TrainingItem>& stream, ToyModel& model,
                        const OptimConfig& config, MediaCache& media, const StepCallback& on_step) {
    if (stream.empty()) fail(ErrorKind::EmptyInput, "training stream is empty");
    if (config.epochs < 1) fail(ErrorKind::Config, "epochs must be >= 1");
    if (!(config.lr >= 0.0)) fail(ErrorKind::Config, "learning rate must be >= 0");

    const bool vision_frozen = model.config().freeze_vision;
    const std::uint64_t vision_before = fingerprint(model, ParamGroup::Vision);

    std::vector<Example> examples;
    examples.reserve(stream.size());
    for (const auto& item : stream) examples.push_back(make_example(item.record, media.for_record(item.record)));

    auto& params = model.params();
    std::vector<Matrix> m1, m2;
    for (const Param& p : params) {
        m1.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
        m2.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }

    TrainReport report;
    const std::size_t total = stream.size() * static_cast<std::size_t>(config.epochs);
    for (std::size_t step = 0; step < total; ++step) {
        const std::size_t idx = step % stream.size();
        model.zero_grad();
        const double value = loss_and_grad(model, examples[idx]);
        report.loss_trace.push_back(value);
        if (!std::isfinite(value)) {
            fail(ErrorKind::Numeric, "training diverged at step " + std::to_string(step) + "; " +
                                         trace_tail(report.loss_trace));
        }
        ++report.items_per_task[stream[idx].record.task];

        double norm2 = 0.0;
        for (const Param& p : params) {
            if (p.trainable) norm2 += p.grad.squaredNorm();
        }
        const double norm = std::sqrt(norm2);
        const double clip = (config.grad_clip > 0.0 && norm > config.grad_clip) ? config.grad_clip / norm : 1.0;

        const double lr = scheduled_lr(config, step, total);
        const double t = static_cast<double>(step + 1);
        const double bc1 = 1.0 - std::pow(config.beta1, t);
        const double bc2 = 1.0 - std::pow(config.beta2, t);
        for (std::size_t i = 0; i < params.size(); ++i) {
            Param& p = params[i];
            if (!p.trainable) continue;
            const Matrix g = clip * p.grad;
            m1[i] = config.beta1 * m1[i] + (1.0 - config.beta1) * g;
            m2[i] = config.beta2 * m2[i] + (1.0 - config.beta2) * g.cwiseAbs2();
            if (lr == 0.0) continue;
            p.value.array() -= lr * (m1[i].array() / bc1) / ((m2[i].array() / bc2).sqrt() + config.eps);
        }
        if (on_step) on_step(step, lr, value, stream[idx].record.task);
    }
    report.steps = total;

    if (vision_frozen && fingerprint(model, ParamGroup::Vision) != vision_before) {
        fail(ErrorKind::FrozenViolation, "vision encoder parameters changed while frozen");
    }
    return report;
}

}  // namespace m2se::model
