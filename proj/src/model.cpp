#include "m2se/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

namespace m2se::model {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(ParamGroup group) {
    switch (group) {
        case ParamGroup::Vision: return "vision";
        case ParamGroup::Projector: return "projector";
        case ParamGroup::Language: return "language";
        case ParamGroup::Adapter: return "adapter";
    }
    return "unknown";
}

namespace {

// Portable normal draws: the standard distributions are implementation-defined.
class Gaussian {
public:
    explicit Gaussian(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (cached_) {
            cached_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = unit();
        const double u2 = unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        cached_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    Matrix matrix(Eigen::Index rows, Eigen::Index cols, double stddev) {
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * next();
        return m;
    }

private:
    double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    std::mt19937_64 rng_;
    bool cached_ = false;
    double spare_ = 0.0;
};

constexpr std::uint64_t kVisionStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kProjectorStream = 0xbf58476d1ce4e5b9ULL;
constexpr std::uint64_t kLanguageStream = 0x94d049bb133111ebULL;
constexpr std::uint64_t kAdapterStream = 0x2545f4914f6cdd1dULL;

std::pair<Matrix, Matrix> pretrained_vision(const ModelConfig& c) {
    Gaussian g(c.seed ^ kVisionStream);
    const int patch_dim = c.encoder.patch_size * c.encoder.patch_size;
    Matrix w = g.matrix(patch_dim, c.encoder.d_vision, 1.0 / std::sqrt(static_cast<double>(patch_dim)));
    Matrix b = Matrix::Zero(1, c.encoder.d_vision);
    return {std::move(w), std::move(b)};
}

std::pair<int, int> layer_shape(const ModelConfig& c, std::string_view kind) {
    if (kind == "mlp_in") return {c.d_model, c.d_ff};
    if (kind == "mlp_out") return {c.d_ff, c.d_model};
    return {c.d_model, c.d_model};
}

void validate_config(const ModelConfig& c) {
    if (c.d_model < 1 || c.layers < 1 || c.d_ff < 1 || c.max_positions < 2 || c.encoder.d_vision < 1) {
        fail(ErrorKind::Config, "model dimensions must be positive");
    }
    if (c.encoder.patch_size < 1 || c.encoder.image_size % c.encoder.patch_size != 0) {
        fail(ErrorKind::Config, "image_size must be a positive multiple of patch_size");
    }
}

}  // namespace

std::string layer_param_name(int layer, std::string_view kind) {
    return "lm.L" + std::to_string(layer) + "." + std::string(kind);
}

ToyModel::ToyModel(const ModelConfig& config) : config_(config) {
    validate_config(config);
    const int d = config.d_model;
    const int vocab = Tokenizer::standard().vocab_size();

    auto [patch_w, patch_b] = pretrained_vision(config);
    add("vision.patch_w", ParamGroup::Vision, std::move(patch_w), !config.freeze_vision);
    add("vision.patch_b", ParamGroup::Vision, std::move(patch_b), !config.freeze_vision);

    Gaussian gp(config.seed ^ kProjectorStream);
    add("projector.w_v", ParamGroup::Projector,
        gp.matrix(config.encoder.d_vision, d, 1.0 / std::sqrt(static_cast<double>(config.encoder.d_vision))), true);

    Gaussian g(config.seed ^ kLanguageStream);
    add("lm.tok_emb", ParamGroup::Language, g.matrix(vocab, d, 1.0), true);
    add("lm.pos_emb", ParamGroup::Language, g.matrix(config.max_positions, d, 0.1), true);
    for (int l = 0; l < config.layers; ++l) {
        for (const std::string& kind : block_linear_kinds()) {
            auto [din, dout] = layer_shape(config, kind);
            // Residual branches start small so the stack is near identity.
            const double scale = (kind == "attn_o" || kind == "mlp_out") ? 0.5 : 1.0;
            add(layer_param_name(l, kind), ParamGroup::Language,
                g.matrix(din, dout, scale / std::sqrt(static_cast<double>(din))), true);
        }
        add(layer_param_name(l, "mlp_in_b"), ParamGroup::Language, Matrix::Zero(1, config.d_ff), true);
        add(layer_param_name(l, "mlp_out_b"), ParamGroup::Language, Matrix::Zero(1, d), true);
    }
    add("lm.head", ParamGroup::Language, g.matrix(d, vocab, 1.0 / std::sqrt(static_cast<double>(d))), true);
    add("lm.head_b", ParamGroup::Language, Matrix::Zero(1, vocab), true);
}

Param& ToyModel::add(std::string name, ParamGroup group, Matrix value, bool trainable) {
    Param p{std::move(name), group, std::move(value), Matrix(), trainable};
    p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    index_[p.name] = params_.size();
    params_.push_back(std::move(p));
    return params_.back();
}

void ToyModel::reindex() {
    index_.clear();
    for (std::size_t i = 0; i < params_.size(); ++i) index_[params_[i].name] = i;
}

bool ToyModel::has_param(std::string_view name) const { return index_.find(name) != index_.end(); }

Param& ToyModel::param(std::string_view name) {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorKind::Config, "no parameter named " + std::string(name));
    return params_[it->second];
}

const Param& ToyModel::param(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorKind::Config, "no parameter named " + std::string(name));
    return params_[it->second];
}

std::size_t ToyModel::trainable_parameter_count() const {
    std::size_t n = 0;
    for (const Param& p : params_) {
        if (p.trainable) n += static_cast<std::size_t>(p.value.size());
    }
    return n;
}

std::size_t ToyModel::parameter_count(ParamGroup group) const {
    std::size_t n = 0;
    for (const Param& p : params_) {
        if (p.group == group) n += static_cast<std::size_t>(p.value.size());
    }
    return n;
}

Matrix ToyModel::effective_weight(int layer, std::string_view kind) const {
    const std::string base = layer_param_name(layer, kind);
    Matrix w = param(base).value;
    if (adapters_ && has_param(base + ".lora_a")) {
        const double scale = adapters_->alpha / adapters_->rank;
        w.noalias() += scale * param(base + ".lora_a").value * param(base + ".lora_b").value;
    }
    return w;
}

void ToyModel::zero_grad() {
    for (Param& p : params_) p.grad.setZero();
}

void ToyModel::set_freeze_vision(bool frozen) {
    config_.freeze_vision = frozen;
    for (Param& p : params_) {
        if (p.group == ParamGroup::Vision) p.trainable = !frozen;
    }
}

ToyModel apply_adapters(ToyModel model, const AdapterConfig& adapters) {
    if (model.adapters_) fail(ErrorKind::Config, "adapters already applied");
    if (adapters.rank < 1) fail(ErrorKind::Config, "adapter rank must be >= 1");
    if (adapters.targets.empty()) fail(ErrorKind::Config, "no adapter target layers declared");
    for (const std::string& t : adapters.targets) {
        const auto& kinds = block_linear_kinds();
        if (std::find(kinds.begin(), kinds.end(), t) == kinds.end()) {
            fail(ErrorKind::Config, "unknown adapter target '" + t + "'");
        }
        auto [din, dout] = layer_shape(model.config_, t);
        if (adapters.rank > std::min(din, dout)) {
            fail(ErrorKind::Config, "adapter rank " + std::to_string(adapters.rank) + " exceeds min(" +
                                        std::to_string(din) + ", " + std::to_string(dout) + ") for " + t);
        }
    }

    for (Param& p : model.params_) {
        if (p.group == ParamGroup::Language) p.trainable = false;
    }
    Gaussian g(model.config_.seed ^ kAdapterStream);
    for (int l = 0; l < model.config_.layers; ++l) {
        for (const std::string& t : adapters.targets) {
            auto [din, dout] = layer_shape(model.config_, t);
            const std::string base = layer_param_name(l, t);
            model.add(base + ".lora_a", ParamGroup::Adapter,
                      g.matrix(din, adapters.rank, 1.0 / std::sqrt(static_cast<double>(din))), true);
            model.add(base + ".lora_b", ParamGroup::Adapter, Matrix::Zero(adapters.rank, dout), true);
        }
    }
    model.adapters_ = adapters;
    return model;
}

std::size_t expected_adapter_parameters(const ModelConfig& config, const AdapterConfig& adapters) {
    std::size_t n = 0;
    for (int l = 0; l < config.layers; ++l) {
        for (const std::string& t : adapters.targets) {
            auto [din, dout] = layer_shape(config, t);
            n += static_cast<std::size_t>(adapters.rank) * static_cast<std::size_t>(din + dout);
        }
    }
    return n;
}

// Pipeline stages ----------------------------------------------------------------

VisualTokens encode_media(const MediaInput& media, const ToyModel& model) {
    VisualTokens out;
    out.provenance = media.provenance;
    if (media.precomputed()) {
        out.tokens = media.features;
    } else {
        const Param& w = model.param("vision.patch_w");
        if (media.patches.cols() != w.value.rows()) {
            fail(ErrorKind::Shape, "patch width " + std::to_string(media.patches.cols()) +
                                       " does not match encoder input " + std::to_string(w.value.rows()));
        }
        out.tokens = media.patches * w.value;
        out.tokens.rowwise() += model.param("vision.patch_b").value.row(0);
    }
    if (out.tokens.rows() < 1) fail(ErrorKind::Shape, "media produced no visual tokens");
    if (!out.tokens.allFinite()) fail(ErrorKind::Numeric, "non-finite visual token from " + media.provenance);
    return out;
}

ProjectedTokens project(const VisualTokens& visual, const ToyModel& model) {
    const Matrix& w = model.param("projector.w_v").value;
    if (visual.tokens.cols() != w.rows()) {
        fail(ErrorKind::Shape, "visual token width " + std::to_string(visual.tokens.cols()) +
                                   " does not match projector input " + std::to_string(w.rows()));
    }
    return {visual.tokens * w};
}

TextTokens embed_text(const std::vector<int>& ids, const ToyModel& model) {
    if (ids.empty()) fail(ErrorKind::Shape, "text must contain at least one token");
    const Matrix& emb = model.param("lm.tok_emb").value;
    TextTokens t{ids, Matrix(static_cast<Eigen::Index>(ids.size()), emb.cols())};
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= emb.rows()) fail(ErrorKind::Shape, "token id out of range");
        t.embedded.row(static_cast<Eigen::Index>(i)) = emb.row(ids[i]);
    }
    return t;
}

FusedInput fuse(const ProjectedTokens& visual, const TextTokens& text) {
    if (visual.tokens.cols() != text.embedded.cols()) {
        fail(ErrorKind::Shape, "visual width " + std::to_string(visual.tokens.cols()) + " != text width " +
                                   std::to_string(text.embedded.cols()));
    }
    if (text.embedded.rows() < 1) fail(ErrorKind::Shape, "text must contain at least one token");
    FusedInput f;
    f.x.resize(visual.tokens.rows() + text.embedded.rows(), visual.tokens.cols());
    f.x.topRows(visual.tokens.rows()) = visual.tokens;
    f.x.bottomRows(text.embedded.rows()) = text.embedded;
    f.boundary = static_cast<std::size_t>(visual.tokens.rows());
    return f;
}

// Transformer ----------------------------------------------------------------------

namespace {

struct LayerCache {
    Matrix x, q, k, v, p, h, y, z;
    Matrix wq, wk, wv, wo, w1, w2;
};

struct Trace {
    std::vector<LayerCache> layers;
    Matrix hidden;
    Matrix logits;
};

void causal_softmax(Matrix& s) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double mx = s.row(i).head(i + 1).maxCoeff();
        double sum = 0.0;
        for (Eigen::Index j = 0; j <= i; ++j) sum += (s(i, j) = std::exp(s(i, j) - mx));
        s.row(i).head(i + 1) /= sum;
        s.row(i).tail(s.cols() - i - 1).setZero();
    }
}

Trace run(const Matrix& fused, const ToyModel& m) {
    const ModelConfig& c = m.config();
    const Eigen::Index n = fused.rows();
    if (n > c.max_positions) {
        fail(ErrorKind::Shape, "sequence of " + std::to_string(n) + " rows exceeds max_positions " +
                                   std::to_string(c.max_positions));
    }
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(c.d_model));
    Trace t;
    Matrix x = fused + m.param("lm.pos_emb").value.topRows(n);
    for (int l = 0; l < c.layers; ++l) {
        LayerCache lc;
        lc.x = x;
        lc.wq = m.effective_weight(l, "attn_q");
        lc.wk = m.effective_weight(l, "attn_k");
        lc.wv = m.effective_weight(l, "attn_v");
        lc.wo = m.effective_weight(l, "attn_o");
        lc.w1 = m.effective_weight(l, "mlp_in");
        lc.w2 = m.effective_weight(l, "mlp_out");
        lc.q = x * lc.wq;
        lc.k = x * lc.wk;
        lc.v = x * lc.wv;
        lc.p = attn_scale * (lc.q * lc.k.transpose());
        causal_softmax(lc.p);
        lc.h = lc.p * lc.v;
        lc.y = x + lc.h * lc.wo;
        Matrix u = lc.y * lc.w1;
        u.rowwise() += m.param(layer_param_name(l, "mlp_in_b")).value.row(0);
        lc.z = u.array().tanh().matrix();
        x = lc.y + lc.z * lc.w2;
        x.rowwise() += m.param(layer_param_name(l, "mlp_out_b")).value.row(0);
        t.layers.push_back(std::move(lc));
    }
    t.hidden = std::move(x);
    t.logits = t.hidden * m.param("lm.head").value;
    t.logits.rowwise() += m.param("lm.head_b").value.row(0);
    return t;
}

void check_finite(const Matrix& logits) {
    if (!logits.allFinite()) fail(ErrorKind::Numeric, "non-finite logits");
}

// Adds the gradient of an effective weight to its base and adapter factors.
void accumulate_weight_grad(ToyModel& m, int layer, std::string_view kind, const Matrix& dw) {
    const std::string base = layer_param_name(layer, kind);
    m.param(base).grad += dw;
    if (m.adapters() && m.has_param(base + ".lora_a")) {
        const double scale = m.adapters()->alpha / m.adapters()->rank;
        Param& a = m.param(base + ".lora_a");
        Param& b = m.param(base + ".lora_b");
        a.grad.noalias() += scale * dw * b.value.transpose();
        b.grad.noalias() += scale * a.value.transpose() * dw;
    }
}

struct ExampleForward {
    Matrix patches_or_features;
    Matrix visual;  // T_v
    Matrix fused;
    std::size_t boundary = 0;
};

ExampleForward prepare(const ToyModel& m, const Example& ex) {
    ExampleForward f;
    const MediaInput blank = MediaInput::blank(m.config().encoder);
    const VisualTokens tv = encode_media(ex.media ? *ex.media : blank, m);
    const ProjectedTokens pv = project(tv, m);
    const TextTokens tt = embed_text(ex.ids, m);
    const FusedInput fused = fuse(pv, tt);
    f.visual = tv.tokens;
    f.fused = fused.x;
    f.boundary = fused.boundary;
    return f;
}

double cross_entropy(const Matrix& logits, const Example& ex, std::size_t boundary, Matrix* dlogits) {
    if (ex.response_start < 1 || ex.response_start >= ex.ids.size()) {
        fail(ErrorKind::Shape, "example has no response tokens");
    }
    const std::size_t count = ex.ids.size() - ex.response_start;
    if (dlogits) *dlogits = Matrix::Zero(logits.rows(), logits.cols());
    double total = 0.0;
    for (std::size_t target = ex.response_start; target < ex.ids.size(); ++target) {
        const auto row = static_cast<Eigen::Index>(boundary + target - 1);
        const auto lrow = logits.row(row);
        const double mx = lrow.maxCoeff();
        const double lse = mx + std::log((lrow.array() - mx).exp().sum());
        total += lse - lrow(ex.ids[target]);
        if (dlogits) {
            dlogits->row(row) = (lrow.array() - lse).exp().matrix() / static_cast<double>(count);
            (*dlogits)(row, ex.ids[target]) -= 1.0 / static_cast<double>(count);
        }
    }
    return total / static_cast<double>(count);
}

}  // namespace

Matrix logits(const FusedInput& input, const ToyModel& model) {
    Matrix lg = run(input.x, model).logits;
    check_finite(lg);
    return lg;
}

std::string forward(const FusedInput& input, const ToyModel& model, const DecodeConfig& decode) {
    const Tokenizer& tok = Tokenizer::standard();
    const Matrix& emb = model.param("lm.tok_emb").value;
    Matrix x = input.x;
    std::vector<int> generated;
    std::mt19937_64 rng(decode.seed);
    for (int step = 0; step < decode.max_new_tokens && x.rows() < model.config().max_positions; ++step) {
        const Trace t = run(x, model);
        check_finite(t.logits);
        const auto last = t.logits.row(t.logits.rows() - 1);
        int next = 0;
        if (decode.greedy || decode.temperature <= 0.0) {
            last.maxCoeff(&next);
        } else {
            Eigen::ArrayXd probs = ((last.array() - last.maxCoeff()) / decode.temperature).exp().transpose();
            probs /= probs.sum();
            double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            next = static_cast<int>(probs.size()) - 1;
            for (Eigen::Index i = 0; i < probs.size(); ++i) {
                if ((u -= probs(i)) < 0.0) {
                    next = static_cast<int>(i);
                    break;
                }
            }
        }
        if (next == tok.eos()) break;
        generated.push_back(next);
        x.conservativeResize(x.rows() + 1, Eigen::NoChange);
        x.row(x.rows() - 1) = emb.row(next);
    }
    return tok.decode(generated);
}

// Training examples ----------------------------------------------------------------

std::vector<int> prompt_ids(const dataset::TaskRecord& record) {
    const Tokenizer& tok = Tokenizer::standard();
    std::vector<int> ids{tok.bos()};
    const std::string_view id = task_identifier(record.task);
    const auto body = tok.encode(record.query.starts_with(id) ? record.query
                                                              : std::string(id) + " " + record.query);
    ids.insert(ids.end(), body.begin(), body.end());
    ids.push_back(tok.sep());
    return ids;
}

Example make_example(const dataset::TaskRecord& record, std::shared_ptr<const MediaInput> media) {
    const Tokenizer& tok = Tokenizer::standard();
    Example ex;
    ex.media = std::move(media);
    ex.ids = prompt_ids(record);
    ex.response_start = ex.ids.size();
    const auto resp = tok.encode(record.response);
    ex.ids.insert(ex.ids.end(), resp.begin(), resp.end());
    ex.ids.push_back(tok.eos());
    return ex;
}

double loss(const ToyModel& model, const Example& example) {
    const ExampleForward f = prepare(model, example);
    const Trace t = run(f.fused, model);
    return cross_entropy(t.logits, example, f.boundary, nullptr);
}

double loss_and_grad(ToyModel& m, const Example& example) {
    const ModelConfig& c = m.config();
    const ExampleForward f = prepare(m, example);
    const Trace t = run(f.fused, m);
    Matrix dlogits;
    const double value = cross_entropy(t.logits, example, f.boundary, &dlogits);
    if (!std::isfinite(value)) return value;

    m.param("lm.head").grad.noalias() += t.hidden.transpose() * dlogits;
    m.param("lm.head_b").grad += dlogits.colwise().sum();
    Matrix dx = dlogits * m.param("lm.head").value.transpose();

    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(c.d_model));
    for (int l = c.layers - 1; l >= 0; --l) {
        const LayerCache& lc = t.layers[static_cast<std::size_t>(l)];
        // MLP branch.
        m.param(layer_param_name(l, "mlp_out_b")).grad += dx.colwise().sum();
        accumulate_weight_grad(m, l, "mlp_out", lc.z.transpose() * dx);
        const Matrix du = ((dx * lc.w2.transpose()).array() * (1.0 - lc.z.array().square())).matrix();
        m.param(layer_param_name(l, "mlp_in_b")).grad += du.colwise().sum();
        accumulate_weight_grad(m, l, "mlp_in", lc.y.transpose() * du);
        Matrix dy = dx + du * lc.w1.transpose();
        // Attention branch.
        accumulate_weight_grad(m, l, "attn_o", lc.h.transpose() * dy);
        const Matrix dh = dy * lc.wo.transpose();
        const Matrix dp = dh * lc.v.transpose();
        const Matrix dv = lc.p.transpose() * dh;
        const Eigen::VectorXd row_dot = (dp.array() * lc.p.array()).rowwise().sum();
        const Matrix ds = (lc.p.array() * (dp.colwise() - row_dot).array()).matrix();
        const Matrix dq = attn_scale * (ds * lc.k);
        const Matrix dk = attn_scale * (ds.transpose() * lc.q);
        accumulate_weight_grad(m, l, "attn_q", lc.x.transpose() * dq);
        accumulate_weight_grad(m, l, "attn_k", lc.x.transpose() * dk);
        accumulate_weight_grad(m, l, "attn_v", lc.x.transpose() * dv);
        dx = dy + dq * lc.wq.transpose() + dk * lc.wk.transpose() + dv * lc.wv.transpose();
    }

    const Eigen::Index n = dx.rows();
    const auto nv = static_cast<Eigen::Index>(f.boundary);
    m.param("lm.pos_emb").grad.topRows(n) += dx;
    Param& emb = m.param("lm.tok_emb");
    for (std::size_t i = 0; i < example.ids.size(); ++i) {
        emb.grad.row(example.ids[i]) += dx.row(nv + static_cast<Eigen::Index>(i));
    }
    const Matrix dproj = dx.topRows(nv);
    m.param("projector.w_v").grad.noalias() += f.visual.transpose() * dproj;

    const MediaInput blank = MediaInput::blank(c.encoder);
    const MediaInput& media = example.media ? *example.media : blank;
    if (!media.precomputed()) {
        const Matrix dtv = dproj * m.param("projector.w_v").value.transpose();
        m.param("vision.patch_w").grad.noalias() += media.patches.transpose() * dtv;
        m.param("vision.patch_b").grad += dtv.colwise().sum();
    }
    return value;
}

std::string respond(const ToyModel& model, const dataset::TaskRecord& record, const MediaInput& media,
                    const DecodeConfig& decode) {
    const VisualTokens tv = encode_media(media, model);
    const FusedInput x = fuse(project(tv, model), embed_text(prompt_ids(record), model));
    return forward(x, model, decode);
}

// Checkpoints ----------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'M', '2', 'S', 'E', 'C', 'K', 'P', 'T'};

template <class T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::string& where) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) fail(ErrorKind::Io, where + ": truncated checkpoint");
    return value;
}

std::string get_string(std::istream& in, std::size_t len, const std::string& where) {
    std::string s(len, '\0');
    if (len > 0 && !in.read(s.data(), static_cast<std::streamsize>(len))) {
        fail(ErrorKind::Io, where + ": truncated checkpoint");
    }
    return s;
}

json adapter_to_json(const AdapterConfig& a) {
    return json{{"rank", a.rank}, {"alpha", a.alpha}, {"targets", a.targets}};
}

}  // namespace

std::string model_config_to_json(const ModelConfig& c) {
    return json{{"image_size", c.encoder.image_size},
                {"patch_size", c.encoder.patch_size},
                {"max_frames", c.encoder.max_frames},
                {"d_vision", c.encoder.d_vision},
                {"d_model", c.d_model},
                {"layers", c.layers},
                {"d_ff", c.d_ff},
                {"max_positions", c.max_positions},
                {"seed", c.seed},
                {"freeze_vision", c.freeze_vision}}
        .dump();
}

ModelConfig model_config_from_json(const std::string& text) {
    ModelConfig c;
    try {
        const json j = json::parse(text);
        c.encoder.image_size = j.value("image_size", c.encoder.image_size);
        c.encoder.patch_size = j.value("patch_size", c.encoder.patch_size);
        c.encoder.max_frames = j.value("max_frames", c.encoder.max_frames);
        c.encoder.d_vision = j.value("d_vision", c.encoder.d_vision);
        c.d_model = j.value("d_model", c.d_model);
        c.layers = j.value("layers", c.layers);
        c.d_ff = j.value("d_ff", c.d_ff);
        c.max_positions = j.value("max_positions", c.max_positions);
        c.seed = j.value("seed", c.seed);
        c.freeze_vision = j.value("freeze_vision", c.freeze_vision);
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, std::string("model config: ") + e.what());
    }
    return c;
}

void save_checkpoint(const fs::path& path, const ToyModel& model, const std::string& metadata_json) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write checkpoint " + path.string());
    json header{{"format_version", kCheckpointVersion},
                {"vocab_size", Tokenizer::standard().vocab_size()},
                {"model", json::parse(model_config_to_json(model.config()))},
                {"metadata", json::parse(metadata_json.empty() ? "{}" : metadata_json)}};
    if (model.adapters()) header["adapters"] = adapter_to_json(*model.adapters());
    const std::string h = header.dump();
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, h.size());
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    put<std::uint64_t>(out, model.params().size());
    for (const Param& p : model.params()) {
        put<std::uint64_t>(out, p.name.size());
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put<std::uint8_t>(out, static_cast<std::uint8_t>(p.group));
        put<std::uint8_t>(out, p.trainable ? 1 : 0);
        put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.rows()));
        put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.cols()));
        out.write(reinterpret_cast<const char*>(p.value.data()),
                  static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.value.size())));
    }
    if (!out) fail(ErrorKind::Io, "failed writing checkpoint " + path.string());
}

ToyModel load_checkpoint(const fs::path& path, std::string* metadata_json) {
    const std::string where = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open checkpoint " + where);
    char magic[sizeof(kMagic)];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        fail(ErrorKind::Io, where + ": not a checkpoint");
    }
    const auto version = get<std::uint32_t>(in, where);
    if (version != kCheckpointVersion) {
        fail(ErrorKind::Config, where + ": checkpoint format " + std::to_string(version) +
                                    " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    const json header = json::parse(get_string(in, get<std::uint64_t>(in, where), where));
    if (header.at("vocab_size").get<int>() != Tokenizer::standard().vocab_size()) {
        fail(ErrorKind::Config, where + ": checkpoint vocabulary does not match this build");
    }
    ToyModel model(model_config_from_json(header.at("model").dump()));
    if (header.contains("adapters")) {
        AdapterConfig a;
        a.rank = header["adapters"].at("rank").get<int>();
        a.alpha = header["adapters"].at("alpha").get<double>();
        a.targets = header["adapters"].at("targets").get<std::vector<std::string>>();
        model = apply_adapters(std::move(model), a);
    }
    const auto count = get<std::uint64_t>(in, where);
    if (count != model.params().size()) fail(ErrorKind::Config, where + ": parameter count mismatch");
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::string name = get_string(in, get<std::uint64_t>(in, where), where);
        Param& p = model.param(name);
        p.group = static_cast<ParamGroup>(get<std::uint8_t>(in, where));
        p.trainable = get<std::uint8_t>(in, where) != 0;
        const auto rows = get<std::uint64_t>(in, where);
        const auto cols = get<std::uint64_t>(in, where);
        if (rows != static_cast<std::uint64_t>(p.value.rows()) || cols != static_cast<std::uint64_t>(p.value.cols())) {
            fail(ErrorKind::Config, where + ": shape mismatch for " + name);
        }
        if (!in.read(reinterpret_cast<char*>(p.value.data()),
                     static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.value.size())))) {
            fail(ErrorKind::Io, where + ": truncated checkpoint");
        }
    }
    if (metadata_json) *metadata_json = header.value("metadata", json::object()).dump();
    return model;
}

std::uint64_t fingerprint(const ToyModel& model, ParamGroup group) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const Param& p : model.params()) {
        if (p.group != group) continue;
        const auto* bytes = reinterpret_cast<const unsigned char*>(p.value.data());
        for (std::size_t i = 0; i < sizeof(double) * static_cast<std::size_t>(p.value.size()); ++i) {
            h = (h ^ bytes[i]) * 1099511628211ULL;
        }
    }
    return h;
}

bool vision_matches_pretrained(const ToyModel& model) {
    auto [w, b] = pretrained_vision(model.config());
    const Matrix& cw = model.param("vision.patch_w").value;
    const Matrix& cb = model.param("vision.patch_b").value;
    return cw.size() == w.size() && cb.size() == b.size() &&
           std::memcmp(cw.data(), w.data(), sizeof(double) * static_cast<std::size_t>(w.size())) == 0 &&
           std::memcmp(cb.data(), b.data(), sizeof(double) * static_cast<std::size_t>(b.size())) == 0;
}

}  // namespace m2se::model
