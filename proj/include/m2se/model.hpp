#pragma once

// Desk-scale vision-language model: frozen patch encoder, linear projector,
// and a two-block causal transformer with low-rank adapters.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "m2se/common.hpp"
#include "m2se/dataset.hpp"

namespace m2se::model {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Tokenizer ------------------------------------------------------------------

/// Character-level vocabulary plus one token per task identifier.
class Tokenizer {
public:
    static const Tokenizer& standard();

    int vocab_size() const { return static_cast<int>(pieces_.size()); }
    int pad() const { return 0; }
    int bos() const { return 1; }
    int eos() const { return 2; }
    int sep() const { return 3; }
    int unk() const { return 4; }

    std::vector<int> encode(std::string_view text) const;
    /// Special tokens other than task identifiers are dropped.
    std::string decode(const std::vector<int>& ids) const;
    const std::string& piece(int id) const { return pieces_.at(static_cast<std::size_t>(id)); }

private:
    Tokenizer();
    std::vector<std::string> pieces_;
    std::map<char, int> char_ids_;
    std::vector<std::pair<std::string, int>> identifiers_;
};

// Media ------------------------------------------------------------------------

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;  // row-major, normalized to [0, 1]
};

/// Reads every image of a (possibly multi-image) binary or plain PGM file.
std::vector<GrayImage> read_pgm_frames(const std::filesystem::path& path);
void write_pgm_frames(const std::filesystem::path& path, const std::vector<GrayImage>& frames);

struct EncoderConfig {
    int image_size = 448;  // frames are resized to image_size x image_size
    int patch_size = 32;
    int max_frames = 1;  // uniform stride when a video has more frames
    int d_vision = 16;
};

int tokens_per_frame(const EncoderConfig& config);

/// Decoded media ready for the encoder: flattened patches, or precomputed
/// visual features that bypass the encoder.
struct MediaInput {
    std::string provenance;
    Matrix patches;   // (frames * tokens_per_frame) x patch_size^2
    Matrix features;  // used instead of patches when non-empty
    bool precomputed() const { return features.size() > 0; }

    /// One all-zero patch, for records without media.
    static MediaInput blank(const EncoderConfig& config);
};

/// Resolves `ref` against `root`. A "#frame=N" suffix selects the N-th image
/// (1-based) of the file; otherwise frames are sampled with uniform stride up
/// to max_frames. ".feat" files hold "rows cols" then rows*cols values and are
/// returned as precomputed features. Throws Io for unreadable media.
MediaInput load_media(const std::string& ref, const std::filesystem::path& root, const EncoderConfig& config);
MediaInput media_from_frames(const std::vector<GrayImage>& frames, const EncoderConfig& config,
                             std::string provenance = "<frames>");

// Model ------------------------------------------------------------------------

struct AdapterConfig {
    int rank = 8;
    double alpha = 32.0;
    std::vector<std::string> targets = {"attn_q", "attn_k", "attn_v", "attn_o", "mlp_in", "mlp_out"};
};

struct ModelConfig {
    EncoderConfig encoder;
    int d_model = 32;
    int layers = 2;
    int d_ff = 64;
    int max_positions = 1024;
    std::uint64_t seed = 0;
    bool freeze_vision = true;
};

enum class ParamGroup { Vision, Projector, Language, Adapter };

std::string_view to_string(ParamGroup group);

struct Param {
    std::string name;
    ParamGroup group = ParamGroup::Language;
    Matrix value;
    Matrix grad;
    bool trainable = true;
};

class ToyModel {
public:
    explicit ToyModel(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }
    const std::optional<AdapterConfig>& adapters() const { return adapters_; }

    std::vector<Param>& params() { return params_; }
    const std::vector<Param>& params() const { return params_; }
    bool has_param(std::string_view name) const;
    Param& param(std::string_view name);
    const Param& param(std::string_view name) const;

    std::size_t trainable_parameter_count() const;
    std::size_t parameter_count(ParamGroup group) const;

    /// Effective weight of a block linear layer, base + (alpha / r) * A * B.
    Matrix effective_weight(int layer, std::string_view kind) const;

    void zero_grad();

    /// Marks the vision encoder frozen or trainable (used when resuming).
    void set_freeze_vision(bool frozen);

private:
    friend ToyModel apply_adapters(ToyModel model, const AdapterConfig& adapters);
    friend ToyModel load_checkpoint(const std::filesystem::path& path, std::string* metadata_json);

    Param& add(std::string name, ParamGroup group, Matrix value, bool trainable);
    void reindex();

    ModelConfig config_;
    std::optional<AdapterConfig> adapters_;
    std::vector<Param> params_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

inline const std::vector<std::string>& block_linear_kinds() {
    static const std::vector<std::string> kinds = {"attn_q", "attn_k", "attn_v", "attn_o", "mlp_in", "mlp_out"};
    return kinds;
}

std::string layer_param_name(int layer, std::string_view kind);

/// Adds a trainable rank-r factor pair to every targeted block layer of
/// every block (second factor zero-initialized) and freezes the language
/// model's base weights. Throws Config when r < 1, r > min(d_in, d_out), a
/// target is unknown, or adapters are already present.
ToyModel apply_adapters(ToyModel model, const AdapterConfig& adapters);

/// Σ r * (d_in + d_out) over targeted layers.
std::size_t expected_adapter_parameters(const ModelConfig& config, const AdapterConfig& adapters);

// Pipeline stages ----------------------------------------------------------------

struct VisualTokens {
    Matrix tokens;  // num_tokens x d_vision
    std::string provenance;
};

struct ProjectedTokens {
    Matrix tokens;  // num_tokens x d_model
};

struct TextTokens {
    std::vector<int> ids;
    Matrix embedded;  // seq_len x d_model
};

struct FusedInput {
    Matrix x;  // visual rows first, then text rows
    std::size_t boundary = 0;
};

VisualTokens encode_media(const MediaInput& media, const ToyModel& model);
ProjectedTokens project(const VisualTokens& visual, const ToyModel& model);
TextTokens embed_text(const std::vector<int>& ids, const ToyModel& model);
FusedInput fuse(const ProjectedTokens& visual, const TextTokens& text);

/// Next-token logits for every row of the fused input. Throws Numeric on a
/// non-finite logit and Shape when the input exceeds max_positions.
Matrix logits(const FusedInput& input, const ToyModel& model);

struct DecodeConfig {
    bool greedy = true;
    double temperature = 1.0;
    std::uint64_t seed = 0;
    int max_new_tokens = 64;
};

/// Autoregressive continuation of the fused prompt, stopping at end-of-sequence.
std::string forward(const FusedInput& input, const ToyModel& model, const DecodeConfig& decode = {});

// Training examples ----------------------------------------------------------------

/// [bos] identifier+query [sep]
std::vector<int> prompt_ids(const dataset::TaskRecord& record);

struct Example {
    std::shared_ptr<const MediaInput> media;
    std::vector<int> ids;          // prompt followed by response and [eos]
    std::size_t response_start = 0;  // index in ids of the first response token
};

Example make_example(const dataset::TaskRecord& record, std::shared_ptr<const MediaInput> media);

/// Mean next-token cross-entropy over response tokens.
double loss(const ToyModel& model, const Example& example);
/// Same loss; adds its gradient to every parameter's grad.
double loss_and_grad(ToyModel& model, const Example& example);

/// Generates a response for a record.
std::string respond(const ToyModel& model, const dataset::TaskRecord& record, const MediaInput& media,
                    const DecodeConfig& decode = {});

// Checkpoints ----------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ToyModel& model,
                     const std::string& metadata_json = "{}");
ToyModel load_checkpoint(const std::filesystem::path& path, std::string* metadata_json = nullptr);

/// FNV-1a over the raw bytes of every parameter in `group`.
std::uint64_t fingerprint(const ToyModel& model, ParamGroup group);
/// True when the vision encoder still holds its seed-determined weights.
bool vision_matches_pretrained(const ToyModel& model);

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace m2se::model
