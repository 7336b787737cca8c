#include <algorithm>
#include <cctype>
#include <cmath>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "m2se/model.hpp"

namespace m2se::model {

namespace fs = std::filesystem;

// Tokenizer ------------------------------------------------------------------

Tokenizer::Tokenizer() {
    pieces_ = {"<pad>", "<bos>", "<eos>", "<sep>", "<unk>"};
    for (TaskKind t : kAllTasks) {
        identifiers_.emplace_back(std::string(task_identifier(t)), static_cast<int>(pieces_.size()));
        pieces_.emplace_back(task_identifier(t));
    }
    // Longest identifier first so "<emotion cause-pair>" wins over "<emotion>".
    std::sort(identifiers_.begin(), identifiers_.end(),
              [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
    auto add_char = [&](char c) {
        char_ids_[c] = static_cast<int>(pieces_.size());
        pieces_.emplace_back(1, c);
    };
    add_char('\n');
    for (char c = 32; c < 127; ++c) add_char(c);
}

const Tokenizer& Tokenizer::standard() {
    static const Tokenizer tok;
    return tok;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
    std::vector<int> ids;
    std::size_t i = 0;
    while (i < text.size()) {
        bool matched = false;
        if (text[i] == '<') {
            for (const auto& [id_text, id] : identifiers_) {
                if (text.substr(i).starts_with(id_text)) {
                    ids.push_back(id);
                    i += id_text.size();
                    matched = true;
                    break;
                }
            }
        }
        if (matched) continue;
        auto it = char_ids_.find(text[i]);
        ids.push_back(it == char_ids_.end() ? unk() : it->second);
        ++i;
    }
    return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id < 0 || id >= vocab_size() || id <= unk()) continue;
        out += pieces_[static_cast<std::size_t>(id)];
    }
    return out;
}

// PGM frames ---------------------------------------------------------------------

namespace {

class PgmReader {
public:
    explicit PgmReader(std::string data) : data_(std::move(data)) {}

    bool at_end() {
        skip_space();
        return pos_ >= data_.size();
    }

    GrayImage next(const std::string& where) {
        skip_space();
        if (data_.compare(pos_, 2, "P5") != 0 && data_.compare(pos_, 2, "P2") != 0) {
            fail(ErrorKind::Io, where + ": not a PGM image");
        }
        const bool binary = data_[pos_ + 1] == '5';
        pos_ += 2;
        GrayImage img;
        img.width = static_cast<int>(header_number(where));
        img.height = static_cast<int>(header_number(where));
        const long maxval = header_number(where);
        if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 65535) {
            fail(ErrorKind::Io, where + ": bad PGM header");
        }
        const std::size_t count = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
        img.pixels.resize(count);
        if (binary) {
            ++pos_;  // single whitespace after maxval
            const std::size_t bytes = maxval < 256 ? 1 : 2;
            if (pos_ + count * bytes > data_.size()) fail(ErrorKind::Io, where + ": truncated PGM data");
            for (std::size_t i = 0; i < count; ++i) {
                unsigned v = static_cast<unsigned char>(data_[pos_++]);
                if (bytes == 2) v = (v << 8) | static_cast<unsigned char>(data_[pos_++]);
                img.pixels[i] = static_cast<double>(v) / static_cast<double>(maxval);
            }
        } else {
            for (std::size_t i = 0; i < count; ++i) {
                img.pixels[i] = static_cast<double>(header_number(where)) / static_cast<double>(maxval);
            }
        }
        return img;
    }

private:
    void skip_space() {
        while (pos_ < data_.size()) {
            if (data_[pos_] == '#') {
                while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(data_[pos_]))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    long header_number(const std::string& where) {
        skip_space();
        long value = 0;
        auto [ptr, ec] = std::from_chars(data_.data() + pos_, data_.data() + data_.size(), value);
        if (ec != std::errc{}) fail(ErrorKind::Io, where + ": malformed PGM number");
        pos_ = static_cast<std::size_t>(ptr - data_.data());
        return value;
    }

    std::string data_;
    std::size_t pos_ = 0;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open media " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<GrayImage> read_pgm_frames(const fs::path& path) {
    PgmReader reader(slurp(path));
    std::vector<GrayImage> frames;
    while (!reader.at_end()) frames.push_back(reader.next(path.string()));
    if (frames.empty()) fail(ErrorKind::Io, path.string() + ": no frames");
    return frames;
}

void write_pgm_frames(const fs::path& path, const std::vector<GrayImage>& frames) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    for (const GrayImage& img : frames) {
        out << "P5\n" << img.width << " " << img.height << "\n255\n";
        for (double p : img.pixels) {
            const double c = std::clamp(p, 0.0, 1.0);
            out.put(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
        }
    }
}

// Patch extraction -------------------------------------------------------------

int tokens_per_frame(const EncoderConfig& config) {
    const int grid = config.image_size / config.patch_size;
    return grid * grid;
}

MediaInput MediaInput::blank(const EncoderConfig& config) {
    MediaInput m;
    m.provenance = "<blank>";
    m.patches = Matrix::Zero(1, config.patch_size * config.patch_size);
    return m;
}

MediaInput media_from_frames(const std::vector<GrayImage>& frames, const EncoderConfig& config,
                             std::string provenance) {
    if (config.patch_size <= 0 || config.image_size <= 0 || config.image_size % config.patch_size != 0) {
        fail(ErrorKind::Config, "image_size must be a positive multiple of patch_size");
    }
    if (frames.empty()) fail(ErrorKind::Io, provenance + ": no frames");
    const int size = config.image_size;
    const int patch = config.patch_size;
    const int grid = size / patch;
    const int per_frame = grid * grid;

    MediaInput m;
    m.provenance = std::move(provenance);
    m.patches.resize(static_cast<Eigen::Index>(frames.size()) * per_frame, patch * patch);
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const GrayImage& img = frames[f];
        for (int y = 0; y < size; ++y) {
            // Nearest-neighbour resize to size x size.
            const int sy = static_cast<int>(static_cast<long>(y) * img.height / size);
            for (int x = 0; x < size; ++x) {
                const int sx = static_cast<int>(static_cast<long>(x) * img.width / size);
                const Eigen::Index row = static_cast<Eigen::Index>(f) * per_frame + (y / patch) * grid + (x / patch);
                m.patches(row, (y % patch) * patch + (x % patch)) =
                    img.pixels[static_cast<std::size_t>(sy) * static_cast<std::size_t>(img.width) +
                               static_cast<std::size_t>(sx)];
            }
        }
    }
    return m;
}

namespace {

MediaInput load_features(const fs::path& path) {
    std::istringstream in(slurp(path));
    long rows = 0, cols = 0;
    if (!(in >> rows >> cols) || rows <= 0 || cols <= 0) {
        fail(ErrorKind::Io, path.string() + ": bad feature header");
    }
    MediaInput m;
    m.provenance = path.string();
    m.features.resize(rows, cols);
    for (long r = 0; r < rows; ++r) {
        for (long c = 0; c < cols; ++c) {
            if (!(in >> m.features(r, c))) fail(ErrorKind::Io, path.string() + ": truncated features");
        }
    }
    return m;
}

}  // namespace

MediaInput load_media(const std::string& ref, const fs::path& root, const EncoderConfig& config) {
    std::string file = ref;
    std::optional<long> frame;
    if (auto hash = ref.rfind("#frame="); hash != std::string::npos) {
        file = ref.substr(0, hash);
        const std::string num = ref.substr(hash + 7);
        long value = 0;
        auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), value);
        if (ec != std::errc{} || ptr != num.data() + num.size() || value < 1) {
            fail(ErrorKind::Io, "bad frame selector in media reference '" + ref + "'");
        }
        frame = value;
    }
    const fs::path path = root / file;
    if (path.extension() == ".feat") return load_features(path);

    std::vector<GrayImage> frames = read_pgm_frames(path);
    std::vector<GrayImage> chosen;
    if (frame) {
        if (*frame > static_cast<long>(frames.size())) {
            fail(ErrorKind::Io, ref + ": frame " + std::to_string(*frame) + " beyond " +
                                    std::to_string(frames.size()) + " frames");
        }
        chosen.push_back(frames[static_cast<std::size_t>(*frame - 1)]);
    } else {
        const std::size_t n = frames.size();
        const std::size_t m = static_cast<std::size_t>(std::max(1, config.max_frames));
        if (n <= m) {
            chosen = std::move(frames);
        } else {
            for (std::size_t i = 0; i < m; ++i) chosen.push_back(frames[i * n / m]);
        }
    }
    return media_from_frames(chosen, config, ref);
}

}  // namespace m2se::model
