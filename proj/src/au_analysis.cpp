#include "m2se/au_analysis.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace m2se::au {

using nlohmann::json;

bool is_canonical_au(std::string_view id) {
    return id.size() == 4 && id[0] == 'A' && id[1] == 'U' &&
           std::isdigit(static_cast<unsigned char>(id[2])) &&
           std::isdigit(static_cast<unsigned char>(id[3]));
}

const std::set<AuId>& EmotionAUTable::at(EmotionLabel e) const {
    auto it = entries.find(e);
    if (it == entries.end()) {
        fail(ErrorKind::Config, "emotion '" + std::string(to_string(e)) + "' missing from AU table");
    }
    return it->second;
}

double frame_score(const AUFrame& frame) {
    double sum = 0.0;
    for (const auto& [id, value] : frame.au_intensities) {
        if (!std::isfinite(value) || value < 0.0) {
            fail(ErrorKind::Validation, "frame " + std::to_string(frame.frame_index) + ": " + id +
                                            " has invalid intensity " + std::to_string(value));
        }
        sum += value;
    }
    return sum;
}

PeakSelection find_peak_frame(const AUTrack& track) {
    if (track.frames.empty()) {
        fail(ErrorKind::EmptyInput, "track '" + track.character_id + "' has no frames");
    }
    PeakSelection best{track.character_id, track.frames.front().frame_index,
                       frame_score(track.frames.front())};
    for (std::size_t i = 1; i < track.frames.size(); ++i) {
        const AUFrame& f = track.frames[i];
        const double s = frame_score(f);
        // Frames need not be sorted here, so compare indices explicitly on ties.
        if (s > best.score || (s == best.score && f.frame_index < best.frame_index)) {
            best.frame_index = f.frame_index;
            best.score = s;
        }
    }
    return best;
}

PeakSelection select_final_peak(std::span<const AUTrack> tracks) {
    std::optional<PeakSelection> best;
    for (const AUTrack& track : tracks) {
        if (track.frames.empty()) continue;
        PeakSelection p = find_peak_frame(track);
        if (!best || p.score > best->score ||
            (p.score == best->score &&
             (p.character_id < best->character_id ||
              (p.character_id == best->character_id && p.frame_index < best->frame_index)))) {
            best = std::move(p);
        }
    }
    if (!best) fail(ErrorKind::EmptyInput, "no non-empty AU track to select a peak from");
    return *best;
}

std::set<AuId> common_aus(const AUFrame& frame, EmotionLabel emotion, const EmotionAUTable& table,
                          double presence_threshold) {
    if (!(presence_threshold >= 0.0)) {
        fail(ErrorKind::Config, "presence threshold must be >= 0");
    }
    std::set<AuId> out;
    for (const AuId& id : table.at(emotion)) {
        auto it = frame.au_intensities.find(id);
        if (it != frame.au_intensities.end() && it->second > presence_threshold) out.insert(id);
    }
    return out;
}

std::string caption_from_aus(const std::set<AuId>& aus, const AULexicon& lexicon) {
    if (aus.empty()) return lexicon.neutral_caption;
    std::string caption;
    for (const AuId& id : aus) {
        auto it = lexicon.phrases.find(id);
        if (it == lexicon.phrases.end()) fail(ErrorKind::Config, "no lexicon phrase for " + id);
        if (!caption.empty()) caption += ", ";
        caption += it->second;
    }
    return caption;
}

const AUFrame& frame_at(const AUTrack& track, std::int64_t frame_index) {
    for (const AUFrame& f : track.frames) {
        if (f.frame_index == frame_index) return f;
    }
    fail(ErrorKind::Validation,
         "track '" + track.character_id + "' has no frame " + std::to_string(frame_index));
}

// Configuration ---------------------------------------------------------------

EmotionAUTable default_emotion_au_table() {
    EmotionAUTable t;
    t.entries[EmotionLabel::Anger] = {"AU04", "AU05", "AU07", "AU23"};
    t.entries[EmotionLabel::Disgust] = {"AU09", "AU10", "AU15"};
    t.entries[EmotionLabel::Sadness] = {"AU01", "AU04", "AU15"};
    t.entries[EmotionLabel::Joy] = {"AU06", "AU12"};
    t.entries[EmotionLabel::Neutral] = {};
    t.entries[EmotionLabel::Surprise] = {"AU01", "AU02", "AU05", "AU26"};
    t.entries[EmotionLabel::Fear] = {"AU01", "AU02", "AU04", "AU05", "AU07", "AU20", "AU26"};
    return t;
}

AULexicon default_au_lexicon() {
    AULexicon lex;
    lex.phrases = {
        {"AU01", "inner brow raiser"},   {"AU02", "outer brow raiser"},
        {"AU04", "brow lowerer"},        {"AU05", "upper lid raiser"},
        {"AU06", "cheek raiser"},        {"AU07", "lid tightener"},
        {"AU09", "nose wrinkler"},       {"AU10", "upper lip raiser"},
        {"AU12", "lip corner puller"},   {"AU14", "dimpler"},
        {"AU15", "lip corner depressor"}, {"AU17", "chin raiser"},
        {"AU20", "lip stretcher"},       {"AU23", "lip tightener"},
        {"AU25", "lips part"},           {"AU26", "jaw drop"},
        {"AU45", "blink"},
    };
    return lex;
}

void validate_table(const EmotionAUTable& table) {
    for (EmotionLabel e : kAllEmotions) {
        if (!table.entries.contains(e)) {
            fail(ErrorKind::Config, "AU table has no entry for '" + std::string(to_string(e)) + "'");
        }
    }
    for (const auto& [e, ids] : table.entries) {
        for (const AuId& id : ids) {
            if (!is_canonical_au(id)) {
                fail(ErrorKind::Config, "AU table entry for '" + std::string(to_string(e)) +
                                            "' has non-canonical AU '" + id + "'");
            }
        }
    }
}

void validate_lexicon(const AULexicon& lexicon, const EmotionAUTable& table) {
    for (const auto& [e, ids] : table.entries) {
        for (const AuId& id : ids) {
            if (!lexicon.phrases.contains(id)) {
                fail(ErrorKind::Config, "AU lexicon has no phrase for " + id);
            }
        }
    }
}

namespace {

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, path.string() + ": " + e.what());
    }
}

}  // namespace

EmotionAUTable load_emotion_au_table(const std::filesystem::path& path) {
    const json doc = read_json_file(path);
    const json& body = doc.contains("emotions") ? doc.at("emotions") : doc;
    if (!body.is_object()) fail(ErrorKind::Config, path.string() + ": expected an object of emotions");
    EmotionAUTable table;
    for (const auto& [key, value] : body.items()) {
        auto e = parse_emotion(key);
        if (!e) fail(ErrorKind::Config, path.string() + ": unknown emotion '" + key + "'");
        if (!value.is_array()) fail(ErrorKind::Config, path.string() + ": '" + key + "' must be a list");
        auto& ids = table.entries[*e];
        for (const auto& v : value) ids.insert(v.get<std::string>());
    }
    validate_table(table);
    return table;
}

AULexicon load_au_lexicon(const std::filesystem::path& path) {
    const json doc = read_json_file(path);
    AULexicon lex;
    if (!doc.contains("phrases") || !doc.at("phrases").is_object()) {
        fail(ErrorKind::Config, path.string() + ": missing 'phrases' object");
    }
    for (const auto& [key, value] : doc.at("phrases").items()) {
        if (!is_canonical_au(key)) fail(ErrorKind::Config, path.string() + ": non-canonical AU '" + key + "'");
        lex.phrases[key] = value.get<std::string>();
    }
    if (doc.contains("neutral_caption")) lex.neutral_caption = doc.at("neutral_caption").get<std::string>();
    return lex;
}

std::string emotion_au_table_to_json(const EmotionAUTable& table) {
    json body = json::object();
    for (const auto& [e, ids] : table.entries) body[std::string(to_string(e))] = ids;
    return json{{"emotions", body}}.dump(2);
}

std::string au_lexicon_to_json(const AULexicon& lexicon) {
    return json{{"phrases", lexicon.phrases}, {"neutral_caption", lexicon.neutral_caption}}.dump(2);
}

// OpenFace-style per-frame tables --------------------------------------------

namespace {

std::vector<std::string_view> split_row(std::string_view line, char delim) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delim, start);
        cells.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

double parse_number(std::string_view cell, const std::string& where) {
    // std::from_chars for double is available in libstdc++ 11.
    double value = 0.0;
    const char* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        fail(ErrorKind::Validation, where + ": not a number '" + std::string(cell) + "'");
    }
    return value;
}

}  // namespace

std::vector<AUTrack> parse_au_table(std::string_view text, const std::string& source_name) {
    std::vector<std::string_view> lines;
    {
        std::size_t start = 0;
        while (start <= text.size()) {
            std::size_t pos = text.find('\n', start);
            std::string_view line = text.substr(start, pos == std::string_view::npos ? pos : pos - start);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            if (!trim(line).empty()) lines.push_back(line);
            if (pos == std::string_view::npos) break;
            start = pos + 1;
        }
    }
    if (lines.empty()) fail(ErrorKind::Validation, source_name + ": missing header row");

    const char delim = lines.front().find('\t') != std::string_view::npos &&
                               lines.front().find(',') == std::string_view::npos
                           ? '\t'
                           : ',';
    const auto header = split_row(lines.front(), delim);
    std::optional<std::size_t> frame_col, face_col;
    std::vector<std::pair<std::size_t, AuId>> au_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string_view h = header[i];
        if (h == "frame") frame_col = i;
        else if (h == "face_id") face_col = i;
        else if (h.size() == 6 && h.substr(4) == "_r" && is_canonical_au(h.substr(0, 4))) {
            au_cols.emplace_back(i, AuId(h.substr(0, 4)));
        }
    }
    if (!frame_col || !face_col) {
        fail(ErrorKind::Validation, source_name + ": header needs 'frame' and 'face_id' columns");
    }

    std::map<std::string, AUTrack> by_face;
    for (std::size_t row = 1; row < lines.size(); ++row) {
        const auto cells = split_row(lines[row], delim);
        const std::string where = source_name + ":" + std::to_string(row + 1);
        if (cells.size() != header.size()) {
            fail(ErrorKind::Validation, where + ": expected " + std::to_string(header.size()) +
                                            " cells, got " + std::to_string(cells.size()));
        }
        const double frame_value = parse_number(cells[*frame_col], where);
        if (frame_value < 0 || frame_value != std::floor(frame_value)) {
            fail(ErrorKind::Validation, where + ": frame must be a non-negative integer");
        }
        AUFrame frame;
        frame.frame_index = static_cast<std::int64_t>(frame_value);
        for (const auto& [col, id] : au_cols) {
            const double v = parse_number(cells[col], where);
            if (!std::isfinite(v) || v < 0.0) {
                fail(ErrorKind::Validation, where + ": " + id + " intensity must be >= 0");
            }
            frame.au_intensities[id] = v;
        }
        const std::string face(cells[*face_col]);
        AUTrack& track = by_face[face];
        track.character_id = "face" + face;
        track.frames.push_back(std::move(frame));
    }

    std::vector<AUTrack> tracks;
    for (auto& [face, track] : by_face) {
        std::sort(track.frames.begin(), track.frames.end(),
                  [](const AUFrame& a, const AUFrame& b) { return a.frame_index < b.frame_index; });
        for (std::size_t i = 1; i < track.frames.size(); ++i) {
            if (track.frames[i].frame_index == track.frames[i - 1].frame_index) {
                fail(ErrorKind::Validation, source_name + ": duplicate frame " +
                                                std::to_string(track.frames[i].frame_index) +
                                                " for " + track.character_id);
            }
        }
        tracks.push_back(std::move(track));
    }
    return tracks;
}

std::vector<AUTrack> load_au_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open AU table " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_au_table(buf.str(), path.string());
}

}  // namespace m2se::au
