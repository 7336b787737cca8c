#pragma once

// Facial action-unit scoring, peak-frame selection and AU-grounded captions.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "m2se/common.hpp"

namespace m2se::au {

using AuId = std::string;  // canonical form "AU" + two digits, e.g. "AU06"

bool is_canonical_au(std::string_view id);

struct AUFrame {
    std::int64_t frame_index = 0;
    std::map<AuId, double> au_intensities;
};

struct AUTrack {
    std::string character_id;
    std::vector<AUFrame> frames;  // strictly increasing frame_index
};

struct PeakSelection {
    std::string character_id;
    std::int64_t frame_index = 0;
    double score = 0.0;

    bool operator==(const PeakSelection&) const = default;
};

struct EmotionAUTable {
    std::map<EmotionLabel, std::set<AuId>> entries;

    const std::set<AuId>& at(EmotionLabel e) const;
};

struct AULexicon {
    std::map<AuId, std::string> phrases;
    std::string neutral_caption = "no salient facial action units";
};

/// Composite frame score: sum of every AU intensity. Throws Validation when an
/// intensity is negative or non-finite.
double frame_score(const AUFrame& frame);

/// Highest-scoring frame of one character. Ties go to the lowest frame_index.
PeakSelection find_peak_frame(const AUTrack& track);

/// Highest-scoring frame over all characters. Ties go to the lexicographically
/// smallest character_id, then the lowest frame_index. Empty tracks are
/// ignored; throws EmptyInput if nothing remains.
PeakSelection select_final_peak(std::span<const AUTrack> tracks);

/// AUs listed for `emotion` whose intensity in `frame` exceeds the threshold.
std::set<AuId> common_aus(const AUFrame& frame, EmotionLabel emotion, const EmotionAUTable& table,
                          double presence_threshold = 0.0);

/// Lexicon phrases joined by ", " in ascending AU order; the neutral caption
/// for an empty set.
std::string caption_from_aus(const std::set<AuId>& aus, const AULexicon& lexicon);

const AUFrame& frame_at(const AUTrack& track, std::int64_t frame_index);

// Configuration ---------------------------------------------------------------

EmotionAUTable default_emotion_au_table();
AULexicon default_au_lexicon();

/// Checks coverage of the seven emotions and the AU namespace. Throws Config.
void validate_table(const EmotionAUTable& table);
/// Checks that every AU used by `table` has a phrase. Throws Config.
void validate_lexicon(const AULexicon& lexicon, const EmotionAUTable& table);

EmotionAUTable load_emotion_au_table(const std::filesystem::path& path);
AULexicon load_au_lexicon(const std::filesystem::path& path);
std::string emotion_au_table_to_json(const EmotionAUTable& table);
std::string au_lexicon_to_json(const AULexicon& lexicon);

// OpenFace-style per-frame tables --------------------------------------------

/// Parses a delimited AU table with a header row. Requires `frame` and
/// `face_id` columns; every `AU<nn>_r` column becomes an intensity, other
/// columns are ignored. Rows are grouped into one track per face_id
/// (character_id "face<id>"), sorted by frame. Throws Io or Validation.
std::vector<AUTrack> parse_au_table(std::string_view text, const std::string& source_name = "<memory>");
std::vector<AUTrack> load_au_table(const std::filesystem::path& path);

}  // namespace m2se::au
