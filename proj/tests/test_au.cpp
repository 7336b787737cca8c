#include <doctest.h>

#include <random>

#include "m2se/au_analysis.hpp"
#include "oracles.hpp"

using namespace m2se;
using namespace m2se::au;

namespace {

AUFrame frame(std::int64_t idx, std::map<std::string, double> v) { return AUFrame{idx, std::move(v)}; }

bool is_subset(const std::set<std::string>& a, const std::set<std::string>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

TEST_CASE("frame score sums intensities and rejects bad values") {
    CHECK(frame_score(frame(0, {{"AU01", 1.5}, {"AU12", 2.0}})) == doctest::Approx(3.5));
    CHECK(frame_score(frame(0, {})) == 0.0);
    CHECK_THROWS_AS(frame_score(frame(0, {{"AU01", -0.1}})), Error);
    CHECK_THROWS_AS(frame_score(frame(0, {{"AU01", std::nan("")}})), Error);
}

TEST_CASE("peak of one track prefers the earliest frame on ties") {
    AUTrack t{"a", {frame(3, {{"AU01", 1.0}}), frame(5, {{"AU01", 2.0}}), frame(9, {{"AU01", 2.0}})}};
    const auto p = find_peak_frame(t);
    CHECK(p.character_id == "a");
    CHECK(p.frame_index == 5);
    CHECK(p.score == 2.0);
    CHECK_THROWS_AS(find_peak_frame(AUTrack{"empty", {}}), Error);
}

TEST_CASE("final peak across characters breaks ties by character id") {
    std::vector<AUTrack> tracks = {
        {"zoe", {frame(1, {{"AU06", 3.0}})}},
        {"amy", {frame(7, {{"AU06", 3.0}})}},
        {"bob", {frame(2, {{"AU06", 1.0}})}},
        {"nobody", {}},
    };
    const auto p = select_final_peak(tracks);
    CHECK(p.character_id == "amy");
    CHECK(p.frame_index == 7);

    // Input order does not matter.
    std::reverse(tracks.begin(), tracks.end());
    CHECK(select_final_peak(tracks) == p);

    CHECK_THROWS_AS(select_final_peak(std::vector<AUTrack>{}), Error);
}

TEST_CASE("peak selection agrees with a brute-force scan") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const auto tracks = oracle::random_tracks(rng);
        const auto expected = oracle::brute_peak(tracks);
        REQUIRE(expected);
        const auto got = select_final_peak(tracks);
        CHECK(got.character_id == expected->character);
        CHECK(got.frame_index == expected->frame);
        CHECK(got.score == expected->score);
        for (const auto& t : tracks) {
            const auto single = oracle::brute_peak({t});
            CHECK(find_peak_frame(t).frame_index == single->frame);
        }
    }
}

TEST_CASE("common AUs are the thresholded intersection") {
    const auto table = default_emotion_au_table();
    const auto f = frame(0, {{"AU06", 2.0}, {"AU12", 0.0}, {"AU04", 1.0}});
    CHECK(common_aus(f, EmotionLabel::Joy, table) == std::set<std::string>{"AU06"});
    CHECK(common_aus(f, EmotionLabel::Anger, table) == std::set<std::string>{"AU04"});
    CHECK(common_aus(f, EmotionLabel::Neutral, table).empty());
    CHECK(common_aus(f, EmotionLabel::Anger, table, 1.0).empty());
    CHECK_THROWS_AS(common_aus(f, EmotionLabel::Joy, table, -1.0), Error);

    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const auto tracks = oracle::random_tracks(rng, 1, 1);
        const auto& fr = tracks.front().frames.front();
        const auto e = kAllEmotions[static_cast<std::size_t>(rng() % 7)];
        const double lo = 0.5 * static_cast<double>(rng() % 6);
        const auto got = common_aus(fr, e, table, lo);
        CHECK(got == oracle::brute_common(fr, table.at(e), lo));
        CHECK(is_subset(common_aus(fr, e, table, lo + 1.0), got));
    }
}

TEST_CASE("captions follow AU order and fall back to the neutral caption") {
    const auto lex = default_au_lexicon();
    CHECK(caption_from_aus({"AU12", "AU06"}, lex) == "cheek raiser, lip corner puller");
    CHECK(caption_from_aus({}, lex) == lex.neutral_caption);
    CHECK_THROWS_AS(caption_from_aus({"AU99"}, lex), Error);
}

TEST_CASE("table and lexicon validation") {
    auto table = default_emotion_au_table();
    CHECK_NOTHROW(validate_table(table));
    CHECK_NOTHROW(validate_lexicon(default_au_lexicon(), table));

    auto missing = table;
    missing.entries.erase(EmotionLabel::Fear);
    CHECK_THROWS_AS(validate_table(missing), Error);

    auto lex = default_au_lexicon();
    lex.phrases.erase("AU12");
    CHECK_THROWS_AS(validate_lexicon(lex, table), Error);
}

TEST_CASE("bundled AU config files match the built-in defaults") {
    const std::filesystem::path dir = M2SE_SOURCE_DIR "/configs";
    CHECK(load_emotion_au_table(dir / "emotion_au_table.json").entries == default_emotion_au_table().entries);
    const auto lex = load_au_lexicon(dir / "au_lexicon.json");
    CHECK(lex.phrases == default_au_lexicon().phrases);
    CHECK(lex.neutral_caption == default_au_lexicon().neutral_caption);
}

TEST_CASE("OpenFace-style tables parse into per-face tracks") {
    const std::string csv =
        "frame, face_id, timestamp, confidence, AU01_r, AU12_r, AU01_c\n"
        "2, 1, 0.04, 0.9, 0.5, 1.0, 1\n"
        "1, 0, 0.00, 0.9, 0.2, 0.3, 0\n"
        "2, 0, 0.04, 0.9, 1.2, 2.5, 1\n"
        "1, 1, 0.00, 0.9, 0.0, 0.1, 0\n";
    const auto tracks = parse_au_table(csv);
    REQUIRE(tracks.size() == 2);
    CHECK(tracks[0].character_id == "face0");
    CHECK(tracks[1].character_id == "face1");
    REQUIRE(tracks[0].frames.size() == 2);
    CHECK(tracks[0].frames[0].frame_index == 1);
    CHECK(tracks[0].frames[1].au_intensities.at("AU12") == 2.5);
    CHECK(tracks[0].frames[1].au_intensities.size() == 2);
    CHECK(select_final_peak(tracks).character_id == "face0");

    const std::string tsv = "frame\tface_id\tAU06_r\n1\t0\t0.7\n";
    CHECK(parse_au_table(tsv).front().frames.front().au_intensities.at("AU06") == 0.7);

    CHECK_THROWS_AS(parse_au_table("timestamp, AU01_r\n0.0, 1.0\n"), Error);
    CHECK_THROWS_AS(parse_au_table("frame, face_id, AU01_r\n1, 0, 1.0\n1, 0, 2.0\n"), Error);
    CHECK_THROWS_AS(parse_au_table("frame, face_id, AU01_r\n1, 0, -1.0\n"), Error);
    CHECK_THROWS_AS(parse_au_table("frame, face_id, AU01_r\n1, 0, abc\n"), Error);
    CHECK_THROWS_AS(parse_au_table("frame, face_id, AU01_r\n1, 0\n"), Error);
    CHECK_THROWS_AS(load_au_table("/nonexistent/au.csv"), Error);
}
