#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "medseq/corpus.hpp"

namespace medseq {

/// CLAMP semantic tag categories. O means no tag.
enum class ClampCategory {
    Problem,
    Treatment,
    Test,
    Temporal,
    Negation,
    SeverityDegree,
    BodyLocation,
    Change,
    Uncertainty,
    O,
};

enum class Assertion { Present, Absent, None };

/// The CLAMP vocabulary unit is the (tag, assertion) pair; assertion is None
/// exactly when the tag is O, so the closed set has 9*2 + 1 = 19 units.
struct ClampTag {
    ClampCategory category = ClampCategory::O;
    Assertion assertion = Assertion::None;

    static ClampTag outside() { return {}; }
    bool operator==(const ClampTag&) const = default;
};

/// cTAKES semantic tags, O included: six values.
enum class CtakesTag {
    O,
    Medication,
    DiseaseDisorder,
    SignSymptom,
    AnatomicalSite,
    Procedure,
};

inline constexpr int kClampVocabSize = 19;
inline constexpr int kCtakesVocabSize = 6;
/// Merged-stream ablation: one unit per (clamp, ctakes) pair.
inline constexpr int kMergedVocabSize = kClampVocabSize * kCtakesVocabSize;

struct TokenFeatures {
    ClampTag clamp;
    CtakesTag ctakes = CtakesTag::O;
    bool operator==(const TokenFeatures&) const = default;
};

/// One externally tagged span from the feature sidecar.
struct FeatureRow {
    std::size_t begin = 0;
    std::size_t end = 0;
    ClampTag clamp;                    // (O, None) when the row has '-'
    CtakesTag ctakes = CtakesTag::O;   // O when the row has '-'
};

std::string to_string(const ClampTag& tag);
std::string to_string(CtakesTag tag);
/// Parses "problem:present", "problem" (assertion defaults to present), "O" or "-".
ClampTag clamp_tag_from_string(const std::string& s);
CtakesTag ctakes_tag_from_string(const std::string& s);

/// Dense unit indices with O at 0 in every stream.
int clamp_unit_index(const ClampTag& tag);
int ctakes_unit_index(CtakesTag tag);
int merged_unit_index(const TokenFeatures& f);

/// Reads a sidecar: TSV rows `start \t end \t clamp[:assertion]|- \t ctakes|-`.
std::vector<FeatureRow> parse_token_features(const std::string& content);
std::vector<FeatureRow> read_token_features(const std::string& path);

std::string write_token_features(const std::vector<FeatureRow>& rows);

/// Assigns each token the overlapping row's tags, each stream independently;
/// the row with the largest character overlap wins, untagged tokens get (O, O).
std::vector<TokenFeatures> align_features(const std::vector<Token>& tokens,
                                          std::vector<FeatureRow> rows);

/// Closed-world vocabularies: the full tag sets, observed or not, O first.
struct TagVocab {
    std::vector<std::string> clamp_units;
    std::vector<std::string> ctakes_units;
};

TagVocab build_tag_vocab(const std::vector<std::vector<TokenFeatures>>& sequences);

}  // namespace medseq
