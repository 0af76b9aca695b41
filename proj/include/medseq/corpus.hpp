#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace medseq {

/// The nine drug-related entity classes of the task.
enum class EntityClass {
    Drug,
    Strength,
    Form,
    Frequency,
    Route,
    Dosage,
    Reason,
    ADE,
    Duration,
};

inline constexpr int kNumClasses = 9;
inline constexpr std::array<EntityClass, kNumClasses> kAllClasses = {
    EntityClass::Drug,   EntityClass::Strength, EntityClass::Form,
    EntityClass::Frequency, EntityClass::Route, EntityClass::Dosage,
    EntityClass::Reason, EntityClass::ADE,      EntityClass::Duration,
};

const std::string& to_string(EntityClass cls);
/// Throws UnknownNameError for names outside the nine-class set.
EntityClass entity_class_from_string(const std::string& name);

/// Half-open character range in code points.
struct Fragment {
    std::size_t begin = 0;
    std::size_t end = 0;
    bool operator==(const Fragment&) const = default;
};

/// One entity mention: possibly discontinuous, offsets are authoritative.
struct Annotation {
    std::string id;
    EntityClass cls = EntityClass::Drug;
    std::vector<Fragment> fragments;
    std::string text;  // fragment surfaces joined by a single space

    std::size_t start() const { return fragments.empty() ? 0 : fragments.front().begin; }
    std::size_t end() const { return fragments.empty() ? 0 : fragments.back().end; }
    std::size_t covered_length() const;
};

struct Document {
    std::string id;
    std::string text;  // UTF-8
    std::vector<Annotation> annotations;
};

struct Token {
    std::string surface;
    std::size_t begin = 0;  // code-point offsets into the document text
    std::size_t end = 0;
    bool operator==(const Token&) const = default;
};

enum class IOBTag { B, I, O };

/// IOB label; cls is meaningful only when tag != O. 19 distinct labels.
struct IOBLabel {
    IOBTag tag = IOBTag::O;
    EntityClass cls = EntityClass::Drug;

    static IOBLabel outside() { return {IOBTag::O, EntityClass::Drug}; }
    bool is_outside() const { return tag == IOBTag::O; }
    bool operator==(const IOBLabel& other) const {
        return tag == other.tag && (tag == IOBTag::O || cls == other.cls);
    }
};

inline constexpr int kNumLabels = 2 * kNumClasses + 1;  // 19

/// Dense label indexing: O = 0, B-cls = 1 + 2*cls, I-cls = 2 + 2*cls.
int label_index(const IOBLabel& label);
IOBLabel label_from_index(int index);
std::string label_name(const IOBLabel& label);
IOBLabel label_from_name(const std::string& name);

/// A contiguous run of tokens from one document, the unit the network sees.
struct Segment {
    std::string document_id;
    std::vector<Token> tokens;
    std::optional<std::vector<IOBLabel>> labels;
};

// ---------------------------------------------------------------------------
// Standoff annotation files:  T<id>\t<Class> <start> <end>[;<start> <end>]*\t<surface>

/// Parses an annotation file against its document text. Lines not starting
/// with 'T' are ignored. A surface that disagrees with the text at the stated
/// offsets is kept (offsets win) and reported through `warnings`.
Document read_standoff(const std::string& text, const std::string& ann,
                       std::vector<std::string>* warnings = nullptr,
                       const std::string& doc_id = "");

std::string write_standoff(const Document& doc);

// ---------------------------------------------------------------------------
// Tokenization. Whitespace split, leading/trailing punctuation split off as
// single-character tokens, interior punctuation split except inside numbers
// ("2.5") and single-letter abbreviations ("p.o."). Offsets are exact.

std::vector<Token> tokenize(const std::string& text);

// ---------------------------------------------------------------------------
// Segmentation: one segment per line, lines merged when an annotation
// fragment crosses the break, segments capped at kMaxSegmentTokens with the
// overflow split at the nearest annotation-free token boundary.

inline constexpr std::size_t kMaxSegmentTokens = 120;

std::vector<Segment> segment(const Document& doc);

// ---------------------------------------------------------------------------
// IOB conversion.

/// Labels each token with the class of the annotation it overlaps; first
/// token of an annotation gets B, later ones I. When two annotations claim a
/// token the one with the larger covered length wins (tie: earlier start) and
/// a warning is recorded.
std::vector<IOBLabel> spans_to_iob(const std::vector<Token>& tokens,
                                   const std::vector<Annotation>& annotations,
                                   std::vector<std::string>* warnings = nullptr);

/// Merges label runs back into annotations. An I-X without a preceding B-X or
/// I-X opens a new entity; produced annotations have a single fragment and
/// their text is the covered token surfaces joined by single spaces.
std::vector<Annotation> iob_to_spans(const std::vector<Token>& tokens,
                                     const std::vector<IOBLabel>& labels);

}  // namespace medseq
