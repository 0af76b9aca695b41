#pragma once

#include <array>
#include <string>
#include <vector>

#include "medseq/corpus.hpp"

namespace medseq {

/// strict: identical class and identical fragment offsets.
/// lenient: identical class and >= 1 overlapping character.
enum class MatchMode { Strict, Lenient };

enum class Matcher { GreedyFirstOverlap, MaximumBipartite };

struct ClassCounts {
    EntityClass cls = EntityClass::Drug;
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

/// One-to-one pairing of gold and predicted annotations of a single class.
/// Greedy: gold in ascending start order, each matched to the first unmatched
/// qualifying prediction. The bipartite matcher maximizes the pairing instead.
ClassCounts match_spans(std::vector<Annotation> gold, std::vector<Annotation> pred,
                        MatchMode mode, Matcher matcher = Matcher::GreedyFirstOverlap);

struct ClassScore {
    EntityClass cls = EntityClass::Drug;
    long tp = 0, fp = 0, fn = 0;
    double precision = 0.0;  // percent
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    MatchMode mode = MatchMode::Lenient;
    std::array<ClassScore, kNumClasses> per_class;
    ClassScore micro;  // pooled counts
    ClassScore macro;  // unweighted mean over the 9 classes
};

/// Pools per-class counts (across documents) into percentages.
EvalReport score(const std::vector<ClassCounts>& counts, MatchMode mode);

/// 10x10 token confusion over {9 classes + O}; rows actual, columns
/// predicted, axes ordered Strength, Frequency, Form, Route, Drug, Dosage,
/// Duration, Reason, ADE, O.
struct TokenConfusion {
    std::array<std::array<long, kNumClasses + 1>, kNumClasses + 1> cells{};

    void add(const std::vector<IOBLabel>& gold, const std::vector<IOBLabel>& pred);
    long total() const;
};

/// Axis order of the confusion matrix (index of each class, O last).
extern const std::array<EntityClass, kNumClasses> kConfusionOrder;
int confusion_index(const IOBLabel& label);

TokenConfusion token_confusion(const std::vector<IOBLabel>& gold,
                               const std::vector<IOBLabel>& pred);

/// Text table: per-class rows by descending F1, then micro and macro, two
/// decimals everywhere.
std::string render_report_text(const EvalReport& report, const TokenConfusion& confusion);

/// Machine-readable object: mode, per_class, micro, macro, confusion.
std::string render_report_json(const EvalReport& report, const TokenConfusion& confusion);

}  // namespace medseq
