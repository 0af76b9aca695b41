#include "medseq/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "medseq/errors.hpp"
#include "medseq/rng.hpp"
#include "medseq/utf8.hpp"

namespace medseq {

// Table-calibrated mentions/document, order Drug..Duration.
const std::array<double, kNumClasses> SynthConfig::kDefaultRates = {
    53.55, 22.08, 21.95, 20.73, 18.07, 13.93, 12.72, 3.17, 1.95,
};

namespace {

const std::vector<std::string> kDrugs = {
    "coumadin", "vancomycin", "aspirin", "lasix",
    "prednisone", "o2", "vitamin k", "packed red blood cells",
};
const std::vector<std::string> kStrengths = {
    "8.6 mg", "2.5 mg/3 ml (0.083%)", "400 unit", "100 unit/ml", "5% (700 mg/patch)",
};
const std::vector<std::string> kForms = {
    "tablet", "capsule", "cream", "tablet sustained release 24 hr",
};
const std::vector<std::string> kFrequencies = {
    "daily", "prn", "q4h (every 4 hours) as needed", "qid",
};
const std::vector<std::string> kRoutes = {
    "po", "iv", "by mouth", "inhalation", "p.o.", "topical", "nasal", "injection",
};
const std::vector<std::string> kDosages = {
    "one (1)", "sliding scale", "taper", "2 units", "30 ml",
};
const std::vector<std::string> kReasons = {
    "pain", "constipation", "anxiety", "atrial fibrillation", "pneumonia", "hypotension",
};
const std::vector<std::string> kAdes = {
    "rash", "thrombocytopenia", "toxicity", "diarrhea", "altered mental status",
};
// Shared pool for the ambiguous mode: these surfaces serve both classes.
const std::vector<std::string> kSharedConditions = {
    "nausea", "wheezing", "rash", "hypotension", "diarrhea", "anxiety",
};
const std::vector<std::string> kDurations = {
    "for 7 days", "for one week", "5 days", "few days", "chronically",
};
const std::vector<std::string> kVerbs = {
    "take", "start", "continue", "hold", "give", "resume",
};
const std::vector<std::string> kHeaders = {
    "discharge medications :", "medications on admission :", "hospital course notes :",
};

// Random non-O tag pair for the uncorrelated sidecar rows.
ClampTag random_clamp(Rng& rng) {
    const auto cat = static_cast<ClampCategory>(rng.below(9));
    const auto assertion = rng.bernoulli(0.5) ? Assertion::Present : Assertion::Absent;
    return {cat, assertion};
}

CtakesTag random_ctakes(Rng& rng) {
    return static_cast<CtakesTag>(1 + rng.below(kCtakesVocabSize - 1));
}

/// Builds one document line by line, tracking code-point offsets. The lexicon
/// is ASCII so offsets advance one per byte, but the counter is kept in code
/// points to honor the standoff contract.
class DocBuilder {
  public:
    void word(const std::string& text) {
        if (!line_empty_) append(" ");
        append(text);
    }

    void mention(EntityClass cls, const std::string& surface, std::vector<Annotation>& out) {
        if (!line_empty_) append(" ");
        Annotation a;
        a.id = "T" + std::to_string(out.size() + 1);
        a.cls = cls;
        const std::size_t begin = offset_;
        append(surface);
        a.fragments.push_back({begin, offset_});
        a.text = surface;
        out.push_back(std::move(a));
    }

    void end_line() {
        append("\n");
        line_empty_ = true;
    }

    const std::string& text() const { return text_; }

  private:
    void append(const std::string& s) {
        text_ += s;
        offset_ += utf8::count_codepoints(s);
        if (s != "\n") line_empty_ = false;
    }

    std::string text_;
    std::size_t offset_ = 0;
    bool line_empty_ = true;
};

SynthDocument generate_document(const SynthConfig& config, int index) {
    Rng rng(config.seed, static_cast<std::uint64_t>(index));

    // Per-class mention counts for this document.
    std::array<int, kNumClasses> quota{};
    int lines_needed = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        const double rate = config.rates[c];
        quota[c] = static_cast<int>(std::floor(rate));
        if (rng.bernoulli(rate - std::floor(rate))) ++quota[c];
        lines_needed = std::max(lines_needed, quota[c]);
    }

    SynthDocument result;
    result.doc.id = synth_doc_id(index);
    DocBuilder builder;
    builder.word(rng.choice(kHeaders));
    builder.end_line();

    std::vector<Annotation>& annotations = result.doc.annotations;
    for (int line = 0; line < lines_needed; ++line) {
        // Bresenham spread: class c fires on exactly quota[c] of the lines.
        const auto fires = [&](EntityClass cls) {
            const int q = quota[static_cast<int>(cls)];
            return (line + 1) * q / lines_needed > line * q / lines_needed;
        };
        builder.word(rng.choice(kVerbs));
        const bool has_drug = fires(EntityClass::Drug);
        if (has_drug) {
            builder.mention(EntityClass::Drug, rng.choice(kDrugs), annotations);
        } else {
            builder.word("medication");
        }
        if (fires(EntityClass::Strength)) {
            builder.mention(EntityClass::Strength, rng.choice(kStrengths), annotations);
        }
        if (fires(EntityClass::Form)) {
            builder.mention(EntityClass::Form, rng.choice(kForms), annotations);
        }
        if (fires(EntityClass::Dosage)) {
            builder.mention(EntityClass::Dosage, rng.choice(kDosages), annotations);
        }
        if (fires(EntityClass::Route)) {
            builder.mention(EntityClass::Route, rng.choice(kRoutes), annotations);
        }
        if (fires(EntityClass::Frequency)) {
            builder.mention(EntityClass::Frequency, rng.choice(kFrequencies), annotations);
        }
        if (fires(EntityClass::Duration)) {
            builder.mention(EntityClass::Duration, rng.choice(kDurations), annotations);
        }
        const bool reason_fires = fires(EntityClass::Reason);
        const bool ade_fires = fires(EntityClass::ADE);
        if (config.ambiguous_conditions) {
            // Identical "for <cond>" context for both classes; order is
            // random when both land on one line.
            std::vector<EntityClass> conditions;
            if (reason_fires) conditions.push_back(EntityClass::Reason);
            if (ade_fires) conditions.push_back(EntityClass::ADE);
            rng.shuffle(conditions);
            for (std::size_t i = 0; i < conditions.size(); ++i) {
                builder.word(i == 0 ? "for" : "and");
                builder.mention(conditions[i], rng.choice(kSharedConditions), annotations);
            }
        } else {
            if (reason_fires) {
                builder.word("for");
                builder.mention(EntityClass::Reason, rng.choice(kReasons), annotations);
            }
            if (ade_fires) {
                builder.word("developed");
                builder.mention(EntityClass::ADE, rng.choice(kAdes), annotations);
            }
        }
        builder.end_line();
    }
    result.doc.text = builder.text();

    // Sidecar rows: one per Drug/Reason/ADE mention span.
    std::vector<FeatureRow> rows;
    for (const auto& a : annotations) {
        FeatureRow row;
        row.begin = a.start();
        row.end = a.end();
        if (a.cls == EntityClass::Drug) {
            row.clamp = {ClampCategory::Treatment, Assertion::Present};
            row.ctakes = CtakesTag::Medication;
        } else if (a.cls == EntityClass::Reason || a.cls == EntityClass::ADE) {
            if (rng.bernoulli(config.tag_correlation)) {
                const bool reason = a.cls == EntityClass::Reason;
                row.clamp = {ClampCategory::Problem,
                             reason ? Assertion::Present : Assertion::Absent};
                row.ctakes = reason ? CtakesTag::SignSymptom : CtakesTag::DiseaseDisorder;
            } else {
                row.clamp = random_clamp(rng);
                row.ctakes = random_ctakes(rng);
            }
        } else {
            continue;
        }
        rows.push_back(row);
    }
    std::sort(rows.begin(), rows.end(),
              [](const FeatureRow& a, const FeatureRow& b) { return a.begin < b.begin; });
    result.feat = write_token_features(rows);
    return result;
}

}  // namespace

std::string synth_doc_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "doc%04d", index + 1);
    return buf;
}

std::vector<SynthDocument> generate_synthetic(const SynthConfig& config) {
    for (double rate : config.rates) {
        if (rate < 0.0 || !std::isfinite(rate)) {
            throw ConfigError("mention rates must be finite and >= 0");
        }
    }
    if (config.tag_correlation < 0.0 || config.tag_correlation > 1.0) {
        throw ConfigError("tag correlation must lie in [0, 1]");
    }
    if (config.documents < 0) throw ConfigError("document count must be >= 0");

    std::vector<SynthDocument> docs;
    docs.reserve(config.documents);
    for (int i = 0; i < config.documents; ++i) {
        docs.push_back(generate_document(config, i));
    }
    return docs;
}

}  // namespace medseq
