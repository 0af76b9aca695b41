#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "medseq/corpus.hpp"
#include "medseq/features.hpp"

namespace medseq {

/// Synthetic corpus generator: templated medication lines with standoff
/// annotations and a semantic-tag sidecar per document. Deterministic per
/// seed down to the byte.
struct SynthConfig {
    std::uint64_t seed = 7;
    int documents = 20;
    /// Mentions per document, per class; realized as
    /// floor(rate) + Bernoulli(frac(rate)).
    std::array<double, kNumClasses> rates = kDefaultRates;
    /// Probability that a Reason/ADE mention gets its informative semantic
    /// tag in the sidecar; otherwise the row carries random tags.
    double tag_correlation = 1.0;
    /// When set, Reason and ADE draw from one shared surface pool and appear
    /// in identical contexts, so only the sidecar tag separates them.
    bool ambiguous_conditions = false;

    static const std::array<double, kNumClasses> kDefaultRates;
};

struct SynthDocument {
    Document doc;
    std::string feat;  // sidecar content, write_token_features format
};

std::vector<SynthDocument> generate_synthetic(const SynthConfig& config);

/// Document id for index i: doc0001, doc0002, ...
std::string synth_doc_id(int index);

}  // namespace medseq
