#pragma once

#include <string>

#include "medseq/embeddings.hpp"
#include "medseq/network.hpp"

namespace medseq {

/// Everything needed to run inference: configuration, word vocabulary, and
/// all learned tensors.
struct Model {
    ModelConfig config;
    Vocabulary vocab;
    ModelParams params;
};

/// Single-file checkpoint: a plain-text key/value manifest (dims, counts,
/// seeds, vocabulary, tensor shapes) followed by the tensors as row-major
/// little-endian 64-bit floats in manifest order.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace medseq
