#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "medseq/crf.hpp"
#include "medseq/embeddings.hpp"
#include "medseq/features.hpp"

namespace medseq {

/// How the semantic-tag streams are attached to the word vectors.
enum class TagStreams { Separate, Merged };

struct ModelConfig {
    int word_dim = 100;
    int clamp_dim = 50;
    int ctakes_dim = 50;
    int merged_dim = 50;
    bool augment = false;
    TagStreams tag_streams = TagStreams::Separate;
    double hidden_fraction = 0.7;
    std::optional<int> hidden_override;  // set to pin H independently of D
    int num_labels = kNumLabels;
    std::uint64_t seed = 42;

    /// Input token representation size.
    int input_dim() const;
    /// Hidden units per direction: round(hidden_fraction * input_dim), >= 1.
    int hidden_dim() const;
};

/// One LSTM direction. Gate order in the stacked tensors is fixed:
/// input, forget, cell, output.
struct LstmParams {
    Eigen::MatrixXd w;  // 4H x D
    Eigen::MatrixXd u;  // 4H x H
    Eigen::VectorXd b;  // 4H

    int hidden() const { return static_cast<int>(u.cols()); }
    int input() const { return static_cast<int>(w.cols()); }
};

struct ProjectionParams {
    Eigen::MatrixXd w;  // K x 2H
    Eigen::VectorXd b;  // K
};

/// The full learnable state. The CRF parameters live here too so one
/// container owns everything the optimizer touches.
struct ModelParams {
    EmbeddingMatrix word_emb;
    std::optional<EmbeddingMatrix> clamp_emb;
    std::optional<EmbeddingMatrix> ctakes_emb;
    std::optional<EmbeddingMatrix> merged_emb;
    LstmParams forward;
    LstmParams backward;
    ProjectionParams projection;
    crf::CrfParams crf;
};

/// Fresh parameters: Glorot-uniform LSTM/projection weights, forget bias 1,
/// zero CRF, tag tables uniform per init_uniform. word_emb is taken as given.
ModelParams init_model(const ModelConfig& config, EmbeddingMatrix word_emb);

/// Same tensor shapes, all zeros; used for gradients and optimizer state.
ModelParams zeros_like(const ModelParams& params);

/// Named view over every tensor of a ModelParams, in a fixed order.
struct TensorView {
    const char* name;
    double* data;
    Eigen::Index size;
};
std::vector<TensorView> tensor_views(ModelParams& params);

/// Token ids for one segment, ready for the embedding layer.
struct EncodedSegment {
    std::vector<int> word_ids;
    std::vector<int> clamp_ids;   // empty when augmentation is off
    std::vector<int> ctakes_ids;  // empty when augmentation is off
    std::vector<int> merged_ids;  // merged-stream mode only

    std::size_t length() const { return word_ids.size(); }
};

EncodedSegment encode_segment(const std::vector<Token>& tokens,
                              const std::vector<TokenFeatures>& features,
                              const Vocabulary& vocab, const ModelConfig& config);

/// [word ‖ clamp-tag ‖ ctakes-tag] rows, one per token.
Eigen::MatrixXd token_representations(const EncodedSegment& segment, const ModelParams& params,
                                      const ModelConfig& config);

/// One LSTM step. Exposed for direct inspection and tests.
void lstm_cell(const LstmParams& params, const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
               const Eigen::VectorXd& c_prev, Eigen::VectorXd& h_out, Eigen::VectorXd& c_out);

/// Cached forward state for exact backpropagation through time.
struct LstmTrace {
    Eigen::MatrixXd gates_i, gates_f, gates_g, gates_o;  // L x H each
    Eigen::MatrixXd cells;                               // L x H
    Eigen::MatrixXd hidden;                              // L x H
};

struct ForwardTrace {
    Eigen::MatrixXd inputs;  // L x D
    LstmTrace fwd;           // in sequence order
    LstmTrace bwd;           // in reversed order
    Eigen::MatrixXd hidden;  // L x 2H
};

/// Runs both chains; row t of hidden is [forward h_t ‖ backward h_t].
ForwardTrace bilstm_forward(const Eigen::MatrixXd& inputs, const ModelParams& params);

/// scores[t] = W h_t + b, one length-K row per token.
Eigen::MatrixXd emissions(const Eigen::MatrixXd& hidden, const ProjectionParams& projection);

/// Debug fault injection for the gradient-check detector.
enum class GradFault { None, NegateInputGate, NegateForgetGate, NegateCellGate, NegateOutputGate };

/// Exact gradients of a scalar loss with upstream d(loss)/d(scores). Embedding
/// row gradients are scattered into the grads container; accumulation is
/// additive so several segments can share one container.
void backward(const ForwardTrace& trace, const Eigen::MatrixXd& d_scores,
              const EncodedSegment& segment, const ModelParams& params,
              const ModelConfig& config, ModelParams& grads, GradFault fault = GradFault::None);

struct GradCheckReport {
    bool applicable = false;
    double max_relative_error = 0.0;
    std::vector<std::pair<std::string, double>> per_tensor;
};

/// Central-difference check of the full model (embeddings through CRF) on one
/// segment: |ga - gn| / max(1e-12, |ga| + |gn|), sampled per tensor.
GradCheckReport gradient_check(const ModelParams& params, const ModelConfig& config,
                               const EncodedSegment& segment, const std::vector<int>& gold,
                               double epsilon, int samples_per_tensor = 24,
                               std::uint64_t seed = 1234, GradFault fault = GradFault::None);

}  // namespace medseq
