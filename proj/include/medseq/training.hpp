#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medseq/checkpoint.hpp"
#include "medseq/corpus.hpp"
#include "medseq/features.hpp"
#include "medseq/network.hpp"

namespace medseq {

struct TrainConfig {
    double learning_rate = 0.001;
    double rho = 0.9;
    double epsilon = 1e-8;
    int batch_size = 8;
    int patience = 3;
    double validation_fraction = 0.10;
    int max_epochs = 100;
    std::uint64_t shuffle_seed = 1;
    std::optional<double> clip_norm;  // global L2 clip, off by default
    int threads = 1;
};

/// Per-tensor running mean square, same shapes as the parameters.
struct RmsPropState {
    ModelParams cache;
};

/// cache <- rho*cache + (1-rho)*g^2; p <- p - lr*g/(sqrt(cache)+eps).
/// When clip_norm is set the gradient is first scaled so its global L2 norm
/// does not exceed it.
void rmsprop_step(ModelParams& params, ModelParams& grads, RmsPropState& state,
                  const TrainConfig& config);

/// Document-level split; validation gets max(1, round(fraction*N)) documents.
std::pair<std::vector<Document>, std::vector<Document>> split_train_val(
    std::vector<Document> documents, double fraction, std::uint64_t seed);

/// Stop when the metric has not improved for `patience` consecutive epochs.
/// Ties do not count as improvement, so the best epoch is the earliest.
class EarlyStopping {
  public:
    explicit EarlyStopping(int patience) : patience_(patience) {}

    /// Returns true when training should halt after this epoch.
    bool update(int epoch, double metric);

    int best_epoch() const { return best_epoch_; }
    double best_metric() const { return best_metric_; }

  private:
    int patience_;
    int best_epoch_ = 0;
    double best_metric_ = -1.0;
    int stale_epochs_ = 0;
};

struct EpochStats {
    int epoch = 0;           // 1-based
    double train_nll = 0.0;  // mean per segment
    double val_f1_lenient_micro = 0.0;  // percent
    bool is_best = false;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;
};

struct TrainResult {
    Model best;     // highest validation lenient micro F1
    Model final;    // last epoch, for overfit-style probes
    TrainHistory history;
    std::vector<std::string> train_doc_ids;
    std::vector<std::string> val_doc_ids;
};

using FeatureSidecars = std::map<std::string, std::vector<FeatureRow>>;

/// Full training protocol: document split, per-epoch shuffled batches with
/// batch-mean nll, RMSProp updates, lenient-micro-F1 model selection with
/// early stopping. When `pretrained` is given it supplies the vocabulary and
/// initial word vectors; otherwise a vocabulary is built from the train split
/// and the word table is uniform-random.
TrainResult train(const std::vector<Document>& documents, const FeatureSidecars& sidecars,
                  ModelConfig model_config, const TrainConfig& train_config,
                  std::optional<std::pair<Vocabulary, EmbeddingMatrix>> pretrained = std::nullopt);

/// tokenize -> segment -> featurize -> BiLSTM -> emissions -> Viterbi ->
/// span merge; returned annotations carry document offsets and ids T1..Tn.
std::vector<Annotation> predict_document(const Model& model, const std::string& text,
                                         const std::vector<FeatureRow>& features);

std::string history_json(const TrainHistory& history);

}  // namespace medseq
