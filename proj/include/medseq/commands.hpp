#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "medseq/embeddings.hpp"
#include "medseq/synthetic.hpp"
#include "medseq/training.hpp"

namespace medseq::commands {

/// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kDataError = 2;
inline constexpr int kDivergence = 3;

// Directory helpers. Documents pair `<id>.txt` with `<id>.ann` (and
// optionally `<id>.feat`); ids are sorted for determinism.

std::vector<std::string> list_document_ids(const std::string& dir);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// Loads `<id>.txt` + `<id>.ann` pairs; `require_ann` controls whether a
/// missing annotation file is an error or an empty annotation set.
std::vector<Document> load_documents(const std::string& dir, bool require_ann);

/// Loads `<id>.feat` sidecars for the given ids; `require` lists missing
/// documents in the error message.
FeatureSidecars load_sidecars(const std::string& dir, const std::vector<std::string>& ids,
                              bool require);

struct GenOptions {
    std::string out_dir;
    SynthConfig synth;
};
void run_gen(const GenOptions& options);

struct PretrainOptions {
    std::string corpus_dir;
    std::string out_path;
    SkipGramConfig skipgram;
};
void run_pretrain(const PretrainOptions& options);

struct TrainOptions {
    std::string train_dir;
    std::string feat_dir;  // defaults to train_dir
    std::optional<std::string> embeddings_path;
    bool random_init = false;
    bool augment = false;
    bool merged_tags = false;
    bool iob_mask = false;
    ModelConfig model;
    TrainConfig trainer;
    std::string checkpoint_out;
    std::string history_out;  // optional
};
void run_train(const TrainOptions& options);

struct PredictOptions {
    std::string checkpoint;
    std::string in_dir;
    std::string feat_dir;  // defaults to in_dir; optional sidecars
    std::string out_dir;
};
void run_predict(const PredictOptions& options);

struct EvaluateOptions {
    std::string gold_dir;
    std::string pred_dir;
    std::string report_out;  // optional
    bool bipartite = false;
};
/// Returns the headline number, the lenient micro F1 (percent).
double run_evaluate(const EvaluateOptions& options);

struct GradcheckOptions {
    std::uint64_t seed = 1;
    int instances = 20;
    double epsilon = 1e-5;
};
/// Runs the CRF and full-network finite-difference oracle suites; returns the
/// overall max relative error.
double run_gradcheck(const GradcheckOptions& options);

}  // namespace medseq::commands
