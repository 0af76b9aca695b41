#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace medseq {

/// Word vocabulary with dense indices. <unk> is always index 0, <pad> index 1;
/// lookups are over lowercased surfaces and fall back to <unk>.
class Vocabulary {
  public:
    static constexpr int kUnk = 0;
    static constexpr int kPad = 1;

    Vocabulary();

    int add(const std::string& word, std::uint64_t count);
    int lookup(const std::string& word) const;

    int size() const { return static_cast<int>(words_.size()); }
    const std::string& word(int index) const { return words_[index]; }
    std::uint64_t count(int index) const { return counts_[index]; }
    const std::vector<std::string>& words() const { return words_; }

    /// Total occurrences of real words (unk/pad excluded).
    std::uint64_t total_count() const;

  private:
    std::vector<std::string> words_;
    std::vector<std::uint64_t> counts_;
    std::unordered_map<std::string, int> index_;
};

/// Words with frequency >= min_count, ordered by count (desc) then surface.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& streams, int min_count);

enum class EmbeddingSource { Pretrained, Random };

struct EmbeddingMatrix {
    Eigen::MatrixXd values;  // rows x dim
    EmbeddingSource source = EmbeddingSource::Random;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index dim() const { return values.cols(); }
};

struct SkipGramConfig {
    int dim = 100;
    int window = 5;
    int negatives = 5;
    int epochs = 5;
    double learning_rate = 0.025;
    int min_count = 5;
    double subsample = 1e-3;
    std::uint64_t seed = 1;
    int threads = 1;  // > 1 is the documented non-deterministic mode
};

/// word2vec skip-gram with negative sampling over the given vocabulary.
/// Deterministic per seed when threads == 1.
EmbeddingMatrix train_skipgram(const std::vector<std::vector<std::string>>& sentences,
                               const Vocabulary& vocab, const SkipGramConfig& config);

/// Full skip-gram state: input vectors (the embeddings) plus the output
/// vectors the negative-sampling objective scores against.
struct SkipGramModel {
    EmbeddingMatrix input;
    Eigen::MatrixXd output;
};
SkipGramModel train_skipgram_model(const std::vector<std::vector<std::string>>& sentences,
                                   const Vocabulary& vocab, const SkipGramConfig& config);

class Rng;

/// Unigram^0.75 negative-sample distribution over real words (unk/pad never
/// drawn); CDF with binary search.
class UnigramSampler {
  public:
    explicit UnigramSampler(const Vocabulary& vocab);
    bool empty() const { return total_ <= 0.0; }
    int draw(Rng& rng) const;
    /// Normalized probability of each vocabulary index.
    std::vector<double> probabilities() const;

  private:
    std::vector<double> cdf_;
    double total_ = 0.0;
};

/// i.i.d. uniform on [-b, b] with b = sqrt(3/dim).
EmbeddingMatrix init_uniform(int rows, int dim, std::uint64_t seed);

/// Text format: header "V d", then one `word v1 .. vd` line per row,
/// values at 6 significant digits.
void save_embeddings(const EmbeddingMatrix& matrix, const Vocabulary& vocab,
                     const std::string& path);
std::pair<Vocabulary, EmbeddingMatrix> load_embeddings(const std::string& path);

std::string format_embeddings(const EmbeddingMatrix& matrix, const Vocabulary& vocab);
std::pair<Vocabulary, EmbeddingMatrix> parse_embeddings(const std::string& content);

/// Row for the lowercased word, unk row when absent.
Eigen::VectorXd lookup(const Vocabulary& vocab, const EmbeddingMatrix& matrix,
                       const std::string& word);

std::string lowercase(const std::string& word);

}  // namespace medseq
