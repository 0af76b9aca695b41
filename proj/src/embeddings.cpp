#include "medseq/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "medseq/errors.hpp"
#include "medseq/rng.hpp"
#include "medseq/utf8.hpp"

namespace medseq {

std::string lowercase(const std::string& word) {
    std::string out = word;
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

Vocabulary::Vocabulary() {
    add("<unk>", 0);
    add("<pad>", 0);
}

int Vocabulary::add(const std::string& word, std::uint64_t count) {
    if (const auto it = index_.find(word); it != index_.end()) {
        counts_[it->second] += count;
        return it->second;
    }
    const int id = static_cast<int>(words_.size());
    words_.push_back(word);
    counts_.push_back(count);
    index_.emplace(word, id);
    return id;
}

int Vocabulary::lookup(const std::string& word) const {
    const auto it = index_.find(lowercase(word));
    return it == index_.end() ? kUnk : it->second;
}

std::uint64_t Vocabulary::total_count() const {
    std::uint64_t total = 0;
    for (std::size_t i = 2; i < counts_.size(); ++i) total += counts_[i];
    return total;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& streams, int min_count) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& stream : streams) {
        for (const auto& word : stream) ++counts[lowercase(word)];
    }
    std::vector<std::pair<std::string, std::uint64_t>> kept;
    for (const auto& [word, count] : counts) {
        if (count >= static_cast<std::uint64_t>(min_count)) kept.emplace_back(word, count);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    Vocabulary vocab;
    for (const auto& [word, count] : kept) vocab.add(word, count);
    return vocab;
}

EmbeddingMatrix init_uniform(int rows, int dim, std::uint64_t seed) {
    if (rows < 1 || dim < 1) throw ConfigError("init_uniform: rows and dim must be >= 1");
    Rng rng(seed);
    const double bound = std::sqrt(3.0 / dim);
    EmbeddingMatrix matrix;
    matrix.source = EmbeddingSource::Random;
    matrix.values.resize(rows, dim);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < dim; ++c) {
            matrix.values(r, c) = rng.uniform(-bound, bound);
        }
    }
    return matrix;
}

// ---------------------------------------------------------------------------
// Skip-gram with negative sampling

UnigramSampler::UnigramSampler(const Vocabulary& vocab) {
    cdf_.reserve(vocab.size());
    double running = 0.0;
    for (int i = 0; i < vocab.size(); ++i) {
        if (i >= 2 && vocab.count(i) > 0) {
            running += std::pow(static_cast<double>(vocab.count(i)), 0.75);
        }
        cdf_.push_back(running);
    }
    total_ = running;
}

int UnigramSampler::draw(Rng& rng) const {
    const double u = rng.uniform() * total_;
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(
        it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
}

std::vector<double> UnigramSampler::probabilities() const {
    std::vector<double> probs(cdf_.size(), 0.0);
    double previous = 0.0;
    for (std::size_t i = 0; i < cdf_.size(); ++i) {
        probs[i] = total_ > 0.0 ? (cdf_[i] - previous) / total_ : 0.0;
        previous = cdf_[i];
    }
    return probs;
}

namespace {

double sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

struct SkipGramState {
    Eigen::MatrixXd syn0;  // input vectors, the result
    Eigen::MatrixXd syn1;  // output vectors
};

void train_range(const std::vector<std::vector<int>>& sentences, std::size_t begin,
                 std::size_t end, const Vocabulary& vocab, const SkipGramConfig& config,
                 const UnigramSampler& sampler, SkipGramState& state, std::uint64_t rng_stream,
                 std::uint64_t words_per_pass, std::uint64_t thread_words_per_pass) {
    Rng rng(config.seed, rng_stream);
    const double train_total = static_cast<double>(config.epochs) *
                                   static_cast<double>(words_per_pass) +
                               1.0;
    // Thread-local progress scaled to the global schedule.
    const double progress_scale =
        thread_words_per_pass > 0
            ? static_cast<double>(words_per_pass) / static_cast<double>(thread_words_per_pass)
            : 1.0;
    std::uint64_t processed = 0;
    const std::uint64_t total = vocab.total_count();
    Eigen::VectorXd accum(config.dim);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t s = begin; s < end; ++s) {
            // Subsample frequent words (word2vec keep probability).
            std::vector<int> kept;
            kept.reserve(sentences[s].size());
            for (int id : sentences[s]) {
                ++processed;
                if (config.subsample > 0 && total > 0) {
                    const double cn = static_cast<double>(vocab.count(id));
                    const double threshold = config.subsample * static_cast<double>(total);
                    const double keep =
                        (std::sqrt(cn / threshold) + 1.0) * threshold / cn;
                    if (keep < 1.0 && rng.uniform() >= keep) continue;
                }
                kept.push_back(id);
            }

            for (std::size_t t = 0; t < kept.size(); ++t) {
                const double done = progress_scale * static_cast<double>(processed);
                const double lr = config.learning_rate *
                                  std::max(1e-4, 1.0 - done / train_total);
                const int span = 1 + static_cast<int>(rng.below(
                                         static_cast<std::uint64_t>(config.window)));
                const int center = kept[t];
                for (int offset = -span; offset <= span; ++offset) {
                    if (offset == 0) continue;
                    const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t) + offset;
                    if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(kept.size())) continue;
                    const int context = kept[static_cast<std::size_t>(pos)];

                    // Input = context word, predicted = center (word2vec layout).
                    auto v = state.syn0.row(context);
                    accum.setZero();
                    for (int k = 0; k <= config.negatives; ++k) {
                        int target;
                        double label;
                        if (k == 0) {
                            target = center;
                            label = 1.0;
                        } else {
                            if (sampler.empty()) break;
                            target = sampler.draw(rng);
                            if (target == center) target = sampler.draw(rng);
                            if (target == center) continue;
                            label = 0.0;
                        }
                        auto u = state.syn1.row(target);
                        const double score = sigmoid(u.dot(v));
                        const double g = (label - score) * lr;
                        accum += g * u.transpose();
                        state.syn1.row(target) += g * v;
                    }
                    state.syn0.row(context) += accum.transpose();
                }
            }
        }
    }
}

}  // namespace

SkipGramModel train_skipgram_model(const std::vector<std::vector<std::string>>& sentences,
                                   const Vocabulary& vocab, const SkipGramConfig& config) {
    if (config.dim < 1 || config.window < 1 || config.negatives < 1) {
        throw ConfigError("skip-gram: dim, window and negatives must be >= 1");
    }
    std::vector<std::vector<int>> ids;
    std::uint64_t corpus_words = 0;
    for (const auto& sentence : sentences) {
        std::vector<int> sent;
        for (const auto& word : sentence) {
            const int id = vocab.lookup(word);
            if (id == Vocabulary::kUnk || id == Vocabulary::kPad) continue;
            sent.push_back(id);
        }
        corpus_words += sent.size();
        if (!sent.empty()) ids.push_back(std::move(sent));
    }
    if (corpus_words == 0) throw DataError("skip-gram: corpus is empty after min-count filtering");

    SkipGramState state;
    Rng init_rng(config.seed);
    state.syn0.resize(vocab.size(), config.dim);
    for (Eigen::Index r = 0; r < state.syn0.rows(); ++r) {
        for (int c = 0; c < config.dim; ++c) {
            state.syn0(r, c) = (init_rng.uniform() - 0.5) / config.dim;
        }
    }
    state.syn1 = Eigen::MatrixXd::Zero(vocab.size(), config.dim);

    const UnigramSampler sampler(vocab);
    const int threads = std::max(1, config.threads);
    if (threads == 1 || ids.size() < 2) {
        train_range(ids, 0, ids.size(), vocab, config, sampler, state, 0, corpus_words,
                    corpus_words);
    } else {
        // Hogwild-style lock-free updates; explicitly non-deterministic.
        std::vector<std::thread> pool;
        const std::size_t chunk = (ids.size() + threads - 1) / threads;
        for (int w = 0; w < threads; ++w) {
            const std::size_t begin = std::min(ids.size(), w * chunk);
            const std::size_t end = std::min(ids.size(), begin + chunk);
            if (begin >= end) break;
            std::uint64_t local_words = 0;
            for (std::size_t s = begin; s < end; ++s) local_words += ids[s].size();
            pool.emplace_back(train_range, std::cref(ids), begin, end, std::cref(vocab),
                              std::cref(config), std::cref(sampler), std::ref(state),
                              static_cast<std::uint64_t>(w), corpus_words, local_words);
        }
        for (auto& t : pool) t.join();
    }

    SkipGramModel out;
    out.input.values = std::move(state.syn0);
    out.input.source = EmbeddingSource::Pretrained;
    out.output = std::move(state.syn1);
    return out;
}

EmbeddingMatrix train_skipgram(const std::vector<std::vector<std::string>>& sentences,
                               const Vocabulary& vocab, const SkipGramConfig& config) {
    return train_skipgram_model(sentences, vocab, config).input;
}

// ---------------------------------------------------------------------------
// Persistence

std::string format_embeddings(const EmbeddingMatrix& matrix, const Vocabulary& vocab) {
    if (matrix.rows() != vocab.size()) {
        throw DataError("embedding rows do not match vocabulary size");
    }
    std::string out = std::to_string(vocab.size()) + " " + std::to_string(matrix.dim()) + "\n";
    char buf[64];
    for (int r = 0; r < vocab.size(); ++r) {
        out += vocab.word(r);
        for (Eigen::Index c = 0; c < matrix.dim(); ++c) {
            std::snprintf(buf, sizeof buf, " %.6g", matrix.values(r, c));
            out += buf;
        }
        out += '\n';
    }
    return out;
}

void save_embeddings(const EmbeddingMatrix& matrix, const Vocabulary& vocab,
                     const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write embeddings: " + path);
    out << format_embeddings(matrix, vocab);
}

std::pair<Vocabulary, EmbeddingMatrix> parse_embeddings(const std::string& content) {
    std::istringstream in(content);
    std::string header;
    if (!std::getline(in, header)) throw ParseError("empty embedding file", 1);
    std::istringstream hs(header);
    long long rows = 0, dim = 0;
    if (!(hs >> rows >> dim) || rows < 1 || dim < 1) {
        throw ParseError("bad embedding header '" + header + "'", 1);
    }

    std::vector<std::string> words;
    std::vector<std::vector<double>> values;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        std::vector<double> row;
        row.reserve(dim);
        double v;
        while (ls >> v) row.push_back(v);
        if (static_cast<long long>(row.size()) != dim) {
            throw ParseError("expected " + std::to_string(dim) + " values, got " +
                                 std::to_string(row.size()),
                             line_no);
        }
        words.push_back(word);
        values.push_back(std::move(row));
    }
    if (static_cast<long long>(words.size()) != rows) {
        throw ParseError("header declares " + std::to_string(rows) + " rows, file has " +
                         std::to_string(words.size()));
    }

    // External word2vec files may lack the specials; give them zero rows.
    Vocabulary vocab;
    EmbeddingMatrix matrix;
    matrix.source = EmbeddingSource::Pretrained;
    const bool has_specials = words.size() >= 2 && words[0] == "<unk>" && words[1] == "<pad>";
    const int extra = has_specials ? 0 : 2;
    matrix.values = Eigen::MatrixXd::Zero(rows + extra, dim);
    for (std::size_t i = 0; i < words.size(); ++i) {
        const int id = has_specials && i < 2 ? static_cast<int>(i)
                                             : vocab.add(lowercase(words[i]), 0);
        for (long long c = 0; c < dim; ++c) matrix.values(id, c) = values[i][c];
    }
    return {std::move(vocab), std::move(matrix)};
}

std::pair<Vocabulary, EmbeddingMatrix> load_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embeddings: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_embeddings(buf.str());
}

Eigen::VectorXd lookup(const Vocabulary& vocab, const EmbeddingMatrix& matrix,
                       const std::string& word) {
    if (matrix.rows() != vocab.size()) {
        throw DataError("embedding rows do not match vocabulary size");
    }
    return matrix.values.row(vocab.lookup(word)).transpose();
}

}  // namespace medseq
