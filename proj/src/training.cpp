#include "medseq/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "medseq/errors.hpp"
#include "medseq/evaluation.hpp"
#include "medseq/rng.hpp"
#include "medseq/utf8.hpp"

namespace medseq {

namespace {

/// One training example: encoded ids plus gold label indices.
struct TrainSegment {
    EncodedSegment encoded;
    std::vector<int> gold;
};

std::vector<TrainSegment> prepare_segments(const std::vector<Document>& docs,
                                           const FeatureSidecars& sidecars,
                                           const Vocabulary& vocab, const ModelConfig& config) {
    std::vector<TrainSegment> out;
    for (const auto& doc : docs) {
        std::vector<FeatureRow> rows;
        if (const auto it = sidecars.find(doc.id); it != sidecars.end()) rows = it->second;
        for (auto& seg : segment(doc)) {
            const std::vector<IOBLabel> labels = spans_to_iob(seg.tokens, doc.annotations);
            const std::vector<TokenFeatures> features = align_features(seg.tokens, rows);
            TrainSegment ts;
            ts.encoded = encode_segment(seg.tokens, features, vocab, config);
            ts.gold.reserve(labels.size());
            for (const auto& l : labels) ts.gold.push_back(label_index(l));
            if (!ts.gold.empty()) out.push_back(std::move(ts));
        }
    }
    return out;
}

/// nll + full gradient accumulation for one segment, scaled by `weight`.
double accumulate_gradients(const TrainSegment& seg, const ModelParams& params,
                            const ModelConfig& config, double weight, ModelParams& grads) {
    const Eigen::MatrixXd inputs = token_representations(seg.encoded, params, config);
    const ForwardTrace trace = bilstm_forward(inputs, params);
    const Eigen::MatrixXd scores = emissions(trace.hidden, params.projection);
    crf::NllGradients g = crf::nll_gradients(scores, params.crf, seg.gold);
    grads.crf.transitions += weight * g.d_transitions;
    grads.crf.start += weight * g.d_start;
    grads.crf.end += weight * g.d_end;
    g.d_emissions *= weight;
    backward(trace, g.d_emissions, seg.encoded, params, config, grads);
    return g.nll;
}

double global_grad_norm(ModelParams& grads) {
    double sum = 0.0;
    for (const auto& view : tensor_views(grads)) {
        const Eigen::Map<const Eigen::ArrayXd> a(view.data, view.size);
        sum += (a * a).sum();
    }
    return std::sqrt(sum);
}

double validation_f1(const Model& model, const std::vector<Document>& docs,
                     const FeatureSidecars& sidecars) {
    std::vector<ClassCounts> counts;
    for (const auto& doc : docs) {
        std::vector<FeatureRow> rows;
        if (const auto it = sidecars.find(doc.id); it != sidecars.end()) rows = it->second;
        const std::vector<Annotation> pred = predict_document(model, doc.text, rows);
        for (EntityClass cls : kAllClasses) {
            std::vector<Annotation> g, p;
            for (const auto& a : doc.annotations) {
                if (a.cls == cls) g.push_back(a);
            }
            for (const auto& a : pred) {
                if (a.cls == cls) p.push_back(a);
            }
            if (g.empty() && p.empty()) continue;
            ClassCounts c = match_spans(std::move(g), std::move(p), MatchMode::Lenient);
            c.cls = cls;
            counts.push_back(c);
        }
    }
    return score(counts, MatchMode::Lenient).micro.f1;
}

}  // namespace

void rmsprop_step(ModelParams& params, ModelParams& grads, RmsPropState& state,
                  const TrainConfig& config) {
    auto p_views = tensor_views(params);
    auto g_views = tensor_views(grads);
    auto c_views = tensor_views(state.cache);
    if (p_views.size() != g_views.size() || p_views.size() != c_views.size()) {
        throw DataError("rmsprop: parameter/gradient/state tensor sets differ");
    }

    if (config.clip_norm) {
        const double norm = global_grad_norm(grads);
        if (norm > *config.clip_norm && norm > 0.0) {
            const double scale = *config.clip_norm / norm;
            for (auto& view : g_views) {
                Eigen::Map<Eigen::ArrayXd>(view.data, view.size) *= scale;
            }
        }
    }

    for (std::size_t i = 0; i < p_views.size(); ++i) {
        if (p_views[i].size != g_views[i].size || p_views[i].size != c_views[i].size) {
            throw DataError(std::string("rmsprop: shape mismatch on ") + p_views[i].name);
        }
        Eigen::Map<Eigen::ArrayXd> p(p_views[i].data, p_views[i].size);
        Eigen::Map<Eigen::ArrayXd> g(g_views[i].data, g_views[i].size);
        Eigen::Map<Eigen::ArrayXd> cache(c_views[i].data, c_views[i].size);
        cache = config.rho * cache + (1.0 - config.rho) * g.square();
        p -= config.learning_rate * g / (cache.sqrt() + config.epsilon);
    }
}

std::pair<std::vector<Document>, std::vector<Document>> split_train_val(
    std::vector<Document> documents, double fraction, std::uint64_t seed) {
    if (documents.size() < 2) throw DataError("need at least 2 documents to split");
    if (fraction <= 0.0 || fraction >= 1.0) {
        throw ConfigError("validation fraction must lie in (0, 1)");
    }
    std::vector<std::size_t> order(documents.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    const std::size_t val_size = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(fraction * documents.size())));
    std::vector<Document> train, val;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < val_size) {
            val.push_back(std::move(documents[order[i]]));
        } else {
            train.push_back(std::move(documents[order[i]]));
        }
    }
    return {std::move(train), std::move(val)};
}

bool EarlyStopping::update(int epoch, double metric) {
    if (metric > best_metric_) {
        best_metric_ = metric;
        best_epoch_ = epoch;
        stale_epochs_ = 0;
    } else {
        ++stale_epochs_;
    }
    return stale_epochs_ >= patience_;
}

TrainResult train(const std::vector<Document>& documents, const FeatureSidecars& sidecars,
                  ModelConfig model_config, const TrainConfig& train_config,
                  std::optional<std::pair<Vocabulary, EmbeddingMatrix>> pretrained) {
    if (documents.empty()) throw DataError("training corpus is empty");
    if (train_config.patience < 1) throw ConfigError("patience must be >= 1");
    if (train_config.rho <= 0.0 || train_config.rho >= 1.0) {
        throw ConfigError("rho must lie in (0, 1)");
    }

    auto [train_docs, val_docs] =
        split_train_val(documents, train_config.validation_fraction, train_config.shuffle_seed);

    TrainResult result;
    for (const auto& d : train_docs) result.train_doc_ids.push_back(d.id);
    for (const auto& d : val_docs) result.val_doc_ids.push_back(d.id);

    Model model;
    model.config = model_config;
    if (pretrained) {
        model.vocab = std::move(pretrained->first);
        model_config.word_dim = static_cast<int>(pretrained->second.dim());
        model.config.word_dim = model_config.word_dim;
        model.params = init_model(model.config, std::move(pretrained->second));
    } else {
        std::vector<std::vector<std::string>> streams;
        for (const auto& doc : train_docs) {
            std::vector<std::string> words;
            for (const auto& token : tokenize(doc.text)) words.push_back(token.surface);
            streams.push_back(std::move(words));
        }
        model.vocab = build_vocab(streams, 1);
        model.params = init_model(
            model.config,
            init_uniform(model.vocab.size(), model_config.word_dim, Rng::mix(model_config.seed, 11)));
    }

    std::vector<TrainSegment> segments =
        prepare_segments(train_docs, sidecars, model.vocab, model.config);
    if (segments.empty()) throw DataError("training corpus has no non-empty segments");

    RmsPropState state{zeros_like(model.params)};
    ModelParams grads = zeros_like(model.params);
    EarlyStopping stopper(train_config.patience);
    result.best = model;
    Rng shuffle_rng(train_config.shuffle_seed, 101);

    std::vector<std::size_t> order(segments.size());
    std::iota(order.begin(), order.end(), 0);
    const int threads = std::max(1, train_config.threads);

    for (int epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_nll = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t pos = 0; pos < order.size(); pos += train_config.batch_size) {
            ++batch_index;
            const std::size_t batch_end =
                std::min(order.size(), pos + static_cast<std::size_t>(train_config.batch_size));
            const double weight = 1.0 / static_cast<double>(batch_end - pos);
            double batch_nll = 0.0;

            if (threads == 1 || batch_end - pos < 2) {
                for (std::size_t i = pos; i < batch_end; ++i) {
                    batch_nll +=
                        accumulate_gradients(segments[order[i]], model.params, model.config,
                                             weight, grads);
                }
            } else {
                // Static round-robin partition with ordered reduction:
                // deterministic for a fixed thread count.
                std::vector<ModelParams> partial;
                std::vector<double> partial_nll(threads, 0.0);
                partial.reserve(threads);
                for (int w = 0; w < threads; ++w) partial.push_back(zeros_like(model.params));
                std::vector<std::thread> pool;
                for (int w = 0; w < threads; ++w) {
                    pool.emplace_back([&, w] {
                        for (std::size_t i = pos + w; i < batch_end;
                             i += static_cast<std::size_t>(threads)) {
                            partial_nll[w] += accumulate_gradients(
                                segments[order[i]], model.params, model.config, weight,
                                partial[w]);
                        }
                    });
                }
                for (auto& t : pool) t.join();
                for (int w = 0; w < threads; ++w) {
                    batch_nll += partial_nll[w];
                    auto dst = tensor_views(grads);
                    auto src = tensor_views(partial[w]);
                    for (std::size_t v = 0; v < dst.size(); ++v) {
                        Eigen::Map<Eigen::ArrayXd>(dst[v].data, dst[v].size) +=
                            Eigen::Map<const Eigen::ArrayXd>(src[v].data, src[v].size);
                    }
                }
            }

            if (!std::isfinite(batch_nll)) {
                throw DivergenceError(epoch, static_cast<int>(batch_index));
            }
            epoch_nll += batch_nll;
            rmsprop_step(model.params, grads, state, train_config);

            // Reset for the next batch.
            for (auto& view : tensor_views(grads)) {
                Eigen::Map<Eigen::ArrayXd>(view.data, view.size).setZero();
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_nll = epoch_nll / static_cast<double>(segments.size());
        stats.val_f1_lenient_micro = validation_f1(model, val_docs, sidecars);

        const bool should_stop = stopper.update(epoch, stats.val_f1_lenient_micro);
        stats.is_best = stopper.best_epoch() == epoch;
        if (stats.is_best) result.best = model;
        result.history.epochs.push_back(stats);
        result.history.best_epoch = stopper.best_epoch();
        if (should_stop) break;
    }
    result.final = std::move(model);
    return result;
}

std::vector<Annotation> predict_document(const Model& model, const std::string& text,
                                         const std::vector<FeatureRow>& features) {
    Document doc;
    doc.text = text;
    std::vector<Annotation> out;
    for (const auto& seg : segment(doc)) {
        const std::vector<TokenFeatures> token_features = align_features(seg.tokens, features);
        const EncodedSegment encoded =
            encode_segment(seg.tokens, token_features, model.vocab, model.config);
        if (encoded.length() == 0) continue;
        const Eigen::MatrixXd inputs = token_representations(encoded, model.params, model.config);
        const ForwardTrace trace = bilstm_forward(inputs, model.params);
        const Eigen::MatrixXd scores = emissions(trace.hidden, model.params.projection);
        const crf::DecodedPath path = crf::viterbi(scores, model.params.crf);
        std::vector<IOBLabel> labels;
        labels.reserve(path.labels.size());
        for (int idx : path.labels) labels.push_back(label_from_index(idx));
        for (auto& a : iob_to_spans(seg.tokens, labels)) out.push_back(std::move(a));
    }
    std::sort(out.begin(), out.end(), [](const Annotation& a, const Annotation& b) {
        return a.start() != b.start() ? a.start() < b.start() : a.end() < b.end();
    });
    const utf8::Index index(text);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].id = "T" + std::to_string(i + 1);
        out[i].text = index.slice(out[i].start(), out[i].end());
    }
    return out;
}

std::string history_json(const TrainHistory& history) {
    nlohmann::ordered_json j;
    j["best_epoch"] = history.best_epoch;
    j["epochs"] = nlohmann::ordered_json::array();
    for (const auto& e : history.epochs) {
        j["epochs"].push_back({{"epoch", e.epoch},
                               {"train_nll", e.train_nll},
                               {"val_f1_lenient_micro", e.val_f1_lenient_micro},
                               {"is_best", e.is_best}});
    }
    return j.dump(2);
}

}  // namespace medseq
