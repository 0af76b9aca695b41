#include "medseq/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "medseq/errors.hpp"
#include "medseq/evaluation.hpp"
#include "medseq/rng.hpp"

namespace fs = std::filesystem;

namespace medseq::commands {

std::vector<std::string> list_document_ids(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
            ids.push_back(entry.path().stem().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

std::vector<Document> load_documents(const std::string& dir, bool require_ann) {
    std::vector<Document> docs;
    for (const std::string& id : list_document_ids(dir)) {
        const std::string text = read_file((fs::path(dir) / (id + ".txt")).string());
        const fs::path ann_path = fs::path(dir) / (id + ".ann");
        std::string ann;
        if (fs::exists(ann_path)) {
            ann = read_file(ann_path.string());
        } else if (require_ann) {
            throw DataError("missing annotation file for document " + id);
        }
        std::vector<std::string> warnings;
        Document doc = read_standoff(text, ann, &warnings, id);
        for (const auto& w : warnings) std::cerr << "warning: " << id << ": " << w << "\n";
        docs.push_back(std::move(doc));
    }
    return docs;
}

FeatureSidecars load_sidecars(const std::string& dir, const std::vector<std::string>& ids,
                              bool require) {
    FeatureSidecars sidecars;
    std::vector<std::string> missing;
    for (const std::string& id : ids) {
        const fs::path path = fs::path(dir) / (id + ".feat");
        if (fs::exists(path)) {
            sidecars[id] = read_token_features(path.string());
        } else if (require) {
            missing.push_back(id);
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
        throw ConfigError("augmentation is on but .feat is missing for: " + list);
    }
    return sidecars;
}

void run_gen(const GenOptions& options) {
    fs::create_directories(options.out_dir);
    const std::vector<SynthDocument> docs = generate_synthetic(options.synth);
    if (docs.empty()) std::cerr << "warning: generated 0 documents, manifest only\n";

    for (const auto& sd : docs) {
        const fs::path base = fs::path(options.out_dir) / sd.doc.id;
        write_file(base.string() + ".txt", sd.doc.text);
        write_file(base.string() + ".ann", write_standoff(sd.doc));
        write_file(base.string() + ".feat", sd.feat);
    }

    nlohmann::ordered_json manifest;
    manifest["seed"] = options.synth.seed;
    manifest["documents"] = options.synth.documents;
    nlohmann::ordered_json rates;
    for (int c = 0; c < kNumClasses; ++c) {
        rates[to_string(static_cast<EntityClass>(c))] = options.synth.rates[c];
    }
    manifest["rates"] = rates;
    manifest["tag_correlation"] = options.synth.tag_correlation;
    manifest["ambiguous_conditions"] = options.synth.ambiguous_conditions;
    nlohmann::ordered_json ids = nlohmann::ordered_json::array();
    for (const auto& sd : docs) ids.push_back(sd.doc.id);
    manifest["ids"] = ids;
    write_file((fs::path(options.out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

void run_pretrain(const PretrainOptions& options) {
    const std::vector<std::string> ids = list_document_ids(options.corpus_dir);
    if (ids.empty()) throw DataError("no .txt documents in " + options.corpus_dir);

    std::vector<std::vector<std::string>> sentences;
    for (const std::string& id : ids) {
        const std::string text = read_file((fs::path(options.corpus_dir) / (id + ".txt")).string());
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            std::vector<std::string> words;
            for (const auto& token : tokenize(line)) words.push_back(lowercase(token.surface));
            if (!words.empty()) sentences.push_back(std::move(words));
        }
    }
    const Vocabulary vocab = build_vocab(sentences, options.skipgram.min_count);
    const EmbeddingMatrix matrix = train_skipgram(sentences, vocab, options.skipgram);
    save_embeddings(matrix, vocab, options.out_path);
}

void run_train(const TrainOptions& options) {
    const bool pretrained = options.embeddings_path.has_value();
    if (pretrained == options.random_init) {
        throw ConfigError("exactly one of --embeddings and --random-init must be given");
    }

    const std::vector<Document> docs = load_documents(options.train_dir, true);
    const std::string feat_dir = options.feat_dir.empty() ? options.train_dir : options.feat_dir;

    ModelConfig model_config = options.model;
    model_config.augment = options.augment;
    model_config.tag_streams = options.merged_tags ? TagStreams::Merged : TagStreams::Separate;

    std::vector<std::string> ids;
    for (const auto& d : docs) ids.push_back(d.id);
    const FeatureSidecars sidecars = load_sidecars(feat_dir, ids, options.augment);

    std::optional<std::pair<Vocabulary, EmbeddingMatrix>> init;
    if (pretrained) init = load_embeddings(*options.embeddings_path);

    TrainResult result = train(docs, sidecars, model_config, options.trainer, std::move(init));
    if (options.iob_mask) crf::apply_iob_mask(result.best.params.crf);
    save_checkpoint(result.best, options.checkpoint_out);
    if (!options.history_out.empty()) {
        write_file(options.history_out, history_json(result.history) + "\n");
    }
    std::cerr << "best epoch " << result.history.best_epoch << ", validation lenient micro F1 "
              << (result.history.epochs.empty()
                      ? 0.0
                      : result.history.epochs[result.history.best_epoch - 1].val_f1_lenient_micro)
              << "\n";
}

void run_predict(const PredictOptions& options) {
    const Model model = load_checkpoint(options.checkpoint);
    const std::string feat_dir = options.feat_dir.empty() ? options.in_dir : options.feat_dir;
    fs::create_directories(options.out_dir);

    for (const std::string& id : list_document_ids(options.in_dir)) {
        const std::string text = read_file((fs::path(options.in_dir) / (id + ".txt")).string());
        std::vector<FeatureRow> rows;
        const fs::path feat_path = fs::path(feat_dir) / (id + ".feat");
        if (model.config.augment) {
            if (!fs::exists(feat_path)) {
                throw ConfigError("model uses augmentation but .feat is missing for: " + id);
            }
            rows = read_token_features(feat_path.string());
        } else if (fs::exists(feat_path)) {
            rows = read_token_features(feat_path.string());
        }
        const std::vector<Annotation> annotations = predict_document(model, text, rows);
        Document doc;
        doc.id = id;
        doc.text = text;
        doc.annotations = annotations;
        write_file((fs::path(options.out_dir) / (id + ".ann")).string(), write_standoff(doc));
        write_file((fs::path(options.out_dir) / (id + ".txt")).string(), text);
    }
}

double run_evaluate(const EvaluateOptions& options) {
    const std::vector<std::string> gold_ids = list_document_ids(options.gold_dir);
    if (gold_ids.empty()) throw DataError("no documents in gold directory");

    // Prediction directories may carry .ann only; pair by annotation stem.
    std::vector<std::string> pred_ids;
    for (const auto& entry : fs::directory_iterator(options.pred_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ann") {
            pred_ids.push_back(entry.path().stem().string());
        }
    }
    std::sort(pred_ids.begin(), pred_ids.end());
    std::vector<std::string> only_gold, only_pred;
    std::set_difference(gold_ids.begin(), gold_ids.end(), pred_ids.begin(), pred_ids.end(),
                        std::back_inserter(only_gold));
    std::set_difference(pred_ids.begin(), pred_ids.end(), gold_ids.begin(), gold_ids.end(),
                        std::back_inserter(only_pred));
    if (!only_gold.empty() || !only_pred.empty()) {
        std::string msg = "document sets differ;";
        if (!only_gold.empty()) {
            msg += " missing predictions for:";
            for (const auto& id : only_gold) msg += " " + id;
        }
        if (!only_pred.empty()) {
            msg += " predictions without gold:";
            for (const auto& id : only_pred) msg += " " + id;
        }
        throw DataError(msg);
    }

    const Matcher matcher = options.bipartite ? Matcher::MaximumBipartite
                                              : Matcher::GreedyFirstOverlap;
    std::vector<ClassCounts> strict_counts, lenient_counts;
    TokenConfusion confusion;
    for (const std::string& id : gold_ids) {
        const std::string text = read_file((fs::path(options.gold_dir) / (id + ".txt")).string());
        const std::string gold_ann =
            read_file((fs::path(options.gold_dir) / (id + ".ann")).string());
        const std::string pred_ann =
            read_file((fs::path(options.pred_dir) / (id + ".ann")).string());
        const Document gold = read_standoff(text, gold_ann, nullptr, id);
        const Document pred = read_standoff(text, pred_ann, nullptr, id);

        for (EntityClass cls : kAllClasses) {
            std::vector<Annotation> g, p;
            for (const auto& a : gold.annotations) {
                if (a.cls == cls) g.push_back(a);
            }
            for (const auto& a : pred.annotations) {
                if (a.cls == cls) p.push_back(a);
            }
            if (g.empty() && p.empty()) continue;
            ClassCounts sc = match_spans(g, p, MatchMode::Strict, matcher);
            sc.cls = cls;
            strict_counts.push_back(sc);
            ClassCounts lc = match_spans(std::move(g), std::move(p), MatchMode::Lenient, matcher);
            lc.cls = cls;
            lenient_counts.push_back(lc);
        }

        const std::vector<Token> tokens = tokenize(text);
        confusion.add(spans_to_iob(tokens, gold.annotations),
                      spans_to_iob(tokens, pred.annotations));
    }

    const EvalReport strict = score(strict_counts, MatchMode::Strict);
    const EvalReport lenient = score(lenient_counts, MatchMode::Lenient);

    std::cout << render_report_text(lenient, confusion) << "\n"
              << render_report_text(strict, confusion) << "\n";
    std::cout << "lenient micro F1: " << lenient.micro.f1 << "\n";

    if (!options.report_out.empty()) {
        nlohmann::ordered_json combined;
        combined["lenient"] = nlohmann::ordered_json::parse(render_report_json(lenient, confusion));
        combined["strict"] = nlohmann::ordered_json::parse(render_report_json(strict, confusion));
        write_file(options.report_out, combined.dump(2) + "\n");
    }
    return lenient.micro.f1;
}

double run_gradcheck(const GradcheckOptions& options) {
    Rng rng(options.seed);
    double worst = 0.0;

    // CRF oracles on random small instances.
    double worst_partition = 0.0, worst_viterbi = 0.0;
    for (int i = 0; i < options.instances * 10; ++i) {
        const int length = 1 + static_cast<int>(rng.below(5));
        const int k = 2 + static_cast<int>(rng.below(5));
        Eigen::MatrixXd em(length, k);
        crf::CrfParams params = crf::CrfParams::zeros(k);
        for (int t = 0; t < length; ++t) {
            for (int j = 0; j < k; ++j) em(t, j) = rng.uniform(-1.0, 1.0);
        }
        for (int a = 0; a < k; ++a) {
            params.start(a) = rng.uniform(-1.0, 1.0);
            params.end(a) = rng.uniform(-1.0, 1.0);
            for (int b = 0; b < k; ++b) params.transitions(a, b) = rng.uniform(-1.0, 1.0);
        }
        worst_partition =
            std::max(worst_partition, std::abs(crf::log_partition(em, params) -
                                               crf::brute_force_log_partition(em, params)));
        worst_viterbi = std::max(worst_viterbi, std::abs(crf::viterbi(em, params).score -
                                                         crf::brute_force_best(em, params).score));
    }
    std::cout << "crf log-partition vs brute force, max abs error: " << worst_partition << "\n";
    std::cout << "crf viterbi vs brute force, max abs error:       " << worst_viterbi << "\n";

    // Full-model finite differences at toy size.
    ModelConfig config;
    config.word_dim = 6;
    config.clamp_dim = 3;
    config.ctakes_dim = 3;
    config.augment = true;
    for (int i = 0; i < options.instances; ++i) {
        config.seed = rng.next();
        const int length = 1 + static_cast<int>(rng.below(4));
        ModelParams params = init_model(config, init_uniform(12, config.word_dim, rng.next()));
        EncodedSegment segment;
        std::vector<int> gold;
        for (int t = 0; t < length; ++t) {
            segment.word_ids.push_back(static_cast<int>(rng.below(12)));
            segment.clamp_ids.push_back(static_cast<int>(rng.below(kClampVocabSize)));
            segment.ctakes_ids.push_back(static_cast<int>(rng.below(kCtakesVocabSize)));
            gold.push_back(static_cast<int>(rng.below(config.num_labels)));
        }
        const GradCheckReport report =
            gradient_check(params, config, segment, gold, options.epsilon, 12, rng.next());
        worst = std::max(worst, report.max_relative_error);
    }
    std::cout << "full-model analytic vs central differences, max relative error: " << worst
              << "\n";
    return std::max({worst, worst_partition, worst_viterbi});
}

}  // namespace medseq::commands
