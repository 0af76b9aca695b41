// Python bindings for the medseq core: corpus handling, tag features,
// embeddings, the BiLSTM-CRF pipeline and the evaluation protocol.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "medseq/checkpoint.hpp"
#include "medseq/commands.hpp"
#include "medseq/corpus.hpp"
#include "medseq/crf.hpp"
#include "medseq/embeddings.hpp"
#include "medseq/evaluation.hpp"
#include "medseq/synthetic.hpp"
#include "medseq/training.hpp"

namespace py = pybind11;
using namespace medseq;

namespace {

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
    const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index c = r > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != c) {
            throw std::invalid_argument("ragged matrix");
        }
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[i][j];
    }
    return m;
}

crf::CrfParams make_crf(const std::vector<std::vector<double>>& transitions,
                        const std::vector<double>& start, const std::vector<double>& end) {
    crf::CrfParams params;
    params.transitions = to_matrix(transitions);
    params.start = Eigen::Map<const Eigen::VectorXd>(start.data(),
                                                     static_cast<Eigen::Index>(start.size()));
    params.end =
        Eigen::Map<const Eigen::VectorXd>(end.data(), static_cast<Eigen::Index>(end.size()));
    return params;
}

}  // namespace

PYBIND11_MODULE(medseq_py, m) {
    m.doc() = "Drug-related entity recognition: BiLSTM-CRF core operations";

    py::class_<Token>(m, "Token")
        .def_readonly("surface", &Token::surface)
        .def_readonly("begin", &Token::begin)
        .def_readonly("end", &Token::end)
        .def("__repr__", [](const Token& t) {
            return "Token('" + t.surface + "', " + std::to_string(t.begin) + ", " +
                   std::to_string(t.end) + ")";
        });

    py::class_<Fragment>(m, "Fragment")
        .def_readonly("begin", &Fragment::begin)
        .def_readonly("end", &Fragment::end);

    py::class_<Annotation>(m, "Annotation")
        .def_readonly("id", &Annotation::id)
        .def_property_readonly("cls",
                               [](const Annotation& a) { return to_string(a.cls); })
        .def_readonly("fragments", &Annotation::fragments)
        .def_readonly("text", &Annotation::text)
        .def_property_readonly("start", &Annotation::start)
        .def_property_readonly("end", &Annotation::end);

    m.def("tokenize", &tokenize, py::arg("text"));

    m.def(
        "read_standoff",
        [](const std::string& text, const std::string& ann) {
            return read_standoff(text, ann).annotations;
        },
        py::arg("text"), py::arg("ann"));

    m.def(
        "write_standoff",
        [](const std::string& text, const std::vector<Annotation>& annotations) {
            Document doc;
            doc.text = text;
            doc.annotations = annotations;
            return write_standoff(doc);
        },
        py::arg("text"), py::arg("annotations"));

    m.def(
        "spans_to_iob",
        [](const std::vector<Token>& tokens, const std::vector<Annotation>& annotations) {
            std::vector<std::string> names;
            for (const auto& l : spans_to_iob(tokens, annotations)) names.push_back(label_name(l));
            return names;
        },
        py::arg("tokens"), py::arg("annotations"));

    m.def(
        "iob_to_spans",
        [](const std::vector<Token>& tokens, const std::vector<std::string>& labels) {
            std::vector<IOBLabel> parsed;
            for (const auto& name : labels) parsed.push_back(label_from_name(name));
            return iob_to_spans(tokens, parsed);
        },
        py::arg("tokens"), py::arg("labels"));

    m.def(
        "log_partition",
        [](const std::vector<std::vector<double>>& emissions,
           const std::vector<std::vector<double>>& transitions, const std::vector<double>& start,
           const std::vector<double>& end) {
            return crf::log_partition(to_matrix(emissions), make_crf(transitions, start, end));
        },
        py::arg("emissions"), py::arg("transitions"), py::arg("start"), py::arg("end"));

    m.def(
        "viterbi",
        [](const std::vector<std::vector<double>>& emissions,
           const std::vector<std::vector<double>>& transitions, const std::vector<double>& start,
           const std::vector<double>& end) {
            const crf::DecodedPath path =
                crf::viterbi(to_matrix(emissions), make_crf(transitions, start, end));
            return py::make_tuple(path.labels, path.score);
        },
        py::arg("emissions"), py::arg("transitions"), py::arg("start"), py::arg("end"));

    m.def(
        "generate_corpus",
        [](const std::string& out_dir, int documents, std::uint64_t seed, double tag_correlation,
           bool ambiguous_conditions) {
            commands::GenOptions options;
            options.out_dir = out_dir;
            options.synth.documents = documents;
            options.synth.seed = seed;
            options.synth.tag_correlation = tag_correlation;
            options.synth.ambiguous_conditions = ambiguous_conditions;
            commands::run_gen(options);
        },
        py::arg("out_dir"), py::arg("documents") = 20, py::arg("seed") = 7,
        py::arg("tag_correlation") = 1.0, py::arg("ambiguous_conditions") = false);

    m.def(
        "pretrain",
        [](const std::string& corpus_dir, const std::string& out_path, int dim, int epochs,
           std::uint64_t seed, int min_count) {
            commands::PretrainOptions options;
            options.corpus_dir = corpus_dir;
            options.out_path = out_path;
            options.skipgram.dim = dim;
            options.skipgram.epochs = epochs;
            options.skipgram.seed = seed;
            options.skipgram.min_count = min_count;
            commands::run_pretrain(options);
        },
        py::arg("corpus_dir"), py::arg("out_path"), py::arg("dim") = 100, py::arg("epochs") = 5,
        py::arg("seed") = 1, py::arg("min_count") = 1);

    m.def(
        "train",
        [](const std::string& train_dir, const std::string& checkpoint_out, bool augment,
           const std::string& embeddings_path, int word_dim, int max_epochs, int patience,
           std::uint64_t seed) {
            commands::TrainOptions options;
            options.train_dir = train_dir;
            options.checkpoint_out = checkpoint_out;
            options.augment = augment;
            if (embeddings_path.empty()) {
                options.random_init = true;
            } else {
                options.embeddings_path = embeddings_path;
            }
            options.model.word_dim = word_dim;
            options.model.seed = seed;
            options.trainer.max_epochs = max_epochs;
            options.trainer.patience = patience;
            options.trainer.shuffle_seed = seed;
            commands::run_train(options);
        },
        py::arg("train_dir"), py::arg("checkpoint_out"), py::arg("augment") = false,
        py::arg("embeddings_path") = "", py::arg("word_dim") = 100, py::arg("max_epochs") = 100,
        py::arg("patience") = 3, py::arg("seed") = 42);

    m.def(
        "predict",
        [](const std::string& checkpoint, const std::string& text,
           const std::string& feat_content) {
            const Model model = load_checkpoint(checkpoint);
            const std::vector<FeatureRow> rows = parse_token_features(feat_content);
            return predict_document(model, text, rows);
        },
        py::arg("checkpoint"), py::arg("text"), py::arg("feat_content") = "");

    m.def(
        "predict_dir",
        [](const std::string& checkpoint, const std::string& in_dir, const std::string& out_dir) {
            commands::PredictOptions options;
            options.checkpoint = checkpoint;
            options.in_dir = in_dir;
            options.out_dir = out_dir;
            commands::run_predict(options);
        },
        py::arg("checkpoint"), py::arg("in_dir"), py::arg("out_dir"));

    m.def(
        "evaluate",
        [](const std::string& gold_dir, const std::string& pred_dir,
           const std::string& report_out) {
            commands::EvaluateOptions options;
            options.gold_dir = gold_dir;
            options.pred_dir = pred_dir;
            options.report_out = report_out;
            return commands::run_evaluate(options);
        },
        py::arg("gold_dir"), py::arg("pred_dir"), py::arg("report_out") = "");

    m.def(
        "gradcheck",
        [](std::uint64_t seed, int instances) {
            commands::GradcheckOptions options;
            options.seed = seed;
            options.instances = instances;
            return commands::run_gradcheck(options);
        },
        py::arg("seed") = 1, py::arg("instances") = 5);
}
