#include "medseq/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "medseq/errors.hpp"

namespace medseq {

static_assert(std::endian::native == std::endian::little,
              "checkpoint layout is little-endian");

namespace {

void write_tensor_rows(std::ostream& out, const Eigen::MatrixXd& m) {
    // Eigen stores column-major; the file is row-major.
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            out.write(reinterpret_cast<const char*>(&v), sizeof v);
        }
    }
}

void read_tensor_rows(std::istream& in, Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            double v = 0;
            if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
                throw ParseError("checkpoint truncated inside tensor data");
            }
            m(r, c) = v;
        }
    }
}

struct TensorDecl {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
};

Eigen::MatrixXd* tensor_slot(ModelParams& params, const std::string& name) {
    if (name == "word_emb") return &params.word_emb.values;
    if (name == "clamp_emb") return params.clamp_emb ? &params.clamp_emb->values : nullptr;
    if (name == "ctakes_emb") return params.ctakes_emb ? &params.ctakes_emb->values : nullptr;
    if (name == "merged_emb") return params.merged_emb ? &params.merged_emb->values : nullptr;
    if (name == "fwd_w") return &params.forward.w;
    if (name == "fwd_u") return &params.forward.u;
    if (name == "bwd_w") return &params.backward.w;
    if (name == "bwd_u") return &params.backward.u;
    if (name == "proj_w") return &params.projection.w;
    if (name == "crf_trans") return &params.crf.transitions;
    return nullptr;
}

Eigen::VectorXd* vector_slot(ModelParams& params, const std::string& name) {
    if (name == "fwd_b") return &params.forward.b;
    if (name == "bwd_b") return &params.backward.b;
    if (name == "proj_b") return &params.projection.b;
    if (name == "crf_start") return &params.crf.start;
    if (name == "crf_end") return &params.crf.end;
    return nullptr;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);

    const ModelConfig& cfg = model.config;
    out << "medseq-checkpoint 1\n";
    out << "augment " << (cfg.augment ? 1 : 0) << "\n";
    out << "tag_streams " << (cfg.tag_streams == TagStreams::Merged ? "merged" : "separate")
        << "\n";
    out << "word_dim " << cfg.word_dim << "\n";
    out << "clamp_dim " << cfg.clamp_dim << "\n";
    out << "ctakes_dim " << cfg.ctakes_dim << "\n";
    out << "merged_dim " << cfg.merged_dim << "\n";
    out << "hidden " << cfg.hidden_dim() << "\n";
    out << "hidden_fraction " << cfg.hidden_fraction << "\n";
    out << "labels " << cfg.num_labels << "\n";
    out << "seed " << cfg.seed << "\n";
    out << "word_source "
        << (model.params.word_emb.source == EmbeddingSource::Pretrained ? "pretrained" : "random")
        << "\n";
    out << "vocab " << model.vocab.size() << "\n";
    for (int i = 0; i < model.vocab.size(); ++i) {
        out << model.vocab.word(i) << " " << model.vocab.count(i) << "\n";
    }

    // A const view is enough to enumerate shapes.
    auto views = tensor_views(const_cast<ModelParams&>(model.params));
    std::vector<std::pair<const Eigen::MatrixXd*, const Eigen::VectorXd*>> tensors;
    ModelParams& p = const_cast<ModelParams&>(model.params);
    const auto decl = [&](const char* name) {
        if (auto* m = tensor_slot(p, name)) {
            out << "tensor " << name << " " << m->rows() << " " << m->cols() << "\n";
            tensors.emplace_back(m, nullptr);
        } else if (auto* v = vector_slot(p, name)) {
            out << "tensor " << name << " " << v->size() << " 1\n";
            tensors.emplace_back(nullptr, v);
        }
    };
    for (const auto& view : views) decl(view.name);
    out << "data\n";
    for (const auto& [m, v] : tensors) {
        if (m) {
            write_tensor_rows(out, *m);
        } else {
            out.write(reinterpret_cast<const char*>(v->data()),
                      static_cast<std::streamsize>(v->size() * sizeof(double)));
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);

    std::string line;
    if (!std::getline(in, line) || line != "medseq-checkpoint 1") {
        throw ParseError("not a medseq checkpoint: " + path);
    }

    Model model;
    ModelConfig& cfg = model.config;
    std::vector<TensorDecl> decls;
    int vocab_size = -1;
    int hidden = 0;
    std::string word_source = "random";

    while (std::getline(in, line)) {
        if (line == "data") break;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "augment") {
            int v;
            ls >> v;
            cfg.augment = v != 0;
        } else if (key == "tag_streams") {
            std::string v;
            ls >> v;
            cfg.tag_streams = v == "merged" ? TagStreams::Merged : TagStreams::Separate;
        } else if (key == "word_dim") {
            ls >> cfg.word_dim;
        } else if (key == "clamp_dim") {
            ls >> cfg.clamp_dim;
        } else if (key == "ctakes_dim") {
            ls >> cfg.ctakes_dim;
        } else if (key == "merged_dim") {
            ls >> cfg.merged_dim;
        } else if (key == "hidden") {
            ls >> hidden;
        } else if (key == "hidden_fraction") {
            ls >> cfg.hidden_fraction;
        } else if (key == "labels") {
            ls >> cfg.num_labels;
        } else if (key == "seed") {
            ls >> cfg.seed;
        } else if (key == "word_source") {
            ls >> word_source;
        } else if (key == "vocab") {
            ls >> vocab_size;
            for (int i = 0; i < vocab_size; ++i) {
                if (!std::getline(in, line)) throw ParseError("checkpoint vocab truncated");
                std::istringstream ws(line);
                std::string word;
                std::uint64_t count = 0;
                ws >> word >> count;
                if (i >= 2) model.vocab.add(word, count);
            }
        } else if (key == "tensor") {
            TensorDecl d;
            ls >> d.name >> d.rows >> d.cols;
            decls.push_back(d);
        } else if (!key.empty()) {
            throw ParseError("unknown checkpoint key: " + key);
        }
    }
    if (vocab_size < 0) throw ParseError("checkpoint has no vocabulary");
    if (hidden > 0) cfg.hidden_override = hidden;

    // Allocate optional tables before resolving slots.
    ModelParams& p = model.params;
    p.word_emb.source =
        word_source == "pretrained" ? EmbeddingSource::Pretrained : EmbeddingSource::Random;
    for (const auto& d : decls) {
        if (d.name == "clamp_emb") p.clamp_emb.emplace();
        if (d.name == "ctakes_emb") p.ctakes_emb.emplace();
        if (d.name == "merged_emb") p.merged_emb.emplace();
    }
    for (const auto& d : decls) {
        if (auto* m = tensor_slot(p, d.name)) {
            m->resize(d.rows, d.cols);
            read_tensor_rows(in, *m);
        } else if (auto* v = vector_slot(p, d.name)) {
            if (d.cols != 1) throw ParseError("vector tensor " + d.name + " must have 1 column");
            v->resize(d.rows);
            if (!in.read(reinterpret_cast<char*>(v->data()),
                         static_cast<std::streamsize>(v->size() * sizeof(double)))) {
                throw ParseError("checkpoint truncated inside tensor data");
            }
        } else {
            throw ParseError("unknown tensor in checkpoint: " + d.name);
        }
    }
    if (p.word_emb.values.rows() != model.vocab.size()) {
        throw DataError("checkpoint vocabulary does not match embedding rows");
    }
    return model;
}

}  // namespace medseq
