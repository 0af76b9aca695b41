#include "medseq/network.hpp"

#include <cmath>

#include "medseq/errors.hpp"
#include "medseq/rng.hpp"

namespace medseq {

namespace {

double round_half_up(double x) {
    return std::floor(x + 0.5);
}

void glorot_fill(Eigen::Ref<Eigen::MatrixXd> block, double fan_in, double fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
        for (Eigen::Index c = 0; c < block.cols(); ++c) {
            block(r, c) = rng.uniform(-bound, bound);
        }
    }
}

LstmParams init_lstm(int input_dim, int hidden, Rng& rng) {
    LstmParams p;
    p.w.resize(4 * hidden, input_dim);
    p.u.resize(4 * hidden, hidden);
    p.b = Eigen::VectorXd::Zero(4 * hidden);
    for (int gate = 0; gate < 4; ++gate) {
        glorot_fill(p.w.middleRows(gate * hidden, hidden), input_dim, hidden, rng);
        glorot_fill(p.u.middleRows(gate * hidden, hidden), hidden, hidden, rng);
    }
    p.b.segment(hidden, hidden).setOnes();  // forget gate bias
    return p;
}

inline double sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

/// Runs one direction over the rows of inputs (callers reverse for the
/// backward chain) and fills the trace.
void run_chain(const LstmParams& params, const Eigen::MatrixXd& inputs, LstmTrace& trace) {
    const Eigen::Index length = inputs.rows();
    const int h = params.hidden();
    trace.gates_i.resize(length, h);
    trace.gates_f.resize(length, h);
    trace.gates_g.resize(length, h);
    trace.gates_o.resize(length, h);
    trace.cells.resize(length, h);
    trace.hidden.resize(length, h);

    Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd z(4 * h);
    for (Eigen::Index t = 0; t < length; ++t) {
        z.noalias() = params.w * inputs.row(t).transpose();
        z.noalias() += params.u * h_prev;
        z += params.b;
        for (int k = 0; k < h; ++k) {
            const double gi = sigmoid(z(k));
            const double gf = sigmoid(z(h + k));
            const double gg = std::tanh(z(2 * h + k));
            const double go = sigmoid(z(3 * h + k));
            const double c = gf * c_prev(k) + gi * gg;
            trace.gates_i(t, k) = gi;
            trace.gates_f(t, k) = gf;
            trace.gates_g(t, k) = gg;
            trace.gates_o(t, k) = go;
            trace.cells(t, k) = c;
            trace.hidden(t, k) = go * std::tanh(c);
        }
        h_prev = trace.hidden.row(t).transpose();
        c_prev = trace.cells.row(t).transpose();
    }
}

/// BPTT for one direction. d_hidden rows follow the chain's own time order.
/// Returns d_inputs in the same order.
Eigen::MatrixXd chain_backward(const LstmParams& params, const Eigen::MatrixXd& inputs,
                               const LstmTrace& trace, const Eigen::MatrixXd& d_hidden,
                               LstmParams& grads, GradFault fault) {
    const Eigen::Index length = inputs.rows();
    const int h = params.hidden();
    Eigen::MatrixXd d_inputs = Eigen::MatrixXd::Zero(length, inputs.cols());

    Eigen::VectorXd dh_rec = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd dc = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd dz(4 * h);
    for (Eigen::Index t = length - 1; t >= 0; --t) {
        for (int k = 0; k < h; ++k) {
            const double gi = trace.gates_i(t, k);
            const double gf = trace.gates_f(t, k);
            const double gg = trace.gates_g(t, k);
            const double go = trace.gates_o(t, k);
            const double tc = std::tanh(trace.cells(t, k));
            const double c_prev = t > 0 ? trace.cells(t - 1, k) : 0.0;

            const double dh = d_hidden(t, k) + dh_rec(k);
            const double dck = dc(k) + dh * go * (1.0 - tc * tc);

            dz(k) = dck * gg * gi * (1.0 - gi);                    // input gate
            dz(h + k) = dck * c_prev * gf * (1.0 - gf);            // forget gate
            dz(2 * h + k) = dck * gi * (1.0 - gg * gg);            // cell candidate
            dz(3 * h + k) = dh * tc * go * (1.0 - go);             // output gate
            dc(k) = dck * gf;
        }
        switch (fault) {
            case GradFault::NegateInputGate: dz.segment(0, h) = -dz.segment(0, h); break;
            case GradFault::NegateForgetGate: dz.segment(h, h) = -dz.segment(h, h); break;
            case GradFault::NegateCellGate: dz.segment(2 * h, h) = -dz.segment(2 * h, h); break;
            case GradFault::NegateOutputGate: dz.segment(3 * h, h) = -dz.segment(3 * h, h); break;
            case GradFault::None: break;
        }

        grads.w.noalias() += dz * inputs.row(t);
        if (t > 0) grads.u.noalias() += dz * trace.hidden.row(t - 1);
        grads.b += dz;
        d_inputs.row(t) = (params.w.transpose() * dz).transpose();
        dh_rec.noalias() = params.u.transpose() * dz;
    }
    return d_inputs;
}

}  // namespace

int ModelConfig::input_dim() const {
    if (!augment) return word_dim;
    if (tag_streams == TagStreams::Merged) return word_dim + merged_dim;
    return word_dim + clamp_dim + ctakes_dim;
}

int ModelConfig::hidden_dim() const {
    if (hidden_override) return std::max(1, *hidden_override);
    return std::max(1, static_cast<int>(round_half_up(hidden_fraction * input_dim())));
}

ModelParams init_model(const ModelConfig& config, EmbeddingMatrix word_emb) {
    if (word_emb.dim() != config.word_dim) {
        throw ConfigError("word embedding dim " + std::to_string(word_emb.dim()) +
                          " does not match configured " + std::to_string(config.word_dim));
    }
    ModelParams params;
    params.word_emb = std::move(word_emb);
    if (config.augment) {
        if (config.tag_streams == TagStreams::Merged) {
            params.merged_emb =
                init_uniform(kMergedVocabSize, config.merged_dim, Rng::mix(config.seed, 3));
        } else {
            params.clamp_emb =
                init_uniform(kClampVocabSize, config.clamp_dim, Rng::mix(config.seed, 1));
            params.ctakes_emb =
                init_uniform(kCtakesVocabSize, config.ctakes_dim, Rng::mix(config.seed, 2));
        }
    }
    const int d = config.input_dim();
    const int h = config.hidden_dim();
    Rng rng(config.seed, 7);
    params.forward = init_lstm(d, h, rng);
    params.backward = init_lstm(d, h, rng);
    params.projection.w.resize(config.num_labels, 2 * h);
    glorot_fill(params.projection.w, 2.0 * h, config.num_labels, rng);
    params.projection.b = Eigen::VectorXd::Zero(config.num_labels);
    params.crf = crf::CrfParams::zeros(config.num_labels);
    return params;
}

ModelParams zeros_like(const ModelParams& params) {
    ModelParams z;
    z.word_emb.values = Eigen::MatrixXd::Zero(params.word_emb.rows(), params.word_emb.dim());
    const auto zero_opt = [](const std::optional<EmbeddingMatrix>& src,
                             std::optional<EmbeddingMatrix>& dst) {
        if (src) {
            dst.emplace();
            dst->values = Eigen::MatrixXd::Zero(src->rows(), src->dim());
        }
    };
    zero_opt(params.clamp_emb, z.clamp_emb);
    zero_opt(params.ctakes_emb, z.ctakes_emb);
    zero_opt(params.merged_emb, z.merged_emb);
    const auto zero_lstm = [](const LstmParams& src) {
        LstmParams out;
        out.w = Eigen::MatrixXd::Zero(src.w.rows(), src.w.cols());
        out.u = Eigen::MatrixXd::Zero(src.u.rows(), src.u.cols());
        out.b = Eigen::VectorXd::Zero(src.b.size());
        return out;
    };
    z.forward = zero_lstm(params.forward);
    z.backward = zero_lstm(params.backward);
    z.projection.w = Eigen::MatrixXd::Zero(params.projection.w.rows(), params.projection.w.cols());
    z.projection.b = Eigen::VectorXd::Zero(params.projection.b.size());
    z.crf = crf::CrfParams::zeros(params.crf.num_labels());
    return z;
}

std::vector<TensorView> tensor_views(ModelParams& params) {
    std::vector<TensorView> views;
    const auto add = [&](const char* name, auto& m) {
        views.push_back({name, m.data(), m.size()});
    };
    add("word_emb", params.word_emb.values);
    if (params.clamp_emb) add("clamp_emb", params.clamp_emb->values);
    if (params.ctakes_emb) add("ctakes_emb", params.ctakes_emb->values);
    if (params.merged_emb) add("merged_emb", params.merged_emb->values);
    add("fwd_w", params.forward.w);
    add("fwd_u", params.forward.u);
    add("fwd_b", params.forward.b);
    add("bwd_w", params.backward.w);
    add("bwd_u", params.backward.u);
    add("bwd_b", params.backward.b);
    add("proj_w", params.projection.w);
    add("proj_b", params.projection.b);
    add("crf_trans", params.crf.transitions);
    add("crf_start", params.crf.start);
    add("crf_end", params.crf.end);
    return views;
}

EncodedSegment encode_segment(const std::vector<Token>& tokens,
                              const std::vector<TokenFeatures>& features,
                              const Vocabulary& vocab, const ModelConfig& config) {
    if (config.augment && features.size() != tokens.size()) {
        throw DataError("feature sequence length does not match token count");
    }
    EncodedSegment segment;
    segment.word_ids.reserve(tokens.size());
    for (const auto& token : tokens) segment.word_ids.push_back(vocab.lookup(token.surface));
    if (config.augment) {
        for (const auto& f : features) {
            if (config.tag_streams == TagStreams::Merged) {
                segment.merged_ids.push_back(merged_unit_index(f));
            } else {
                segment.clamp_ids.push_back(clamp_unit_index(f.clamp));
                segment.ctakes_ids.push_back(ctakes_unit_index(f.ctakes));
            }
        }
    }
    return segment;
}

Eigen::MatrixXd token_representations(const EncodedSegment& segment, const ModelParams& params,
                                      const ModelConfig& config) {
    const Eigen::Index length = static_cast<Eigen::Index>(segment.length());
    Eigen::MatrixXd inputs(length, config.input_dim());
    for (Eigen::Index t = 0; t < length; ++t) {
        inputs.block(t, 0, 1, config.word_dim) =
            params.word_emb.values.row(segment.word_ids[t]);
        if (!config.augment) continue;
        if (config.tag_streams == TagStreams::Merged) {
            inputs.block(t, config.word_dim, 1, config.merged_dim) =
                params.merged_emb->values.row(segment.merged_ids[t]);
        } else {
            inputs.block(t, config.word_dim, 1, config.clamp_dim) =
                params.clamp_emb->values.row(segment.clamp_ids[t]);
            inputs.block(t, config.word_dim + config.clamp_dim, 1, config.ctakes_dim) =
                params.ctakes_emb->values.row(segment.ctakes_ids[t]);
        }
    }
    return inputs;
}

void lstm_cell(const LstmParams& params, const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
               const Eigen::VectorXd& c_prev, Eigen::VectorXd& h_out, Eigen::VectorXd& c_out) {
    const int h = params.hidden();
    Eigen::VectorXd z = params.w * x + params.u * h_prev + params.b;
    h_out.resize(h);
    c_out.resize(h);
    for (int k = 0; k < h; ++k) {
        const double gi = sigmoid(z(k));
        const double gf = sigmoid(z(h + k));
        const double gg = std::tanh(z(2 * h + k));
        const double go = sigmoid(z(3 * h + k));
        c_out(k) = gf * c_prev(k) + gi * gg;
        h_out(k) = go * std::tanh(c_out(k));
    }
}

ForwardTrace bilstm_forward(const Eigen::MatrixXd& inputs, const ModelParams& params) {
    ForwardTrace trace;
    trace.inputs = inputs;
    const Eigen::Index length = inputs.rows();
    const int h = params.forward.hidden();
    if (length == 0) {
        trace.hidden.resize(0, 2 * h);
        return trace;
    }
    run_chain(params.forward, inputs, trace.fwd);
    const Eigen::MatrixXd reversed = inputs.colwise().reverse();
    run_chain(params.backward, reversed, trace.bwd);

    trace.hidden.resize(length, 2 * h);
    trace.hidden.leftCols(h) = trace.fwd.hidden;
    trace.hidden.rightCols(h) = trace.bwd.hidden.colwise().reverse();
    return trace;
}

Eigen::MatrixXd emissions(const Eigen::MatrixXd& hidden, const ProjectionParams& projection) {
    Eigen::MatrixXd scores = hidden * projection.w.transpose();
    scores.rowwise() += projection.b.transpose();
    return scores;
}

void backward(const ForwardTrace& trace, const Eigen::MatrixXd& d_scores,
              const EncodedSegment& segment, const ModelParams& params,
              const ModelConfig& config, ModelParams& grads, GradFault fault) {
    const Eigen::Index length = trace.inputs.rows();
    if (d_scores.rows() != length || length != static_cast<Eigen::Index>(segment.length())) {
        throw DataError("backward: cached state does not match the upstream gradient");
    }
    if (length == 0) return;
    const int h = params.forward.hidden();

    // Projection.
    grads.projection.w.noalias() += d_scores.transpose() * trace.hidden;
    grads.projection.b += d_scores.colwise().sum().transpose();
    const Eigen::MatrixXd d_hidden = d_scores * params.projection.w;

    // Both chains; the backward chain sees reversed rows.
    const Eigen::MatrixXd d_fwd = d_hidden.leftCols(h);
    const Eigen::MatrixXd d_bwd = d_hidden.rightCols(h).colwise().reverse();
    const Eigen::MatrixXd reversed_inputs = trace.inputs.colwise().reverse();

    Eigen::MatrixXd d_inputs =
        chain_backward(params.forward, trace.inputs, trace.fwd, d_fwd, grads.forward, fault);
    const Eigen::MatrixXd d_inputs_bwd = chain_backward(params.backward, reversed_inputs,
                                                        trace.bwd, d_bwd, grads.backward, fault);
    d_inputs += d_inputs_bwd.colwise().reverse();

    // Scatter into embedding rows.
    for (Eigen::Index t = 0; t < length; ++t) {
        grads.word_emb.values.row(segment.word_ids[t]) +=
            d_inputs.block(t, 0, 1, config.word_dim);
        if (!config.augment) continue;
        if (config.tag_streams == TagStreams::Merged) {
            grads.merged_emb->values.row(segment.merged_ids[t]) +=
                d_inputs.block(t, config.word_dim, 1, config.merged_dim);
        } else {
            grads.clamp_emb->values.row(segment.clamp_ids[t]) +=
                d_inputs.block(t, config.word_dim, 1, config.clamp_dim);
            grads.ctakes_emb->values.row(segment.ctakes_ids[t]) +=
                d_inputs.block(t, config.word_dim + config.clamp_dim, 1, config.ctakes_dim);
        }
    }
}

GradCheckReport gradient_check(const ModelParams& params, const ModelConfig& config,
                               const EncodedSegment& segment, const std::vector<int>& gold,
                               double epsilon, int samples_per_tensor, std::uint64_t seed,
                               GradFault fault) {
    GradCheckReport report;
    if (segment.length() == 0) {
        report.applicable = false;
        return report;
    }
    report.applicable = true;

    const auto loss_of = [&](ModelParams& p) {
        const Eigen::MatrixXd inputs = token_representations(segment, p, config);
        const ForwardTrace trace = bilstm_forward(inputs, p);
        const Eigen::MatrixXd scores = emissions(trace.hidden, p.projection);
        return crf::nll(scores, p.crf, gold);
    };

    // Analytic gradients.
    ModelParams work = params;
    ModelParams grads = zeros_like(params);
    {
        const Eigen::MatrixXd inputs = token_representations(segment, work, config);
        const ForwardTrace trace = bilstm_forward(inputs, work);
        const Eigen::MatrixXd scores = emissions(trace.hidden, work.projection);
        const crf::NllGradients g = crf::nll_gradients(scores, work.crf, gold);
        grads.crf.transitions += g.d_transitions;
        grads.crf.start += g.d_start;
        grads.crf.end += g.d_end;
        backward(trace, g.d_emissions, segment, work, config, grads, fault);
    }

    Rng rng(seed);
    auto param_views = tensor_views(work);
    auto grad_views = tensor_views(grads);
    for (std::size_t v = 0; v < param_views.size(); ++v) {
        double tensor_max = 0.0;
        const Eigen::Index size = param_views[v].size;
        const int samples = static_cast<int>(std::min<Eigen::Index>(samples_per_tensor, size));
        for (int s = 0; s < samples; ++s) {
            const Eigen::Index idx = static_cast<Eigen::Index>(rng.below(size));
            double* slot = param_views[v].data + idx;
            const double original = *slot;
            *slot = original + epsilon;
            const double up = loss_of(work);
            *slot = original - epsilon;
            const double down = loss_of(work);
            *slot = original;
            const double numeric = (up - down) / (2.0 * epsilon);
            const double analytic = grad_views[v].data[idx];
            const double err = std::abs(analytic - numeric) /
                               std::max(1e-12, std::abs(analytic) + std::abs(numeric));
            tensor_max = std::max(tensor_max, err);
        }
        report.per_tensor.emplace_back(param_views[v].name, tensor_max);
        report.max_relative_error = std::max(report.max_relative_error, tensor_max);
    }
    return report;
}

}  // namespace medseq
