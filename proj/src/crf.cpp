#include "medseq/crf.hpp"

#include <cmath>
#include <limits>

#include "medseq/corpus.hpp"
#include "medseq/errors.hpp"

namespace medseq::crf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

void check_instance(const Eigen::MatrixXd& emissions, const CrfParams& crf) {
    if (emissions.rows() < 1) throw DataError("CRF: sequence length must be >= 1");
    if (emissions.cols() != crf.num_labels()) {
        throw DataError("CRF: emission width does not match label count");
    }
}

void check_gold(const Eigen::MatrixXd& emissions, const CrfParams& crf,
                const std::vector<int>& gold) {
    check_instance(emissions, crf);
    if (static_cast<Eigen::Index>(gold.size()) != emissions.rows()) {
        throw DataError("CRF: gold length does not match sequence length");
    }
    for (int y : gold) {
        if (y < 0 || y >= crf.num_labels()) {
            throw DataError("CRF: gold label " + std::to_string(y) + " out of range");
        }
    }
}

void check_brute_force_size(Eigen::Index length, int num_labels) {
    double paths = 1.0;
    for (Eigen::Index t = 0; t < length; ++t) {
        paths *= num_labels;
        if (paths > 1e6) {
            throw SizeError("brute force oracle limited to 10^6 paths");
        }
    }
}

template <typename Visit>
void for_each_path(Eigen::Index length, int num_labels, Visit&& visit) {
    std::vector<int> labels(length, 0);
    while (true) {
        visit(labels);
        Eigen::Index pos = length - 1;
        while (pos >= 0) {
            if (++labels[pos] < num_labels) break;
            labels[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
}

}  // namespace

CrfParams CrfParams::zeros(int num_labels) {
    CrfParams crf;
    crf.transitions = Eigen::MatrixXd::Zero(num_labels, num_labels);
    crf.start = Eigen::VectorXd::Zero(num_labels);
    crf.end = Eigen::VectorXd::Zero(num_labels);
    return crf;
}

double path_score(const Eigen::MatrixXd& emissions, const CrfParams& crf,
                  const std::vector<int>& labels) {
    check_gold(emissions, crf, labels);
    double score = crf.start(labels.front()) + crf.end(labels.back());
    for (std::size_t t = 0; t < labels.size(); ++t) {
        score += emissions(static_cast<Eigen::Index>(t), labels[t]);
        if (t > 0) score += crf.transitions(labels[t - 1], labels[t]);
    }
    return score;
}

double log_partition(const Eigen::MatrixXd& emissions, const CrfParams& crf) {
    check_instance(emissions, crf);
    const Eigen::Index length = emissions.rows();
    const int k = crf.num_labels();

    Eigen::VectorXd alpha = crf.start + emissions.row(0).transpose();
    Eigen::VectorXd next(k);
    for (Eigen::Index t = 1; t < length; ++t) {
        for (int j = 0; j < k; ++j) {
            next(j) = log_sum_exp(alpha + crf.transitions.col(j)) + emissions(t, j);
        }
        alpha.swap(next);
    }
    return log_sum_exp(alpha + crf.end);
}

double brute_force_log_partition(const Eigen::MatrixXd& emissions, const CrfParams& crf) {
    check_instance(emissions, crf);
    check_brute_force_size(emissions.rows(), crf.num_labels());

    double max_score = kNegInf;
    std::vector<double> scores;
    for_each_path(emissions.rows(), crf.num_labels(), [&](const std::vector<int>& labels) {
        const double s = path_score(emissions, crf, labels);
        scores.push_back(s);
        if (s > max_score) max_score = s;
    });
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - max_score);
    return max_score + std::log(sum);
}

double nll(const Eigen::MatrixXd& emissions, const CrfParams& crf, const std::vector<int>& gold) {
    check_gold(emissions, crf, gold);
    return log_partition(emissions, crf) - path_score(emissions, crf, gold);
}

NllGradients nll_gradients(const Eigen::MatrixXd& emissions, const CrfParams& crf,
                           const std::vector<int>& gold) {
    check_gold(emissions, crf, gold);
    const Eigen::Index length = emissions.rows();
    const int k = crf.num_labels();

    // Forward and backward log messages.
    Eigen::MatrixXd alpha(length, k);
    alpha.row(0) = (crf.start + emissions.row(0).transpose()).transpose();
    for (Eigen::Index t = 1; t < length; ++t) {
        for (int j = 0; j < k; ++j) {
            alpha(t, j) = log_sum_exp(alpha.row(t - 1).transpose() + crf.transitions.col(j)) +
                          emissions(t, j);
        }
    }
    Eigen::MatrixXd beta(length, k);
    beta.row(length - 1) = crf.end.transpose();
    for (Eigen::Index t = length - 2; t >= 0; --t) {
        for (int i = 0; i < k; ++i) {
            beta(t, i) = log_sum_exp(crf.transitions.row(i).transpose() +
                                     emissions.row(t + 1).transpose() +
                                     beta.row(t + 1).transpose());
        }
    }
    const double log_z = log_sum_exp((alpha.row(length - 1) + beta.row(length - 1)).transpose());

    NllGradients out;
    out.marginals = (alpha + beta).array() - log_z;
    out.marginals = out.marginals.array().exp();

    out.d_emissions = out.marginals;
    for (Eigen::Index t = 0; t < length; ++t) out.d_emissions(t, gold[t]) -= 1.0;

    out.d_transitions = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index t = 0; t + 1 < length; ++t) {
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                out.d_transitions(i, j) += std::exp(alpha(t, i) + crf.transitions(i, j) +
                                                    emissions(t + 1, j) + beta(t + 1, j) - log_z);
            }
        }
        out.d_transitions(gold[t], gold[t + 1]) -= 1.0;
    }

    out.d_start = out.marginals.row(0).transpose();
    out.d_start(gold.front()) -= 1.0;
    out.d_end = out.marginals.row(length - 1).transpose();
    out.d_end(gold.back()) -= 1.0;

    double gold_score = crf.start(gold.front()) + crf.end(gold.back());
    for (Eigen::Index t = 0; t < length; ++t) {
        gold_score += emissions(t, gold[t]);
        if (t > 0) gold_score += crf.transitions(gold[t - 1], gold[t]);
    }
    out.nll = log_z - gold_score;
    return out;
}

DecodedPath viterbi(const Eigen::MatrixXd& emissions, const CrfParams& crf) {
    check_instance(emissions, crf);
    const Eigen::Index length = emissions.rows();
    const int k = crf.num_labels();

    Eigen::MatrixXd delta(length, k);
    Eigen::MatrixXi parent(length, k);
    delta.row(0) = (crf.start + emissions.row(0).transpose()).transpose();
    parent.row(0).setConstant(-1);
    for (Eigen::Index t = 1; t < length; ++t) {
        for (int j = 0; j < k; ++j) {
            int best_i = 0;
            double best = delta(t - 1, 0) + crf.transitions(0, j);
            for (int i = 1; i < k; ++i) {
                const double s = delta(t - 1, i) + crf.transitions(i, j);
                if (s > best) {  // strict: ties keep the smallest index
                    best = s;
                    best_i = i;
                }
            }
            delta(t, j) = best + emissions(t, j);
            parent(t, j) = best_i;
        }
    }

    int last = 0;
    double best = delta(length - 1, 0) + crf.end(0);
    for (int j = 1; j < k; ++j) {
        const double s = delta(length - 1, j) + crf.end(j);
        if (s > best) {
            best = s;
            last = j;
        }
    }

    DecodedPath path;
    path.score = best;
    path.labels.assign(length, 0);
    path.labels[length - 1] = last;
    for (Eigen::Index t = length - 1; t > 0; --t) {
        path.labels[t - 1] = parent(t, path.labels[t]);
    }
    return path;
}

DecodedPath brute_force_best(const Eigen::MatrixXd& emissions, const CrfParams& crf) {
    check_instance(emissions, crf);
    check_brute_force_size(emissions.rows(), crf.num_labels());

    DecodedPath best;
    best.score = kNegInf;
    for_each_path(emissions.rows(), crf.num_labels(), [&](const std::vector<int>& labels) {
        const double s = path_score(emissions, crf, labels);
        // Enumeration is lexicographic, so strict improvement keeps the
        // lexicographically smallest sequence on exact ties.
        if (s > best.score) {
            best.score = s;
            best.labels = labels;
        }
    });
    return best;
}

void apply_iob_mask(CrfParams& crf) {
    constexpr double kMask = -1e4;
    const int k = crf.num_labels();
    if (k != kNumLabels) throw DataError("IOB mask requires the 19-label set");
    for (int i = 0; i < k; ++i) {
        const IOBLabel from = label_from_index(i);
        for (int j = 0; j < k; ++j) {
            const IOBLabel to = label_from_index(j);
            if (to.tag != IOBTag::I) continue;
            const bool legal = from.tag != IOBTag::O && from.cls == to.cls;
            if (!legal) crf.transitions(i, j) += kMask;
        }
    }
    for (int j = 0; j < k; ++j) {
        if (label_from_index(j).tag == IOBTag::I) crf.start(j) += kMask;
    }
}

}  // namespace medseq::crf
