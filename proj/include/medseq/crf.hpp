#pragma once

#include <Eigen/Core>
#include <vector>

namespace medseq::crf {

/// Linear-chain CRF parameters. transitions(i, j) scores label j following
/// label i; explicit start/end vectors instead of a padded matrix.
struct CrfParams {
    Eigen::MatrixXd transitions;  // K x K
    Eigen::VectorXd start;        // K
    Eigen::VectorXd end;          // K

    static CrfParams zeros(int num_labels);
    int num_labels() const { return static_cast<int>(start.size()); }
};

struct DecodedPath {
    std::vector<int> labels;
    double score = 0.0;  // unnormalized path score
};

/// start[y1] + sum emissions[t][yt] + sum transitions[y(t-1)][yt] + end[yL].
double path_score(const Eigen::MatrixXd& emissions, const CrfParams& crf,
                  const std::vector<int>& labels);

/// Log of the sum over all K^L paths of exp(path score); forward recursion in
/// log space. L must be >= 1.
double log_partition(const Eigen::MatrixXd& emissions, const CrfParams& crf);

/// Exhaustive oracle for log_partition; requires K^L <= 10^6.
double brute_force_log_partition(const Eigen::MatrixXd& emissions, const CrfParams& crf);

/// Negative log-likelihood of the gold path: log_partition - gold score.
double nll(const Eigen::MatrixXd& emissions, const CrfParams& crf,
           const std::vector<int>& gold);

struct NllGradients {
    double nll = 0.0;
    Eigen::MatrixXd d_emissions;   // L x K
    Eigen::MatrixXd d_transitions; // K x K
    Eigen::VectorXd d_start;       // K
    Eigen::VectorXd d_end;         // K
    Eigen::MatrixXd marginals;     // L x K, rows sum to 1
};

/// Gradients via forward-backward: expected counts minus observed counts.
NllGradients nll_gradients(const Eigen::MatrixXd& emissions, const CrfParams& crf,
                           const std::vector<int>& gold);

/// Max-score path; ties broken toward the smallest label index.
DecodedPath viterbi(const Eigen::MatrixXd& emissions, const CrfParams& crf);

/// Exhaustive oracle for viterbi; ties broken toward the lexicographically
/// smallest label sequence. Requires K^L <= 10^6.
DecodedPath brute_force_best(const Eigen::MatrixXd& emissions, const CrfParams& crf);

/// Adds -1e4 to transitions that are illegal under the IOB scheme
/// (O -> I-X, B-X/I-X -> I-Y with X != Y, start -> I-X). Opt-in; the plain
/// model leaves transitions unconstrained.
void apply_iob_mask(CrfParams& crf);

}  // namespace medseq::crf
