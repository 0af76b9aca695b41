#include <doctest.h>

#include <cmath>

#include "medseq/corpus.hpp"
#include "medseq/crf.hpp"
#include "medseq/errors.hpp"
#include "medseq/rng.hpp"

using namespace medseq;

namespace {

struct RandomInstance {
    Eigen::MatrixXd emissions;
    crf::CrfParams params;
};

RandomInstance random_instance(Rng& rng, int max_len = 5, int max_k = 6) {
    RandomInstance inst;
    const int length = 1 + static_cast<int>(rng.below(max_len));
    const int k = 2 + static_cast<int>(rng.below(max_k - 1));
    inst.emissions.resize(length, k);
    inst.params = crf::CrfParams::zeros(k);
    for (int t = 0; t < length; ++t) {
        for (int j = 0; j < k; ++j) inst.emissions(t, j) = rng.uniform(-1.0, 1.0);
    }
    for (int i = 0; i < k; ++i) {
        inst.params.start(i) = rng.uniform(-1.0, 1.0);
        inst.params.end(i) = rng.uniform(-1.0, 1.0);
        for (int j = 0; j < k; ++j) inst.params.transitions(i, j) = rng.uniform(-1.0, 1.0);
    }
    return inst;
}

std::vector<int> random_gold(Rng& rng, const RandomInstance& inst) {
    std::vector<int> gold(inst.emissions.rows());
    for (auto& y : gold) y = static_cast<int>(rng.below(inst.emissions.cols()));
    return gold;
}

}  // namespace

TEST_SUITE_BEGIN("crf");

TEST_CASE("log partition of the all-zero model counts the paths") {
    const Eigen::MatrixXd emissions = Eigen::MatrixXd::Zero(2, 3);
    const crf::CrfParams params = crf::CrfParams::zeros(3);
    CHECK(crf::log_partition(emissions, params) == doctest::Approx(std::log(9.0)).epsilon(1e-12));
    CHECK(crf::brute_force_log_partition(emissions, params) ==
          doctest::Approx(std::log(9.0)).epsilon(1e-12));
}

TEST_CASE("log partition, single position") {
    Eigen::MatrixXd emissions(1, 2);
    emissions << 1.0, 2.0;
    const crf::CrfParams params = crf::CrfParams::zeros(2);
    const double expected = std::log(std::exp(1.0) + std::exp(2.0));
    CHECK(crf::log_partition(emissions, params) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(2.31326).epsilon(1e-5));
}

TEST_CASE("log partition matches brute force on random instances") {
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const RandomInstance inst = random_instance(rng);
        CHECK(std::abs(crf::log_partition(inst.emissions, inst.params) -
                       crf::brute_force_log_partition(inst.emissions, inst.params)) < 1e-8);
    }
}

TEST_CASE("CRF rejects empty sequences") {
    const Eigen::MatrixXd empty(0, 3);
    const crf::CrfParams params = crf::CrfParams::zeros(3);
    CHECK_THROWS_AS(crf::log_partition(empty, params), DataError);
    CHECK_THROWS_AS(crf::viterbi(empty, params), DataError);
}

TEST_CASE("brute force refuses oversized instances") {
    const Eigen::MatrixXd emissions = Eigen::MatrixXd::Zero(8, 19);  // 19^8 >> 1e6
    const crf::CrfParams params = crf::CrfParams::zeros(19);
    CHECK_THROWS_AS(crf::brute_force_log_partition(emissions, params), SizeError);
    CHECK_THROWS_AS(crf::brute_force_best(emissions, params), SizeError);
}

TEST_CASE("nll of the uniform model is log of the path count") {
    const Eigen::MatrixXd emissions = Eigen::MatrixXd::Zero(2, 3);
    const crf::CrfParams params = crf::CrfParams::zeros(3);
    CHECK(crf::nll(emissions, params, {0, 2}) ==
          doctest::Approx(std::log(9.0)).epsilon(1e-12));
}

TEST_CASE("nll saturates to zero when the gold emissions dominate") {
    Eigen::MatrixXd emissions = Eigen::MatrixXd::Zero(3, 4);
    const std::vector<int> gold = {1, 3, 0};
    for (std::size_t t = 0; t < gold.size(); ++t) emissions(t, gold[t]) = 100.0;
    const crf::CrfParams params = crf::CrfParams::zeros(4);
    CHECK(crf::nll(emissions, params, gold) < 1e-8);
}

TEST_CASE("nll is non-negative on random instances") {
    Rng rng(6);
    for (int i = 0; i < 1000; ++i) {
        const RandomInstance inst = random_instance(rng);
        const std::vector<int> gold = random_gold(rng, inst);
        CHECK(crf::nll(inst.emissions, inst.params, gold) >= -1e-12);
    }
}

TEST_CASE("nll rejects out-of-range labels") {
    const Eigen::MatrixXd emissions = Eigen::MatrixXd::Zero(1, 3);
    const crf::CrfParams params = crf::CrfParams::zeros(3);
    CHECK_THROWS_AS(crf::nll(emissions, params, {3}), DataError);
    CHECK_THROWS_AS(crf::nll(emissions, params, {-1}), DataError);
}

TEST_CASE("gradient marginals are normalized") {
    Rng rng(7);
    for (int i = 0; i < 50; ++i) {
        const RandomInstance inst = random_instance(rng);
        const std::vector<int> gold = random_gold(rng, inst);
        const crf::NllGradients g = crf::nll_gradients(inst.emissions, inst.params, gold);
        for (Eigen::Index t = 0; t < g.marginals.rows(); ++t) {
            CHECK(g.marginals.row(t).sum() == doctest::Approx(1.0).epsilon(1e-10));
            CHECK(g.marginals.row(t).minCoeff() >= 0.0);
            CHECK(g.marginals.row(t).maxCoeff() <= 1.0);
        }
        CHECK(g.nll == doctest::Approx(crf::nll(inst.emissions, inst.params, gold)).epsilon(1e-10));
    }
}

TEST_CASE("gradient of the uniform single-position model") {
    const Eigen::MatrixXd emissions = Eigen::MatrixXd::Zero(1, 2);
    const crf::CrfParams params = crf::CrfParams::zeros(2);
    const crf::NllGradients g = crf::nll_gradients(emissions, params, {0});
    CHECK(g.d_emissions(0, 0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(g.d_emissions(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("analytic nll gradients match central differences") {
    Rng rng(8);
    const double eps = 1e-6;
    for (int i = 0; i < 25; ++i) {
        RandomInstance inst = random_instance(rng, 4, 4);
        const std::vector<int> gold = random_gold(rng, inst);
        const crf::NllGradients g = crf::nll_gradients(inst.emissions, inst.params, gold);

        const auto check_coord = [&](double* slot, double analytic) {
            const double original = *slot;
            *slot = original + eps;
            const double up = crf::nll(inst.emissions, inst.params, gold);
            *slot = original - eps;
            const double down = crf::nll(inst.emissions, inst.params, gold);
            *slot = original;
            const double numeric = (up - down) / (2.0 * eps);
            const double err = std::abs(analytic - numeric) /
                               std::max(1e-12, std::abs(analytic) + std::abs(numeric));
            CHECK(err < 1e-6);
        };
        for (Eigen::Index idx = 0; idx < inst.emissions.size(); ++idx) {
            check_coord(inst.emissions.data() + idx, g.d_emissions.data()[idx]);
        }
        for (Eigen::Index idx = 0; idx < inst.params.transitions.size(); ++idx) {
            check_coord(inst.params.transitions.data() + idx, g.d_transitions.data()[idx]);
        }
        for (Eigen::Index idx = 0; idx < inst.params.start.size(); ++idx) {
            check_coord(inst.params.start.data() + idx, g.d_start(idx));
            check_coord(inst.params.end.data() + idx, g.d_end(idx));
        }
    }
}

TEST_CASE("viterbi reduces to per-token argmax without transitions") {
    Eigen::MatrixXd emissions(3, 4);
    emissions << 0.1, 0.9, 0.2, 0.3,
                 0.8, 0.1, 0.0, 0.4,
                 0.0, 0.2, 0.1, 0.7;
    const crf::CrfParams params = crf::CrfParams::zeros(4);
    const crf::DecodedPath path = crf::viterbi(emissions, params);
    CHECK(path.labels == std::vector<int>{1, 0, 3});
    CHECK(path.score == doctest::Approx(0.9 + 0.8 + 0.7).epsilon(1e-12));
}

TEST_CASE("viterbi with a single label returns the only path") {
    const Eigen::MatrixXd emissions = Eigen::MatrixXd::Ones(4, 1);
    const crf::CrfParams params = crf::CrfParams::zeros(1);
    CHECK(crf::viterbi(emissions, params).labels == std::vector<int>(4, 0));
}

TEST_CASE("viterbi agrees with the exhaustive oracle") {
    Rng rng(9);
    for (int i = 0; i < 500; ++i) {
        const RandomInstance inst = random_instance(rng);
        const crf::DecodedPath fast = crf::viterbi(inst.emissions, inst.params);
        const crf::DecodedPath brute = crf::brute_force_best(inst.emissions, inst.params);
        CHECK(std::abs(fast.score - brute.score) < 1e-9);
        CHECK(fast.score ==
              doctest::Approx(crf::path_score(inst.emissions, inst.params, fast.labels))
                  .epsilon(1e-9));
    }
}

TEST_CASE("exact ties break toward the smaller labels") {
    const Eigen::MatrixXd emissions = Eigen::MatrixXd::Zero(1, 2);
    const crf::CrfParams params = crf::CrfParams::zeros(2);
    CHECK(crf::viterbi(emissions, params).labels == std::vector<int>{0});
    CHECK(crf::brute_force_best(emissions, params).labels == std::vector<int>{0});

    const Eigen::MatrixXd two = Eigen::MatrixXd::Zero(2, 2);
    CHECK(crf::brute_force_best(two, crf::CrfParams::zeros(2)).labels ==
          std::vector<int>{0, 0});
}

TEST_CASE("column shift invariance") {
    Rng rng(10);
    for (int i = 0; i < 100; ++i) {
        const RandomInstance inst = random_instance(rng);
        const std::vector<int> gold = random_gold(rng, inst);
        const double c = rng.uniform(-3.0, 3.0);
        const Eigen::Index pos = static_cast<Eigen::Index>(rng.below(inst.emissions.rows()));

        Eigen::MatrixXd shifted = inst.emissions;
        shifted.row(pos).array() += c;

        CHECK(crf::log_partition(shifted, inst.params) ==
              doctest::Approx(crf::log_partition(inst.emissions, inst.params) + c).epsilon(1e-9));
        CHECK(crf::nll(shifted, inst.params, gold) ==
              doctest::Approx(crf::nll(inst.emissions, inst.params, gold)).epsilon(1e-9));
        CHECK(crf::viterbi(shifted, inst.params).labels ==
              crf::viterbi(inst.emissions, inst.params).labels);
    }
}

TEST_CASE("log partition dominates every path score") {
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        const RandomInstance inst = random_instance(rng);
        const double log_z = crf::log_partition(inst.emissions, inst.params);
        CHECK(log_z >= crf::viterbi(inst.emissions, inst.params).score - 1e-12);
        const std::vector<int> gold = random_gold(rng, inst);
        CHECK(log_z >= crf::path_score(inst.emissions, inst.params, gold) - 1e-12);
    }
}

TEST_CASE("nll is convex along segments") {
    Rng rng(12);
    for (int i = 0; i < 100; ++i) {
        const int length = 1 + static_cast<int>(rng.below(4));
        const int k = 2 + static_cast<int>(rng.below(4));
        const auto draw = [&](int rows, int cols) {
            Eigen::MatrixXd m(rows, cols);
            for (int r = 0; r < rows; ++r) {
                for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-2.0, 2.0);
            }
            return m;
        };
        const Eigen::MatrixXd e1 = draw(length, k), e2 = draw(length, k);
        crf::CrfParams p1 = crf::CrfParams::zeros(k), p2 = crf::CrfParams::zeros(k);
        p1.transitions = draw(k, k);
        p2.transitions = draw(k, k);
        crf::CrfParams mid = crf::CrfParams::zeros(k);
        mid.transitions = 0.5 * (p1.transitions + p2.transitions);

        std::vector<int> gold(length);
        for (auto& y : gold) y = static_cast<int>(rng.below(k));

        const double lhs = crf::nll(0.5 * (e1 + e2), mid, gold);
        const double rhs = 0.5 * (crf::nll(e1, p1, gold) + crf::nll(e2, p2, gold));
        CHECK(lhs <= rhs + 1e-9);
    }
}

TEST_CASE("IOB transition mask forbids illegal decodes") {
    crf::CrfParams params = crf::CrfParams::zeros(kNumLabels);
    crf::apply_iob_mask(params);
    Rng rng(13);
    for (int i = 0; i < 50; ++i) {
        const int length = 1 + static_cast<int>(rng.below(6));
        Eigen::MatrixXd emissions(length, kNumLabels);
        for (int t = 0; t < length; ++t) {
            for (int j = 0; j < kNumLabels; ++j) emissions(t, j) = rng.uniform(-2.0, 2.0);
        }
        const crf::DecodedPath path = crf::viterbi(emissions, params);
        IOBLabel previous = IOBLabel::outside();
        for (std::size_t t = 0; t < path.labels.size(); ++t) {
            const IOBLabel label = label_from_index(path.labels[t]);
            if (label.tag == IOBTag::I) {
                REQUIRE(t > 0);
                CHECK(previous.tag != IOBTag::O);
                CHECK(previous.cls == label.cls);
            }
            previous = label;
        }
    }
}

TEST_SUITE_END();
