#include <doctest.h>

#include <nlohmann/json.hpp>

#include "medseq/errors.hpp"
#include "medseq/evaluation.hpp"
#include "medseq/rng.hpp"

using namespace medseq;

namespace {

Annotation ann(EntityClass cls, std::size_t begin, std::size_t end) {
    Annotation a;
    a.cls = cls;
    a.fragments.push_back({begin, end});
    return a;
}

}  // namespace

TEST_SUITE_BEGIN("evaluation");

TEST_CASE("exact matches satisfy both modes") {
    const std::vector<Annotation> gold = {ann(EntityClass::Drug, 10, 20)};
    const std::vector<Annotation> pred = {ann(EntityClass::Drug, 10, 20)};
    for (MatchMode mode : {MatchMode::Strict, MatchMode::Lenient}) {
        const ClassCounts c = match_spans(gold, pred, mode);
        CHECK(c.tp == 1);
        CHECK(c.fp == 0);
        CHECK(c.fn == 0);
    }
}

TEST_CASE("partial overlap counts only leniently") {
    const std::vector<Annotation> gold = {ann(EntityClass::Drug, 10, 20)};
    const std::vector<Annotation> pred = {ann(EntityClass::Drug, 12, 18)};
    const ClassCounts strict = match_spans(gold, pred, MatchMode::Strict);
    CHECK(strict.tp == 0);
    CHECK(strict.fp == 1);
    CHECK(strict.fn == 1);
    const ClassCounts lenient = match_spans(gold, pred, MatchMode::Lenient);
    CHECK(lenient.tp == 1);
    CHECK(lenient.fp == 0);
    CHECK(lenient.fn == 0);
}

TEST_CASE("class disagreement never matches") {
    // Same span, different class: the Drug tally sees a miss, the Reason
    // tally sees a spurious prediction.
    const ClassCounts drug = match_spans({ann(EntityClass::Drug, 10, 20)}, {}, MatchMode::Lenient);
    CHECK(drug.tp == 0);
    CHECK(drug.fn == 1);
    const ClassCounts reason =
        match_spans({}, {ann(EntityClass::Reason, 10, 20)}, MatchMode::Lenient);
    CHECK(reason.tp == 0);
    CHECK(reason.fp == 1);
}

TEST_CASE("strict mode requires identical fragment lists") {
    Annotation gold = ann(EntityClass::Frequency, 0, 3);
    gold.fragments.push_back({9, 14});
    Annotation pred_union = ann(EntityClass::Frequency, 0, 14);
    CHECK(match_spans({gold}, {pred_union}, MatchMode::Strict).tp == 0);
    CHECK(match_spans({gold}, {pred_union}, MatchMode::Lenient).tp == 1);
    CHECK(match_spans({gold}, {gold}, MatchMode::Strict).tp == 1);
}

TEST_CASE("greedy matching is one-to-one") {
    const std::vector<Annotation> gold = {ann(EntityClass::Drug, 0, 10),
                                          ann(EntityClass::Drug, 12, 20)};
    const std::vector<Annotation> pred = {ann(EntityClass::Drug, 0, 20)};
    const ClassCounts c = match_spans(gold, pred, MatchMode::Lenient);
    CHECK(c.tp == 1);  // the single prediction pairs once
    CHECK(c.fp == 0);
    CHECK(c.fn == 1);
}

TEST_CASE("bipartite matcher recovers the wasteful greedy case") {
    const std::vector<Annotation> gold = {ann(EntityClass::Drug, 0, 100),
                                          ann(EntityClass::Drug, 5, 10)};
    const std::vector<Annotation> pred = {ann(EntityClass::Drug, 6, 8),
                                          ann(EntityClass::Drug, 50, 60)};
    CHECK(match_spans(gold, pred, MatchMode::Lenient, Matcher::GreedyFirstOverlap).tp == 1);
    CHECK(match_spans(gold, pred, MatchMode::Lenient, Matcher::MaximumBipartite).tp == 2);
}

TEST_CASE("score arithmetic on the tp=2 fp=1 fn=1 fixture") {
    const std::vector<ClassCounts> counts = {{EntityClass::Drug, 2, 1, 1}};
    const EvalReport report = score(counts, MatchMode::Lenient);
    const ClassScore& drug = report.per_class[static_cast<int>(EntityClass::Drug)];
    CHECK(drug.precision == doctest::Approx(66.67).epsilon(1e-4));
    CHECK(drug.recall == doctest::Approx(66.67).epsilon(1e-4));
    CHECK(drug.f1 == doctest::Approx(66.67).epsilon(1e-4));
}

TEST_CASE("two-class micro and per-class scores") {
    const std::vector<ClassCounts> counts = {{EntityClass::Reason, 1, 0, 1},
                                             {EntityClass::ADE, 3, 1, 0}};
    const EvalReport report = score(counts, MatchMode::Lenient);
    CHECK(report.micro.tp == 4);
    CHECK(report.micro.fp == 1);
    CHECK(report.micro.fn == 1);
    CHECK(report.micro.precision == doctest::Approx(80.0).epsilon(1e-9));
    CHECK(report.micro.recall == doctest::Approx(80.0).epsilon(1e-9));
    CHECK(report.micro.f1 == doctest::Approx(80.0).epsilon(1e-9));
    CHECK(report.per_class[static_cast<int>(EntityClass::Reason)].f1 ==
          doctest::Approx(66.67).epsilon(1e-4));
    CHECK(report.per_class[static_cast<int>(EntityClass::ADE)].f1 ==
          doctest::Approx(85.71).epsilon(1e-4));
    // The fixed nine-class macro counts the seven absent classes as zero.
    CHECK(report.macro.f1 ==
          doctest::Approx((66.666666 + 85.714285) / 9.0).epsilon(1e-4));
}

TEST_CASE("no predictions scores zero by convention") {
    const std::vector<ClassCounts> counts = {{EntityClass::Drug, 0, 0, 5}};
    const EvalReport report = score(counts, MatchMode::Strict);
    const ClassScore& drug = report.per_class[static_cast<int>(EntityClass::Drug)];
    CHECK(drug.precision == 0.0);
    CHECK(drug.recall == 0.0);
    CHECK(drug.f1 == 0.0);
}

TEST_CASE("micro with one active class equals that class") {
    const std::vector<ClassCounts> counts = {{EntityClass::Route, 3, 2, 4}};
    const EvalReport report = score(counts, MatchMode::Lenient);
    const ClassScore& route = report.per_class[static_cast<int>(EntityClass::Route)];
    CHECK(report.micro.precision == route.precision);
    CHECK(report.micro.recall == route.recall);
    CHECK(report.micro.f1 == route.f1);
}

TEST_CASE("token confusion collapses IOB to classes") {
    const IOBLabel b_drug{IOBTag::B, EntityClass::Drug};
    const IOBLabel o = IOBLabel::outside();
    SUBCASE("diagonal counts") {
        const TokenConfusion c = token_confusion({b_drug, o}, {b_drug, o});
        CHECK(c.cells[4][4] == 1);  // Drug is axis index 4
        CHECK(c.cells[9][9] == 1);  // O is last
        CHECK(c.total() == 2);
    }
    SUBCASE("ADE predicted as Reason fills that exact cell") {
        const TokenConfusion c =
            token_confusion({{IOBTag::B, EntityClass::ADE}}, {{IOBTag::B, EntityClass::Reason}});
        CHECK(c.cells[8][7] == 1);  // row ADE, column Reason
    }
    SUBCASE("missed Reason tokens collapse to the O column") {
        const TokenConfusion c = token_confusion(
            {{IOBTag::B, EntityClass::Reason}, {IOBTag::I, EntityClass::Reason}}, {o, o});
        CHECK(c.cells[7][9] == 2);
    }
    SUBCASE("length mismatch is an error") {
        CHECK_THROWS_AS(token_confusion({o}, {o, o}), DataError);
    }
}

TEST_CASE("row sums depend only on the gold side") {
    Rng rng(3);
    for (int iter = 0; iter < 20; ++iter) {
        const int n = 1 + static_cast<int>(rng.below(30));
        std::vector<IOBLabel> gold, pred_a, pred_b;
        for (int i = 0; i < n; ++i) {
            gold.push_back(label_from_index(static_cast<int>(rng.below(kNumLabels))));
            pred_a.push_back(label_from_index(static_cast<int>(rng.below(kNumLabels))));
            pred_b.push_back(label_from_index(static_cast<int>(rng.below(kNumLabels))));
        }
        const TokenConfusion a = token_confusion(gold, pred_a);
        const TokenConfusion b = token_confusion(gold, pred_b);
        CHECK(a.total() == n);
        for (int r = 0; r <= kNumClasses; ++r) {
            long sum_a = 0, sum_b = 0;
            for (int c = 0; c <= kNumClasses; ++c) {
                sum_a += a.cells[r][c];
                sum_b += b.cells[r][c];
            }
            CHECK(sum_a == sum_b);
        }
    }
}

namespace {

struct FuzzCase {
    std::vector<ClassCounts> strict;
    std::vector<ClassCounts> lenient;
};

FuzzCase fuzz_counts(Rng& rng, Matcher matcher) {
    FuzzCase out;
    for (int doc = 0; doc < 3; ++doc) {
        for (EntityClass cls : kAllClasses) {
            std::vector<Annotation> gold, pred;
            const int n_gold = static_cast<int>(rng.below(4));
            std::size_t cursor = rng.below(5);
            for (int i = 0; i < n_gold; ++i) {
                const std::size_t len = 1 + rng.below(6);
                gold.push_back(ann(cls, cursor, cursor + len));
                cursor += len + 1 + rng.below(4);
            }
            // Perturbed copies, dropped golds, random spurious spans.
            for (const auto& g : gold) {
                if (rng.bernoulli(0.25)) continue;
                const long jitter_begin = static_cast<long>(rng.below(5)) - 2;
                const long jitter_end = static_cast<long>(rng.below(5)) - 2;
                const long begin =
                    std::max<long>(0, static_cast<long>(g.start()) + jitter_begin);
                const long end =
                    std::max<long>(begin + 1, static_cast<long>(g.end()) + jitter_end);
                pred.push_back(ann(cls, static_cast<std::size_t>(begin),
                                   static_cast<std::size_t>(end)));
            }
            if (rng.bernoulli(0.3)) {
                const std::size_t begin = rng.below(40);
                pred.push_back(ann(cls, begin, begin + 1 + rng.below(5)));
            }
            ClassCounts sc = match_spans(gold, pred, MatchMode::Strict, matcher);
            sc.cls = cls;
            out.strict.push_back(sc);
            ClassCounts lc = match_spans(gold, pred, MatchMode::Lenient, matcher);
            lc.cls = cls;
            out.lenient.push_back(lc);
        }
    }
    return out;
}

}  // namespace

TEST_CASE("lenient dominates strict on randomized perturbations") {
    Rng rng(17);
    for (int iter = 0; iter < 300; ++iter) {
        const FuzzCase c = fuzz_counts(rng, Matcher::GreedyFirstOverlap);
        const EvalReport strict = score(c.strict, MatchMode::Strict);
        const EvalReport lenient = score(c.lenient, MatchMode::Lenient);
        for (int i = 0; i < kNumClasses; ++i) {
            CHECK(lenient.per_class[i].tp >= strict.per_class[i].tp);
            CHECK(lenient.per_class[i].precision >= strict.per_class[i].precision - 1e-9);
            CHECK(lenient.per_class[i].recall >= strict.per_class[i].recall - 1e-9);
            CHECK(lenient.per_class[i].f1 >= strict.per_class[i].f1 - 1e-9);
            // identical denominators
            CHECK(lenient.per_class[i].tp + lenient.per_class[i].fp ==
                  strict.per_class[i].tp + strict.per_class[i].fp);
            CHECK(lenient.per_class[i].tp + lenient.per_class[i].fn ==
                  strict.per_class[i].tp + strict.per_class[i].fn);
        }
        CHECK(lenient.micro.f1 >= strict.micro.f1 - 1e-9);
    }
}

TEST_CASE("matching is one-to-one and swap exchanges precision with recall") {
    Rng rng(19);
    for (int iter = 0; iter < 200; ++iter) {
        const EntityClass cls = EntityClass::Dosage;
        std::vector<Annotation> gold, pred;
        for (int i = 0; i < static_cast<int>(rng.below(5)); ++i) {
            const std::size_t begin = rng.below(30);
            gold.push_back(ann(cls, begin, begin + 1 + rng.below(8)));
        }
        for (int i = 0; i < static_cast<int>(rng.below(5)); ++i) {
            const std::size_t begin = rng.below(30);
            pred.push_back(ann(cls, begin, begin + 1 + rng.below(8)));
        }
        for (MatchMode mode : {MatchMode::Strict, MatchMode::Lenient}) {
            const ClassCounts forward = match_spans(gold, pred, mode);
            CHECK(forward.tp <= static_cast<long>(std::min(gold.size(), pred.size())));
            const ClassCounts swapped = match_spans(pred, gold, mode);
            CHECK(forward.tp == swapped.tp);
            CHECK(forward.fp == swapped.fn);
            CHECK(forward.fn == swapped.fp);
        }
    }
}

TEST_CASE("bipartite matching never finds fewer pairs than greedy") {
    Rng rng(23);
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<Annotation> gold, pred;
        for (int i = 0; i < static_cast<int>(rng.below(6)); ++i) {
            const std::size_t begin = rng.below(25);
            gold.push_back(ann(EntityClass::Drug, begin, begin + 1 + rng.below(10)));
        }
        for (int i = 0; i < static_cast<int>(rng.below(6)); ++i) {
            const std::size_t begin = rng.below(25);
            pred.push_back(ann(EntityClass::Drug, begin, begin + 1 + rng.below(10)));
        }
        const long greedy =
            match_spans(gold, pred, MatchMode::Lenient, Matcher::GreedyFirstOverlap).tp;
        const long bipartite =
            match_spans(gold, pred, MatchMode::Lenient, Matcher::MaximumBipartite).tp;
        CHECK(bipartite >= greedy);
    }
}

TEST_CASE("text report lists classes by descending F1 with overall rows last") {
    std::vector<ClassCounts> counts = {{EntityClass::ADE, 1, 3, 3},
                                       {EntityClass::Drug, 9, 1, 1}};
    const EvalReport report = score(counts, MatchMode::Lenient);
    const std::string text = render_report_text(report, TokenConfusion{});
    const auto drug_pos = text.find("Drug");
    const auto ade_pos = text.find("ADE");
    const auto micro_pos = text.find("Overall (micro)");
    const auto macro_pos = text.find("Overall (macro)");
    REQUIRE(drug_pos != std::string::npos);
    CHECK(drug_pos < ade_pos);
    CHECK(ade_pos < micro_pos);
    CHECK(micro_pos < macro_pos);
}

TEST_CASE("empty report still renders all nine classes") {
    const EvalReport report = score({}, MatchMode::Strict);
    const std::string text = render_report_text(report, TokenConfusion{});
    for (EntityClass cls : kAllClasses) {
        CHECK(text.find(to_string(cls)) != std::string::npos);
    }
}

TEST_CASE("machine-readable report re-parses to the same values") {
    std::vector<ClassCounts> counts = {{EntityClass::Reason, 1, 0, 1},
                                       {EntityClass::ADE, 3, 1, 0}};
    TokenConfusion confusion;
    confusion.cells[7][9] = 2;
    const EvalReport report = score(counts, MatchMode::Lenient);
    const auto j = nlohmann::json::parse(render_report_json(report, confusion));
    CHECK(j["mode"] == "lenient");
    REQUIRE(j["per_class"].size() == 9);
    CHECK(j["micro"]["f1"].get<double>() == doctest::Approx(80.0));
    CHECK(j["confusion"][7][9].get<long>() == 2);
    // Axis order matches the confusion layout: Reason sits at index 7.
    CHECK(j["per_class"][7]["class"] == "Reason");
    CHECK(j["per_class"][7]["f1"].get<double>() == doctest::Approx(66.67));
    CHECK(j["per_class"][8]["class"] == "ADE");
    CHECK(j["per_class"][8]["f1"].get<double>() == doctest::Approx(85.71));
}

TEST_SUITE_END();
