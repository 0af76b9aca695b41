#include "medseq/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include <nlohmann/json.hpp>

#include "medseq/errors.hpp"

namespace medseq {

namespace {

bool fragments_overlap(const std::vector<Fragment>& a, const std::vector<Fragment>& b) {
    for (const auto& fa : a) {
        for (const auto& fb : b) {
            if (std::max(fa.begin, fb.begin) < std::min(fa.end, fb.end)) return true;
        }
    }
    return false;
}

bool matches(const Annotation& gold, const Annotation& pred, MatchMode mode) {
    if (mode == MatchMode::Strict) return gold.fragments == pred.fragments;
    return fragments_overlap(gold.fragments, pred.fragments);
}

void sort_by_start(std::vector<Annotation>& annotations) {
    std::sort(annotations.begin(), annotations.end(), [](const Annotation& a, const Annotation& b) {
        return a.start() != b.start() ? a.start() < b.start() : a.end() < b.end();
    });
}

// Kuhn's augmenting-path maximum bipartite matching.
long bipartite_match_count(const std::vector<Annotation>& gold,
                           const std::vector<Annotation>& pred, MatchMode mode) {
    const std::size_t n = gold.size();
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t g = 0; g < n; ++g) {
        for (std::size_t p = 0; p < pred.size(); ++p) {
            if (matches(gold[g], pred[p], mode)) adj[g].push_back(p);
        }
    }
    std::vector<long> owner(pred.size(), -1);
    std::vector<bool> visited;
    const std::function<bool(std::size_t)> try_assign = [&](std::size_t g) {
        for (std::size_t p : adj[g]) {
            if (visited[p]) continue;
            visited[p] = true;
            if (owner[p] < 0 || try_assign(static_cast<std::size_t>(owner[p]))) {
                owner[p] = static_cast<long>(g);
                return true;
            }
        }
        return false;
    };
    long matched = 0;
    for (std::size_t g = 0; g < n; ++g) {
        visited.assign(pred.size(), false);
        if (try_assign(g)) ++matched;
    }
    return matched;
}

double percent(long num, long den) {
    return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

ClassScore make_score(EntityClass cls, long tp, long fp, long fn) {
    ClassScore s;
    s.cls = cls;
    s.tp = tp;
    s.fp = fp;
    s.fn = fn;
    s.precision = percent(tp, tp + fp);
    s.recall = percent(tp, tp + fn);
    s.f1 = (s.precision + s.recall) == 0.0
               ? 0.0
               : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

double round2(double v) {
    return std::round(v * 100.0) / 100.0;
}

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

const std::array<EntityClass, kNumClasses> kConfusionOrder = {
    EntityClass::Strength, EntityClass::Frequency, EntityClass::Form,
    EntityClass::Route,    EntityClass::Drug,      EntityClass::Dosage,
    EntityClass::Duration, EntityClass::Reason,    EntityClass::ADE,
};

int confusion_index(const IOBLabel& label) {
    if (label.is_outside()) return kNumClasses;  // O is the last axis entry
    for (int i = 0; i < kNumClasses; ++i) {
        if (kConfusionOrder[i] == label.cls) return i;
    }
    return kNumClasses;
}

ClassCounts match_spans(std::vector<Annotation> gold, std::vector<Annotation> pred,
                        MatchMode mode, Matcher matcher) {
    ClassCounts counts;
    if (!gold.empty()) counts.cls = gold.front().cls;
    else if (!pred.empty()) counts.cls = pred.front().cls;

    sort_by_start(gold);
    sort_by_start(pred);

    long tp = 0;
    if (matcher == Matcher::MaximumBipartite) {
        tp = bipartite_match_count(gold, pred, mode);
    } else {
        std::vector<bool> used(pred.size(), false);
        for (const auto& g : gold) {
            for (std::size_t p = 0; p < pred.size(); ++p) {
                if (used[p] || !matches(g, pred[p], mode)) continue;
                used[p] = true;
                ++tp;
                break;
            }
        }
    }
    counts.tp = tp;
    counts.fp = static_cast<long>(pred.size()) - tp;
    counts.fn = static_cast<long>(gold.size()) - tp;
    return counts;
}

EvalReport score(const std::vector<ClassCounts>& counts, MatchMode mode) {
    std::array<long, kNumClasses> tp{}, fp{}, fn{};
    for (const auto& c : counts) {
        const int idx = static_cast<int>(c.cls);
        tp[idx] += c.tp;
        fp[idx] += c.fp;
        fn[idx] += c.fn;
    }

    EvalReport report;
    report.mode = mode;
    long pooled_tp = 0, pooled_fp = 0, pooled_fn = 0;
    double macro_p = 0.0, macro_r = 0.0, macro_f = 0.0;
    for (int i = 0; i < kNumClasses; ++i) {
        report.per_class[i] = make_score(static_cast<EntityClass>(i), tp[i], fp[i], fn[i]);
        pooled_tp += tp[i];
        pooled_fp += fp[i];
        pooled_fn += fn[i];
        macro_p += report.per_class[i].precision;
        macro_r += report.per_class[i].recall;
        macro_f += report.per_class[i].f1;
    }
    report.micro = make_score(EntityClass::Drug, pooled_tp, pooled_fp, pooled_fn);
    report.macro.precision = macro_p / kNumClasses;
    report.macro.recall = macro_r / kNumClasses;
    report.macro.f1 = macro_f / kNumClasses;
    report.macro.tp = pooled_tp;
    report.macro.fp = pooled_fp;
    report.macro.fn = pooled_fn;
    return report;
}

void TokenConfusion::add(const std::vector<IOBLabel>& gold, const std::vector<IOBLabel>& pred) {
    if (gold.size() != pred.size()) {
        throw DataError("token confusion: label sequences differ in length");
    }
    for (std::size_t t = 0; t < gold.size(); ++t) {
        ++cells[confusion_index(gold[t])][confusion_index(pred[t])];
    }
}

long TokenConfusion::total() const {
    long sum = 0;
    for (const auto& row : cells) {
        for (long v : row) sum += v;
    }
    return sum;
}

TokenConfusion token_confusion(const std::vector<IOBLabel>& gold,
                               const std::vector<IOBLabel>& pred) {
    TokenConfusion confusion;
    confusion.add(gold, pred);
    return confusion;
}

std::string render_report_text(const EvalReport& report, const TokenConfusion& confusion) {
    std::array<ClassScore, kNumClasses> rows = report.per_class;
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ClassScore& a, const ClassScore& b) { return a.f1 > b.f1; });

    std::string out;
    out += report.mode == MatchMode::Lenient ? "Mode: lenient\n" : "Mode: strict\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-16s %10s %10s %10s %7s %7s %7s\n", "Entity type",
                  "Precision", "Recall", "F1-score", "tp", "fp", "fn");
    out += line;
    const auto emit = [&](const std::string& name, const ClassScore& s, bool with_counts) {
        if (with_counts) {
            std::snprintf(line, sizeof line, "%-16s %10s %10s %10s %7ld %7ld %7ld\n", name.c_str(),
                          fmt2(s.precision).c_str(), fmt2(s.recall).c_str(), fmt2(s.f1).c_str(),
                          s.tp, s.fp, s.fn);
        } else {
            std::snprintf(line, sizeof line, "%-16s %10s %10s %10s\n", name.c_str(),
                          fmt2(s.precision).c_str(), fmt2(s.recall).c_str(), fmt2(s.f1).c_str());
        }
        out += line;
    };
    for (const auto& row : rows) emit(to_string(row.cls), row, true);
    emit("Overall (micro)", report.micro, true);
    emit("Overall (macro)", report.macro, false);

    out += "\nToken confusion (rows actual, columns predicted):\n";
    std::snprintf(line, sizeof line, "%-10s", "");
    out += line;
    const auto axis_name = [&](int i) {
        return i == kNumClasses ? std::string("O") : to_string(kConfusionOrder[i]);
    };
    for (int j = 0; j <= kNumClasses; ++j) {
        std::snprintf(line, sizeof line, " %9s", axis_name(j).c_str());
        out += line;
    }
    out += '\n';
    for (int i = 0; i <= kNumClasses; ++i) {
        std::snprintf(line, sizeof line, "%-10s", axis_name(i).c_str());
        out += line;
        for (int j = 0; j <= kNumClasses; ++j) {
            std::snprintf(line, sizeof line, " %9ld", confusion.cells[i][j]);
            out += line;
        }
        out += '\n';
    }
    return out;
}

std::string render_report_json(const EvalReport& report, const TokenConfusion& confusion) {
    nlohmann::ordered_json j;
    j["mode"] = report.mode == MatchMode::Lenient ? "lenient" : "strict";
    j["per_class"] = nlohmann::ordered_json::array();
    for (int i = 0; i < kNumClasses; ++i) {
        // Fixed confusion-axis order.
        const ClassScore& s = report.per_class[static_cast<int>(kConfusionOrder[i])];
        j["per_class"].push_back({{"class", to_string(s.cls)},
                                  {"tp", s.tp},
                                  {"fp", s.fp},
                                  {"fn", s.fn},
                                  {"p", round2(s.precision)},
                                  {"r", round2(s.recall)},
                                  {"f1", round2(s.f1)}});
    }
    j["micro"] = {{"tp", report.micro.tp},
                  {"fp", report.micro.fp},
                  {"fn", report.micro.fn},
                  {"p", round2(report.micro.precision)},
                  {"r", round2(report.micro.recall)},
                  {"f1", round2(report.micro.f1)}};
    j["macro"] = {{"p", round2(report.macro.precision)},
                  {"r", round2(report.macro.recall)},
                  {"f1", round2(report.macro.f1)}};
    j["confusion"] = nlohmann::ordered_json::array();
    for (int i = 0; i <= kNumClasses; ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (int k = 0; k <= kNumClasses; ++k) row.push_back(confusion.cells[i][k]);
        j["confusion"].push_back(row);
    }
    return j.dump(2);
}

}  // namespace medseq
