#include "medseq/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <numeric>
#include <sstream>

#include "medseq/errors.hpp"
#include "medseq/utf8.hpp"

namespace medseq {

namespace {

const std::array<std::string, kNumClasses> kClassNames = {
    "Drug", "Strength", "Form", "Frequency", "Route", "Dosage", "Reason", "ADE", "Duration",
};

}  // namespace

const std::string& to_string(EntityClass cls) {
    return kClassNames[static_cast<int>(cls)];
}

EntityClass entity_class_from_string(const std::string& name) {
    for (int i = 0; i < kNumClasses; ++i) {
        if (kClassNames[i] == name) return static_cast<EntityClass>(i);
    }
    throw UnknownNameError("unknown entity class: " + name);
}

std::size_t Annotation::covered_length() const {
    std::size_t total = 0;
    for (const auto& f : fragments) total += f.end - f.begin;
    return total;
}

int label_index(const IOBLabel& label) {
    if (label.tag == IOBTag::O) return 0;
    const int cls = static_cast<int>(label.cls);
    return label.tag == IOBTag::B ? 1 + 2 * cls : 2 + 2 * cls;
}

IOBLabel label_from_index(int index) {
    if (index == 0) return IOBLabel::outside();
    const int cls = (index - 1) / 2;
    const IOBTag tag = (index - 1) % 2 == 0 ? IOBTag::B : IOBTag::I;
    return {tag, static_cast<EntityClass>(cls)};
}

std::string label_name(const IOBLabel& label) {
    if (label.tag == IOBTag::O) return "O";
    return (label.tag == IOBTag::B ? "B-" : "I-") + to_string(label.cls);
}

IOBLabel label_from_name(const std::string& name) {
    if (name == "O") return IOBLabel::outside();
    if (name.size() > 2 && name[1] == '-' && (name[0] == 'B' || name[0] == 'I')) {
        return {name[0] == 'B' ? IOBTag::B : IOBTag::I, entity_class_from_string(name.substr(2))};
    }
    throw UnknownNameError("unknown IOB label: " + name);
}

// ---------------------------------------------------------------------------
// Standoff I/O

namespace {

std::size_t parse_offset(const std::string& field, std::size_t line_no) {
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw ParseError("non-numeric offset '" + field + "'", line_no);
    }
    return value;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = s.find(sep, pos);
        if (next == std::string::npos) {
            parts.push_back(s.substr(pos));
            break;
        }
        parts.push_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
    return parts;
}

}  // namespace

Document read_standoff(const std::string& text, const std::string& ann,
                       std::vector<std::string>* warnings, const std::string& doc_id) {
    Document doc;
    doc.id = doc_id;
    doc.text = text;
    const utf8::Index index(text);

    std::size_t line_no = 0;
    std::istringstream lines(ann);
    std::string line;
    while (std::getline(lines, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] != 'T') continue;

        const auto fields = split(line, '\t');
        if (fields.size() < 3) {
            throw ParseError("expected 3 tab-separated fields, got " +
                                 std::to_string(fields.size()),
                             line_no);
        }

        Annotation a;
        a.id = fields[0];
        // Middle field: <Class> <start> <end>[;<start> <end>]*
        const std::string& mid = fields[1];
        const std::size_t space = mid.find(' ');
        if (space == std::string::npos) {
            throw ParseError("missing offsets after entity class", line_no);
        }
        a.cls = entity_class_from_string(mid.substr(0, space));
        for (const std::string& range : split(mid.substr(space + 1), ';')) {
            const auto nums = split(range, ' ');
            if (nums.size() != 2) {
                throw ParseError("expected '<start> <end>' in fragment '" + range + "'", line_no);
            }
            Fragment frag{parse_offset(nums[0], line_no), parse_offset(nums[1], line_no)};
            if (frag.begin >= frag.end) {
                throw ParseError("empty or inverted fragment in '" + range + "'", line_no);
            }
            if (frag.end > index.size()) {
                throw BoundsError("annotation " + a.id + " offset " + std::to_string(frag.end) +
                                  " beyond text length " + std::to_string(index.size()));
            }
            a.fragments.push_back(frag);
        }
        std::sort(a.fragments.begin(), a.fragments.end(),
                  [](const Fragment& x, const Fragment& y) { return x.begin < y.begin; });

        a.text = fields[2];
        std::string actual;
        for (const auto& f : a.fragments) {
            if (!actual.empty()) actual += ' ';
            actual += index.slice(f.begin, f.end);
        }
        if (actual != a.text) {
            if (warnings) {
                warnings->push_back("annotation " + a.id + ": surface '" + a.text +
                                    "' does not match text '" + actual + "'; offsets kept");
            }
        }
        doc.annotations.push_back(std::move(a));
    }
    return doc;
}

std::string write_standoff(const Document& doc) {
    std::string out;
    for (const auto& a : doc.annotations) {
        out += a.id;
        out += '\t';
        out += to_string(a.cls);
        bool first = true;
        for (const auto& f : a.fragments) {
            out += first ? " " : ";";
            first = false;
            out += std::to_string(f.begin);
            out += ' ';
            out += std::to_string(f.end);
        }
        out += '\t';
        out += a.text;
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tokenizer

namespace {

bool is_space_cp(char32_t cp) {
    return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\v' ||
           cp == U'\f' || cp == 0x00A0;
}

bool is_punct_cp(char32_t cp) {
    return cp < 128 && std::ispunct(static_cast<int>(cp));
}

bool is_digit_cp(char32_t cp) {
    return cp >= U'0' && cp <= U'9';
}

bool is_ascii_letter(char32_t cp) {
    return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z');
}

// Single letters separated by periods: "p.o.", "q.i.d", ...
bool is_abbreviation(const std::vector<char32_t>& cps, std::size_t begin, std::size_t end) {
    if (end - begin < 2) return false;
    for (std::size_t i = begin; i < end; ++i) {
        const bool letter_slot = (i - begin) % 2 == 0;
        if (letter_slot && !is_ascii_letter(cps[i])) return false;
        if (!letter_slot && cps[i] != U'.') return false;
    }
    // Must contain at least one period.
    return end - begin >= 2 && cps[begin + 1] == U'.';
}

}  // namespace

std::vector<Token> tokenize(const std::string& text) {
    const utf8::Index index(text);
    const std::size_t n = index.size();
    std::vector<char32_t> cps(n);
    for (std::size_t i = 0; i < n; ++i) cps[i] = index.at(i);

    std::vector<Token> tokens;
    const auto emit = [&](std::size_t b, std::size_t e) {
        if (e > b) tokens.push_back({index.slice(b, e), b, e});
    };

    std::size_t i = 0;
    while (i < n) {
        while (i < n && is_space_cp(cps[i])) ++i;
        if (i >= n) break;
        std::size_t chunk_end = i;
        while (chunk_end < n && !is_space_cp(cps[chunk_end])) ++chunk_end;

        if (is_abbreviation(cps, i, chunk_end)) {
            emit(i, chunk_end);
            i = chunk_end;
            continue;
        }

        std::size_t begin = i;
        std::size_t end = chunk_end;
        while (begin < end && is_punct_cp(cps[begin])) {
            emit(begin, begin + 1);
            ++begin;
        }
        std::size_t core_end = end;
        while (core_end > begin && is_punct_cp(cps[core_end - 1])) --core_end;
        // Reclaim one trailing period when it completes an abbreviation
        // ("p.o.," strips to "p.o" otherwise).
        if (core_end < end && cps[core_end] == U'.' &&
            is_abbreviation(cps, begin, core_end + 1)) {
            ++core_end;
        }

        if (begin < core_end) {
            if (is_abbreviation(cps, begin, core_end)) {
                emit(begin, core_end);
            } else {
                std::size_t run = begin;
                for (std::size_t p = begin; p < core_end; ++p) {
                    if (!is_punct_cp(cps[p])) continue;
                    const bool numeric_sep = (cps[p] == U'.' || cps[p] == U',') && p > begin &&
                                             p + 1 < core_end && is_digit_cp(cps[p - 1]) &&
                                             is_digit_cp(cps[p + 1]);
                    if (numeric_sep) continue;
                    emit(run, p);
                    emit(p, p + 1);
                    run = p + 1;
                }
                emit(run, core_end);
            }
        }
        for (std::size_t p = core_end; p < end; ++p) emit(p, p + 1);
        i = chunk_end;
    }
    return tokens;
}

// ---------------------------------------------------------------------------
// Segmentation

namespace {

// True when no annotation fragment spans the boundary between two
// consecutive tokens.
bool boundary_is_free(const std::vector<Annotation>& annotations, const Token& left,
                      const Token& right) {
    for (const auto& a : annotations) {
        for (const auto& f : a.fragments) {
            if (f.begin < left.end && f.end > right.begin) return false;
        }
    }
    return true;
}

void split_capped(const Document& doc, std::vector<Token> tokens, std::vector<Segment>& out) {
    while (tokens.size() > kMaxSegmentTokens) {
        const std::size_t n = tokens.size();
        std::size_t cut = 0;
        for (std::size_t j = kMaxSegmentTokens; j >= 1; --j) {
            if (boundary_is_free(doc.annotations, tokens[j - 1], tokens[j])) {
                cut = j;
                break;
            }
        }
        if (cut == 0) {
            for (std::size_t j = kMaxSegmentTokens + 1; j < n; ++j) {
                if (boundary_is_free(doc.annotations, tokens[j - 1], tokens[j])) {
                    cut = j;
                    break;
                }
            }
        }
        if (cut == 0) break;  // one annotation covers everything; keep whole
        Segment head{doc.id, {tokens.begin(), tokens.begin() + cut}, std::nullopt};
        out.push_back(std::move(head));
        tokens.erase(tokens.begin(), tokens.begin() + cut);
    }
    if (!tokens.empty()) out.push_back({doc.id, std::move(tokens), std::nullopt});
}

}  // namespace

std::vector<Segment> segment(const Document& doc) {
    const utf8::Index index(doc.text);
    const std::size_t n = index.size();

    // Line ranges over code points, boundaries at '\n'.
    std::vector<std::pair<std::size_t, std::size_t>> lines;
    std::size_t line_start = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (index.at(i) == U'\n') {
            lines.emplace_back(line_start, i);
            line_start = i + 1;
        }
    }
    lines.emplace_back(line_start, n);

    const auto line_of = [&](std::size_t cp) {
        for (std::size_t li = 0; li < lines.size(); ++li) {
            if (cp <= lines[li].second) return li;
        }
        return lines.size() - 1;
    };

    // Merge lines a fragment spans.
    std::vector<std::size_t> group(lines.size());
    std::iota(group.begin(), group.end(), 0);
    for (const auto& a : doc.annotations) {
        for (const auto& f : a.fragments) {
            if (f.end == f.begin) continue;
            const std::size_t lo = line_of(f.begin);
            const std::size_t hi = line_of(f.end - 1);
            for (std::size_t li = lo + 1; li <= hi && li < lines.size(); ++li) {
                group[li] = group[lo];
            }
        }
    }
    // Flatten transitive merges (fragments may chain).
    for (std::size_t li = 1; li < group.size(); ++li) {
        if (group[li] != li) group[li] = group[group[li]];
    }

    const std::vector<Token> all_tokens = tokenize(doc.text);
    std::vector<Segment> out;
    std::size_t tok = 0;
    std::size_t li = 0;
    while (li < lines.size()) {
        std::size_t last = li;
        while (last + 1 < lines.size() && group[last + 1] == group[li]) ++last;
        const std::size_t range_end = lines[last].second;
        std::vector<Token> tokens;
        while (tok < all_tokens.size() && all_tokens[tok].begin < range_end) {
            tokens.push_back(all_tokens[tok]);
            ++tok;
        }
        if (!tokens.empty()) split_capped(doc, std::move(tokens), out);
        li = last + 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// IOB conversion

std::vector<IOBLabel> spans_to_iob(const std::vector<Token>& tokens,
                                   const std::vector<Annotation>& annotations,
                                   std::vector<std::string>* warnings) {
    std::vector<IOBLabel> labels(tokens.size(), IOBLabel::outside());
    // winner[t] = index of the annotation owning token t, or npos.
    constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::vector<std::size_t> winner(tokens.size(), npos);

    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const Token& token = tokens[t];
        for (std::size_t ai = 0; ai < annotations.size(); ++ai) {
            const Annotation& a = annotations[ai];
            bool overlaps = false;
            for (const auto& f : a.fragments) {
                if (f.begin < token.end && f.end > token.begin) {
                    overlaps = true;
                    break;
                }
            }
            if (!overlaps) continue;
            if (winner[t] == npos) {
                winner[t] = ai;
                continue;
            }
            const Annotation& current = annotations[winner[t]];
            if (warnings) {
                warnings->push_back("token '" + token.surface + "' at " +
                                    std::to_string(token.begin) + " claimed by " + current.id +
                                    " and " + a.id + "; longer span wins");
            }
            const auto len_a = a.covered_length();
            const auto len_c = current.covered_length();
            if (len_a > len_c || (len_a == len_c && a.start() < current.start())) {
                winner[t] = ai;
            }
        }
    }

    std::vector<bool> begun(annotations.size(), false);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (winner[t] == npos) continue;
        const Annotation& a = annotations[winner[t]];
        labels[t] = {begun[winner[t]] ? IOBTag::I : IOBTag::B, a.cls};
        begun[winner[t]] = true;
    }
    return labels;
}

std::vector<Annotation> iob_to_spans(const std::vector<Token>& tokens,
                                     const std::vector<IOBLabel>& labels) {
    if (tokens.size() != labels.size()) {
        throw DataError("iob_to_spans: " + std::to_string(tokens.size()) + " tokens vs " +
                        std::to_string(labels.size()) + " labels");
    }
    std::vector<Annotation> spans;
    std::size_t run_start = 0;
    bool open = false;
    EntityClass open_cls = EntityClass::Drug;

    const auto close = [&](std::size_t end_token) {
        Annotation a;
        a.cls = open_cls;
        a.fragments.push_back({tokens[run_start].begin, tokens[end_token].end});
        for (std::size_t t = run_start; t <= end_token; ++t) {
            if (t > run_start) a.text += ' ';
            a.text += tokens[t].surface;
        }
        spans.push_back(std::move(a));
        open = false;
    };

    for (std::size_t t = 0; t < labels.size(); ++t) {
        const IOBLabel& l = labels[t];
        if (l.tag == IOBTag::O) {
            if (open) close(t - 1);
        } else if (l.tag == IOBTag::B || !open || l.cls != open_cls) {
            // B always starts a new entity; an orphan or class-switching I does too.
            if (open) close(t - 1);
            open = true;
            open_cls = l.cls;
            run_start = t;
        }
    }
    if (open) close(labels.size() - 1);
    return spans;
}

}  // namespace medseq
