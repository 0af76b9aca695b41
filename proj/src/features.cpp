#include "medseq/features.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "medseq/errors.hpp"

namespace medseq {

namespace {

const std::array<std::string, 9> kClampNames = {
    "problem", "treatment", "test", "temporal", "negation",
    "severity_degree", "body_location", "change", "uncertainty",
};

const std::array<std::string, kCtakesVocabSize> kCtakesNames = {
    "O", "Medication", "DiseaseDisorder", "SignSymptom", "AnatomicalSite", "Procedure",
};

std::size_t parse_size(const std::string& field, std::size_t line_no) {
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw ParseError("non-numeric offset '" + field + "'", line_no);
    }
    return value;
}

}  // namespace

std::string to_string(const ClampTag& tag) {
    if (tag.category == ClampCategory::O) return "O";
    std::string s = kClampNames[static_cast<int>(tag.category)];
    if (tag.assertion == Assertion::Present) s += ":present";
    if (tag.assertion == Assertion::Absent) s += ":absent";
    return s;
}

std::string to_string(CtakesTag tag) {
    return kCtakesNames[static_cast<int>(tag)];
}

ClampTag clamp_tag_from_string(const std::string& s) {
    if (s == "-" || s == "O") return ClampTag::outside();
    std::string name = s;
    Assertion assertion = Assertion::Present;  // CLAMP's default when unstated
    if (const auto colon = s.find(':'); colon != std::string::npos) {
        name = s.substr(0, colon);
        const std::string attr = s.substr(colon + 1);
        if (attr == "present") {
            assertion = Assertion::Present;
        } else if (attr == "absent") {
            assertion = Assertion::Absent;
        } else {
            throw UnknownNameError("unknown assertion: " + attr);
        }
    }
    for (std::size_t i = 0; i < kClampNames.size(); ++i) {
        if (kClampNames[i] == name) {
            return {static_cast<ClampCategory>(i), assertion};
        }
    }
    throw UnknownNameError("unknown CLAMP tag: " + name);
}

CtakesTag ctakes_tag_from_string(const std::string& s) {
    if (s == "-") return CtakesTag::O;
    for (int i = 0; i < kCtakesVocabSize; ++i) {
        if (kCtakesNames[i] == s) return static_cast<CtakesTag>(i);
    }
    throw UnknownNameError("unknown cTAKES tag: " + s);
}

int clamp_unit_index(const ClampTag& tag) {
    if (tag.category == ClampCategory::O) return 0;
    return 1 + 2 * static_cast<int>(tag.category) + (tag.assertion == Assertion::Absent ? 1 : 0);
}

int ctakes_unit_index(CtakesTag tag) {
    return static_cast<int>(tag);
}

int merged_unit_index(const TokenFeatures& f) {
    return clamp_unit_index(f.clamp) * kCtakesVocabSize + ctakes_unit_index(f.ctakes);
}

std::vector<FeatureRow> parse_token_features(const std::string& content) {
    std::vector<FeatureRow> rows;
    std::istringstream lines(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;

        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (true) {
            const std::size_t tab = line.find('\t', pos);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(pos));
                break;
            }
            fields.push_back(line.substr(pos, tab - pos));
            pos = tab + 1;
        }
        if (fields.size() != 4) {
            throw ParseError("expected 4 tab-separated columns, got " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        FeatureRow row;
        row.begin = parse_size(fields[0], line_no);
        row.end = parse_size(fields[1], line_no);
        if (row.begin >= row.end) {
            throw ParseError("empty or inverted span", line_no);
        }
        row.clamp = clamp_tag_from_string(fields[2]);
        row.ctakes = ctakes_tag_from_string(fields[3]);
        rows.push_back(row);
    }
    return rows;
}

std::vector<FeatureRow> read_token_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open feature file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_token_features(buf.str());
}

std::string write_token_features(const std::vector<FeatureRow>& rows) {
    std::string out;
    for (const auto& row : rows) {
        out += std::to_string(row.begin);
        out += '\t';
        out += std::to_string(row.end);
        out += '\t';
        out += row.clamp.category == ClampCategory::O ? "-" : to_string(row.clamp);
        out += '\t';
        out += row.ctakes == CtakesTag::O ? "-" : to_string(row.ctakes);
        out += '\n';
    }
    return out;
}

std::vector<TokenFeatures> align_features(const std::vector<Token>& tokens,
                                          std::vector<FeatureRow> rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const FeatureRow& a, const FeatureRow& b) {
        return a.begin != b.begin ? a.begin < b.begin : a.end < b.end;
    });

    std::vector<TokenFeatures> out(tokens.size());
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const Token& token = tokens[t];
        std::size_t best_clamp = 0, best_ctakes = 0;
        for (const auto& row : rows) {
            if (row.begin >= token.end) break;
            if (row.end <= token.begin) continue;
            const std::size_t overlap =
                std::min(row.end, token.end) - std::max(row.begin, token.begin);
            if (row.clamp.category != ClampCategory::O && overlap > best_clamp) {
                best_clamp = overlap;
                out[t].clamp = row.clamp;
            }
            if (row.ctakes != CtakesTag::O && overlap > best_ctakes) {
                best_ctakes = overlap;
                out[t].ctakes = row.ctakes;
            }
        }
    }
    return out;
}

TagVocab build_tag_vocab(const std::vector<std::vector<TokenFeatures>>& /*sequences*/) {
    // Closed world: the vocabularies are the full tag sets no matter what was
    // observed, so lookups never miss and sizes never drift with data.
    TagVocab vocab;
    vocab.clamp_units.reserve(kClampVocabSize);
    vocab.clamp_units.push_back("O");
    for (const auto& name : kClampNames) {
        vocab.clamp_units.push_back(name + ":present");
        vocab.clamp_units.push_back(name + ":absent");
    }
    vocab.ctakes_units.assign(kCtakesNames.begin(), kCtakesNames.end());
    return vocab;
}

}  // namespace medseq
