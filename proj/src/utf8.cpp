#include "medseq/utf8.hpp"

namespace medseq::utf8 {

namespace {

// Decodes one code point starting at byte i; advances i. Invalid sequences
// yield the raw byte value.
char32_t decode_at(const std::string& s, std::size_t& i) {
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    const unsigned char b0 = byte(i);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return b0;
    }
    if (i + len > s.size()) {
        ++i;
        return b0;
    }
    for (int k = 1; k < len; ++k) {
        if ((byte(i + k) & 0xC0) != 0x80) {
            ++i;
            return b0;
        }
        cp = (cp << 6) | (byte(i + k) & 0x3F);
    }
    i += len;
    return cp;
}

}  // namespace

std::vector<char32_t> decode(const std::string& text) {
    std::vector<char32_t> out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) out.push_back(decode_at(text, i));
    return out;
}

std::size_t count_codepoints(const std::string& text) {
    std::size_t n = 0, i = 0;
    while (i < text.size()) {
        decode_at(text, i);
        ++n;
    }
    return n;
}

std::string encode_one(char32_t cp) {
    std::string out;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return out;
}

std::string encode(const std::vector<char32_t>& codepoints) {
    std::string out;
    for (char32_t cp : codepoints) out += encode_one(cp);
    return out;
}

Index::Index(const std::string& text) : text_(&text) {
    std::size_t i = 0;
    while (i < text.size()) {
        byte_offset_.push_back(i);
        codepoints_.push_back(decode_at(text, i));
    }
    byte_offset_.push_back(text.size());
}

std::string Index::slice(std::size_t begin, std::size_t end) const {
    if (begin >= byte_offset_.size()) return {};
    if (end >= byte_offset_.size()) end = byte_offset_.size() - 1;
    if (end <= begin) return {};
    return text_->substr(byte_offset_[begin], byte_offset_[end] - byte_offset_[begin]);
}

}  // namespace medseq::utf8
