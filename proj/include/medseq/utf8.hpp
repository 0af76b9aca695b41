#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace medseq::utf8 {

/// Decodes a UTF-8 string into Unicode scalar values. Invalid bytes are kept
/// as individual code points so that offsets stay total over arbitrary input.
std::vector<char32_t> decode(const std::string& text);

std::size_t count_codepoints(const std::string& text);

std::string encode(const std::vector<char32_t>& codepoints);
std::string encode_one(char32_t cp);

/// Random access from code-point offsets into a UTF-8 string. All character
/// offsets in annotation files count Unicode scalar values, not bytes.
class Index {
  public:
    explicit Index(const std::string& text);

    std::size_t size() const { return codepoints_.size(); }
    char32_t at(std::size_t cp_offset) const { return codepoints_[cp_offset]; }

    /// Substring for the code-point range [begin, end).
    std::string slice(std::size_t begin, std::size_t end) const;

  private:
    std::vector<char32_t> codepoints_;
    std::vector<std::size_t> byte_offset_;  // size() + 1 entries
    const std::string* text_;
};

}  // namespace medseq::utf8
