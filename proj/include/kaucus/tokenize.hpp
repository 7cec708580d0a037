#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kaucus {

// Lowercased maximal alphanumeric runs, in order. ASCII letters are folded to
// lower case; bytes outside ASCII are treated as word characters and kept
// verbatim, so UTF-8 words survive intact. Shared by retrieval and the
// diversity metrics.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    const bool word_char = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
                           (c >= 'A' && c <= 'Z') || c >= 0x80;
    if (word_char) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : raw);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

}  // namespace kaucus
