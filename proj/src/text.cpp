// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#include "cwalk/text.hpp"

#include <cctype>

namespace cwalk::text {

namespace {

bool is_ascii(char c) { return static_cast<unsigned char>(c) < 0x80; }

}  // namespace

std::string normalize(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    const auto uc = static_cast<unsigned char>(c);
    if (is_ascii(c) && (std::isspace(uc) || std::ispunct(uc))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(is_ascii(c) ? static_cast<char>(std::tolower(uc)) : c);
  }
  return out;
}

std::string squash_key(std::string_view s) {
  std::string out;
  for (char c : s) {
    const auto uc = static_cast<unsigned char>(c);
    if (is_ascii(c) && std::isalnum(uc)) out.push_back(static_cast<char>(std::tolower(uc)));
  }
  return out;
}

std::vector<std::string> split_words(std::string_view normalized) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start < normalized.size()) {
    auto end = normalized.find(' ', start);
    if (end == std::string_view::npos) end = normalized.size();
    if (end > start) words.emplace_back(normalized.substr(start, end - start));
    start = end + 1;
  }
  return words;
}

std::set<std::string> token_set(std::string_view s) {
  auto words = split_words(normalize(s));
  return {words.begin(), words.end()};
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string slug(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '_' || c == '-') out += static_cast<char>(c);
    else if (out.empty() || out.back() != '_') out += '_';
  }
  return out;
}

}  // namespace cwalk::text
