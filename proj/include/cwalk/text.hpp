// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace cwalk::text {

/// Lowercases ASCII, replaces punctuation with spaces and collapses runs of
/// whitespace. Non-ASCII bytes are kept as-is so UTF-8 labels survive.
std::string normalize(std::string_view s);

/// Lowercase and drop everything that is not an ASCII letter or digit.
/// "Confusing or not" and "confusing_or_not" both become "confusingornot".
std::string squash_key(std::string_view s);

std::vector<std::string> split_words(std::string_view normalized);
std::set<std::string> token_set(std::string_view s);

std::string trim(std::string_view s);

/// File- and URL-safe form: keeps [A-Za-z0-9_-], maps other runs to '_'.
std::string slug(std::string_view s);

}  // namespace cwalk::text
