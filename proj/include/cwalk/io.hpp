// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cwalk::io {

/// Whole-file read. Throws Error(IoFailure) naming the path.
std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view bytes);
std::string base64_encode(std::string_view bytes);

}  // namespace cwalk::io
