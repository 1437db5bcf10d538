#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace hlv {

/// Lower-case hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

/// First 16 hex digits of sha256_hex; used for file names and config keys.
std::string short_digest(std::string_view bytes);

/// SHA-256 of a file's contents. Throws DataError when unreadable.
std::string file_digest(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over the target, so the
/// final name never holds a truncated document.
void atomic_write(const std::filesystem::path& path, std::string_view content);

/// Stable 64-bit hash built from the leading SHA-256 bytes.
std::uint64_t stable_hash64(std::string_view bytes);

}  // namespace hlv
