#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

namespace natsel::hash {

// Hex-encoded SHA-256 of the raw bytes.
std::string sha256_hex(std::string_view data);

// Hex-encoded SHA-256 over length-prefixed parts (u64 little-endian length
// before each part), so ("ab","c") and ("a","bc") hash differently.
std::string sha256_hex(std::initializer_list<std::string_view> parts);

std::string sha256_file_hex(const std::filesystem::path& path);

} // namespace natsel::hash
