#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace natsel::util {

// One decoded code point with its byte span in the original string.
// Invalid UTF-8 bytes are mapped one byte at a time to 0xDC00+byte so the
// decode is total and byte spans always partition the input.
struct Utf8Char {
    char32_t cp = 0;
    std::size_t offset = 0;
    std::size_t length = 0;
};

std::vector<Utf8Char> decode_utf8(std::string_view text);

// Code points only (same invalid-byte mapping as decode_utf8).
std::u32string decode_utf8_cps(std::string_view text);

// Encodes a single code point; code points in [0xDC00, 0xDCFF] decode back
// to the raw byte they stand for.
void append_utf8(std::string& out, char32_t cp);
std::string encode_utf8(const std::u32string& cps);

bool is_ascii_space(char32_t cp);
bool is_ascii_digit(char32_t cp);

std::string_view trim(std::string_view s);

std::string read_file(const std::filesystem::path& path);

// Write via temp file + rename in the same directory, so readers never see a
// torn file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Shortest text with 17 significant digits; round-trips any finite double.
// Throws ValidationError on NaN/Inf.
std::string format_double(double v);

std::string to_hex(const unsigned char* data, std::size_t len);

// splitmix64: deterministic, platform-independent stream used for seeded
// sampling.
std::uint64_t splitmix64_next(std::uint64_t& state);

// Uniform draw in [0, bound) via rejection sampling on splitmix64.
std::uint64_t bounded_rand(std::uint64_t& state, std::uint64_t bound);

} // namespace natsel::util
