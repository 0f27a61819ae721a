#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

namespace coldstart::io {

// Little-endian primitives, independent of host byte order.
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f32(std::ostream& out, float v);
void write_bytes(std::ostream& out, std::string_view bytes);

// Throw FormatError(truncated) on short reads.
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
float read_f32(std::istream& in);
std::string read_bytes(std::istream& in, std::size_t n);

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames, so readers never see a
// half-written file.
void write_file(const std::filesystem::path& path, std::string_view contents);

// Shortest decimal text that parses back to the same float / double.
std::string format_float(float v);
std::string format_double(double v);
float parse_float(std::string_view s);
double parse_double(std::string_view s);
std::uint64_t parse_u64(std::string_view s);
std::int64_t parse_i64(std::string_view s);

}  // namespace coldstart::io
