#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace coldstart {

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
// 16 lowercase hex digits.
std::string fingerprint(std::string_view bytes);
std::string fingerprint_file(const std::filesystem::path& path);

}  // namespace coldstart
