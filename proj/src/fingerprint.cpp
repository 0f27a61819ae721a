#include "coldstart/fingerprint.hpp"

#include <cstdio>

#include "coldstart/binary_io.hpp"

namespace coldstart {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fingerprint(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

std::string fingerprint_file(const std::filesystem::path& path) { return fingerprint(io::read_file(path)); }

}  // namespace coldstart
