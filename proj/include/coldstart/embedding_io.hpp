#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>

#include "coldstart/core.hpp"

namespace coldstart {

// EMB1 binary layout: magic "EMB1", u32 version, u32 d, u64 row count, then
// per row u64 id followed by d little-endian float32 values.
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

void write_embeddings(std::ostream& out, const EmbeddingTable& table);
EmbeddingTable read_embeddings(std::istream& in);

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

// Debug text form: one `id<TAB>v1,v2,...` line per row.
std::string embeddings_to_text(const EmbeddingTable& table);
EmbeddingTable embeddings_from_text(const std::string& text);

}  // namespace coldstart
