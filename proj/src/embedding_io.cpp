#include "coldstart/embedding_io.hpp"

#include <sstream>

#include "coldstart/binary_io.hpp"
#include "coldstart/errors.hpp"

namespace coldstart {

void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
  io::write_bytes(out, "EMB1");
  io::write_u32(out, kEmbeddingFormatVersion);
  io::write_u32(out, static_cast<std::uint32_t>(table.dim()));
  io::write_u64(out, table.size());
  for (std::size_t p = 0; p < table.size(); ++p) {
    io::write_u64(out, table.ids()[p]);
    for (float x : table.row(p)) io::write_f32(out, x);
  }
}

EmbeddingTable read_embeddings(std::istream& in) {
  if (io::read_bytes(in, 4) != "EMB1") {
    throw FormatError(FormatError::Kind::bad_magic, "not an EMB1 embedding block");
  }
  auto version = io::read_u32(in);
  if (version != kEmbeddingFormatVersion) {
    throw FormatError(FormatError::Kind::version_mismatch,
                      "unsupported EMB1 version " + std::to_string(version));
  }
  auto dim = io::read_u32(in);
  auto rows = io::read_u64(in);
  EmbeddingTable table(dim);
  Vector row(dim);
  for (std::uint64_t r = 0; r < rows; ++r) {
    auto id = io::read_u64(in);
    for (auto& x : row) x = io::read_f32(in);
    table.add(id, std::span<const float>(row));
  }
  return table;
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ostringstream out(std::ios::binary);
  write_embeddings(out, table);
  io::write_file(path, out.str());
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path), std::ios::binary);
  return read_embeddings(in);
}

std::string embeddings_to_text(const EmbeddingTable& table) {
  std::string out;
  for (std::size_t p = 0; p < table.size(); ++p) {
    out += std::to_string(table.ids()[p]);
    out += '\t';
    auto row = table.row(p);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += io::format_float(row[j]);
    }
    out += '\n';
  }
  return out;
}

EmbeddingTable embeddings_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  EmbeddingTable table;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError(FormatError::Kind::parse, "missing tab in '" + line + "'");
    auto id = io::parse_u64(std::string_view(line).substr(0, tab));
    Vector row;
    std::string_view rest = std::string_view(line).substr(tab + 1);
    while (!rest.empty()) {
      auto comma = rest.find(',');
      row.push_back(io::parse_float(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (first) {
      table = EmbeddingTable(row.size());
      first = false;
    }
    table.add(id, std::span<const float>(row));
  }
  return table;
}

}  // namespace coldstart
