#include "coldstart/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "coldstart/errors.hpp"

namespace coldstart {

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw DimensionError("embedding dimension must be positive");
}

void EmbeddingTable::add(EntityId id, std::span<const float> row) {
  if (row.size() != dim_) {
    throw DimensionError("row " + std::to_string(id) + " has length " + std::to_string(row.size()) +
                         ", table dimension is " + std::to_string(dim_));
  }
  if (index_.contains(id)) throw DataError("duplicate embedding id " + std::to_string(id));
  for (float x : row) {
    if (!std::isfinite(x)) throw DataError("non-finite component in embedding " + std::to_string(id));
  }
  index_.emplace(id, ids_.size());
  ids_.push_back(id);
  data_.insert(data_.end(), row.begin(), row.end());
}

void EmbeddingTable::add(EntityId id, std::span<const double> row) {
  Vector tmp(row.begin(), row.end());
  add(id, std::span<const float>(tmp));
}

std::span<const float> EmbeddingTable::find(EntityId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return {};
  return row(it->second);
}

EmbeddingTable EmbeddingTable::sorted() const {
  std::vector<std::size_t> order(ids_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ids_[a] < ids_[b]; });
  EmbeddingTable out(dim_);
  for (auto p : order) out.add(ids_[p], row(p));
  return out;
}

double inner_product(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw DimensionError("vector lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * double(b[i]);
  return s;
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw DimensionError("vector lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = double(a[i]) - double(b[i]);
    s += d * d;
  }
  return s;
}

Similarity cosine_sim(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw DimensionError("vector lengths differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * double(b[i]);
    na += double(a[i]) * double(a[i]);
    nb += double(b[i]) * double(b[i]);
  }
  if (na == 0.0 || nb == 0.0) return {0.0, true};
  double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return {std::clamp(c, -1.0, 1.0), false};
}

bool is_zero(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; });
}

MeanEmbedding mean_embedding(std::span<const EntityId> ids, const EmbeddingTable& table) {
  std::vector<double> ones(ids.size(), 1.0);
  return mean_embedding(ids, ones, table);
}

MeanEmbedding mean_embedding(std::span<const EntityId> ids, std::span<const double> weights,
                             const EmbeddingTable& table) {
  if (ids.size() != weights.size()) throw DimensionError("ids and weights differ in length");
  MeanEmbedding out;
  std::vector<double> acc(table.dim(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto row = table.find(ids[i]);
    if (row.empty()) {
      ++out.missing;
      continue;
    }
    if (weights[i] <= 0.0) continue;
    for (std::size_t j = 0; j < row.size(); ++j) acc[j] += weights[i] * row[j];
    total += weights[i];
  }
  out.value.assign(table.dim(), 0.0f);
  if (total > 0.0) {
    out.is_null = false;
    for (std::size_t j = 0; j < acc.size(); ++j) out.value[j] = static_cast<float>(acc[j] / total);
  }
  return out;
}

std::vector<Scored> top_k_by_similarity(std::span<const float> query, const EmbeddingTable& table,
                                        std::size_t k, const std::unordered_set<EntityId>& exclude,
                                        SimilarityKind kind) {
  if (k == 0) throw UsageError("top_k_by_similarity requires K >= 1");
  std::vector<Scored> all;
  all.reserve(table.size());
  for (std::size_t p = 0; p < table.size(); ++p) {
    EntityId id = table.ids()[p];
    if (exclude.contains(id)) continue;
    double s = kind == SimilarityKind::cosine ? cosine_sim(query, table.row(p)).value
                                              : inner_product(query, table.row(p));
    all.push_back({id, s});
  }
  std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), ranks_before);
  all.resize(n);
  return all;
}

}  // namespace coldstart
