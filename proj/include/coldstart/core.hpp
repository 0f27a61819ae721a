#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace coldstart {

using EntityId = std::uint64_t;
using UserId = EntityId;
using TrackId = EntityId;

using Vector = std::vector<float>;

// Dense d-dimensional rows keyed by entity id. Rows keep insertion order,
// which is also the on-disk order.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  // Throws DimensionError on length mismatch, DataError on duplicate id or
  // non-finite component.
  void add(EntityId id, std::span<const float> row);
  void add(EntityId id, std::span<const double> row);

  bool contains(EntityId id) const { return index_.contains(id); }
  // Empty span when the id is absent.
  std::span<const float> find(EntityId id) const;
  std::span<const float> row(std::size_t position) const {
    return {data_.data() + position * dim_, dim_};
  }
  const std::vector<EntityId>& ids() const { return ids_; }
  const std::vector<float>& data() const { return data_; }

  // Copy with rows reordered by ascending id.
  EmbeddingTable sorted() const;

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.data_ == b.data_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<EntityId> ids_;
  std::vector<float> data_;
  std::unordered_map<EntityId, std::size_t> index_;
};

enum class SimilarityKind { cosine, inner_product };

struct Similarity {
  double value = 0.0;
  // Set when one operand is the zero vector; value is then 0.
  bool degenerate = false;
};

Similarity cosine_sim(std::span<const float> a, std::span<const float> b);
double inner_product(std::span<const float> a, std::span<const float> b);
double squared_distance(std::span<const float> a, std::span<const float> b);

struct MeanEmbedding {
  Vector value;
  // No id resolved: value is the all-zeros vector.
  bool is_null = true;
  std::size_t missing = 0;
};

MeanEmbedding mean_embedding(std::span<const EntityId> ids, const EmbeddingTable& table);
// Weighted mean; weights align with ids. Non-positive weights are skipped.
MeanEmbedding mean_embedding(std::span<const EntityId> ids, std::span<const double> weights,
                             const EmbeddingTable& table);

bool is_zero(std::span<const float> v);

struct Scored {
  EntityId id = 0;
  double score = 0.0;
  friend bool operator==(const Scored&, const Scored&) = default;
};

// Descending score, ties broken by ascending id.
inline bool ranks_before(const Scored& a, const Scored& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

// Exact ranking of every row of `table` against `query`.
std::vector<Scored> top_k_by_similarity(std::span<const float> query, const EmbeddingTable& table,
                                        std::size_t k,
                                        const std::unordered_set<EntityId>& exclude = {},
                                        SimilarityKind kind = SimilarityKind::cosine);

}  // namespace coldstart
