#include "coldstart/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "coldstart/binary_io.hpp"
#include "coldstart/embedding_io.hpp"
#include "coldstart/errors.hpp"

namespace coldstart {

namespace {

constexpr std::uint32_t kSegmentationVersion = 1;

Eigen::MatrixXd kmeans_plus_plus(const Eigen::MatrixXd& points, std::size_t k, std::mt19937_64& rng) {
  const auto n = points.rows();
  Eigen::MatrixXd centroids(static_cast<Eigen::Index>(k), points.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  centroids.row(0) = points.row(pick(rng));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (points.row(i) - centroids.row(0)).squaredNorm();
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(i) - centroids.row(static_cast<Eigen::Index>(c))).squaredNorm());
    }
  }
  return centroids;
}

Eigen::MatrixXd normalized_rows(Eigen::MatrixXd m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    if (norm > 0.0) m.row(i) /= norm;
  }
  return m;
}

}  // namespace

double within_cluster_sum_of_squares(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                                     std::span<const std::size_t> assignment) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    total += (points.row(i) - centroids.row(static_cast<Eigen::Index>(assignment[i]))).squaredNorm();
  }
  return total;
}

std::size_t nearest_centroid(const Eigen::Ref<const Eigen::VectorXd>& v, const Eigen::MatrixXd& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c).transpose() - v).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(c);
    }
  }
  return best;
}

std::size_t nearest_centroid(std::span<const float> v, std::span<const float> centroids, std::size_t dim) {
  if (v.size() != dim || dim == 0 || centroids.size() % dim != 0) {
    throw DimensionError("query length " + std::to_string(v.size()) + " does not match centroid dimension " +
                         std::to_string(dim));
  }
  const std::size_t k = centroids.size() / dim;
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const double d = squared_distance(v, centroids.subspan(c * dim, dim));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

KMeansResult kmeans(const Eigen::MatrixXd& points, const KMeansConfig& cfg) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (cfg.k == 0) throw UsageError("k-means requires k >= 1");
  if (cfg.k > n) {
    throw UsageError("k-means: k = " + std::to_string(cfg.k) + " exceeds number of points " + std::to_string(n));
  }
  if (cfg.max_iter < 1) throw UsageError("k-means requires max_iter >= 1");

  std::mt19937_64 rng(cfg.seed);
  KMeansResult r;
  r.centroids = kmeans_plus_plus(points, cfg.k, rng);
  r.assignment.assign(n, 0);
  std::vector<std::size_t> sizes(cfg.k);
  std::vector<double> dist(n);

  for (int it = 0; it < cfg.max_iter; ++it) {
    const auto previous_assignment = r.assignment;
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = nearest_centroid(points.row(static_cast<Eigen::Index>(i)).transpose(), r.centroids);
      r.assignment[i] = c;
      dist[i] = (points.row(static_cast<Eigen::Index>(i)) - r.centroids.row(static_cast<Eigen::Index>(c))).squaredNorm();
      ++sizes[c];
    }
    for (std::size_t c = 0; c < cfg.k; ++c) {
      if (sizes[c] != 0) continue;
      // Farthest point among clusters that can spare one.
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[r.assignment[i]] > 1 && (far == n || dist[i] > dist[far])) far = i;
      }
      --sizes[r.assignment[far]];
      r.assignment[far] = c;
      sizes[c] = 1;
      dist[far] = 0.0;
      r.centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(far));
      ++r.reseeded;
    }

    Eigen::MatrixXd updated = Eigen::MatrixXd::Zero(r.centroids.rows(), r.centroids.cols());
    for (std::size_t i = 0; i < n; ++i) {
      updated.row(static_cast<Eigen::Index>(r.assignment[i])) += points.row(static_cast<Eigen::Index>(i));
    }
    for (std::size_t c = 0; c < cfg.k; ++c) updated.row(static_cast<Eigen::Index>(c)) /= double(sizes[c]);

    const double shift = (updated - r.centroids).norm();
    const double scale = r.centroids.norm();
    r.centroids = std::move(updated);
    r.iterations = it + 1;
    r.objective.push_back(within_cluster_sum_of_squares(points, r.centroids, r.assignment));
    if ((it > 0 && r.assignment == previous_assignment) || shift <= cfg.tol * std::max(scale, 1e-12)) {
      r.converged = true;
      break;
    }
  }
  return r;
}

std::optional<std::size_t> Segmentation::segment_of(UserId user) const {
  auto it = std::lower_bound(assignment.begin(), assignment.end(), user,
                             [](const auto& p, UserId u) { return p.first < u; });
  if (it == assignment.end() || it->first != user) return std::nullopt;
  return it->second;
}

std::vector<UserId> Segmentation::members(std::size_t s) const {
  std::vector<UserId> out;
  for (const auto& [u, seg] : assignment) {
    if (seg == s) out.push_back(u);
  }
  return out;
}

void Segmentation::validate() const {
  if (k == 0 || dim == 0) throw DataError("segmentation has zero segments or dimension");
  if (centroids.size() != k * dim) throw DimensionError("centroid block does not match k x d");
  if (top_items.size() != k) throw DimensionError("top-item lists do not match k");
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i].second >= k) throw DataError("assignment references segment out of range");
    if (i && assignment[i - 1].first >= assignment[i].first) throw DataError("assignment not sorted by user");
    ++sizes[assignment[i].second];
  }
  for (std::size_t s = 0; s < k; ++s) {
    if (sizes[s] == 0) throw DataError("segment " + std::to_string(s) + " is empty");
  }
  for (float x : centroids) {
    if (!std::isfinite(x)) throw DataError("non-finite centroid component");
  }
}

Segmentation build_segmentation(const EmbeddingTable& users, const KMeansConfig& cfg, DistanceMode mode) {
  const auto n = static_cast<Eigen::Index>(users.size());
  const auto d = static_cast<Eigen::Index>(users.dim());
  Eigen::MatrixXd points(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto row = users.row(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < d; ++j) points(i, j) = row[j];
  }
  if (mode == DistanceMode::cosine) points = normalized_rows(std::move(points));
  auto result = kmeans(points, cfg);

  Segmentation seg;
  seg.k = cfg.k;
  seg.dim = users.dim();
  seg.mode = mode;
  seg.centroids.resize(seg.k * seg.dim);
  for (std::size_t c = 0; c < seg.k; ++c) {
    for (std::size_t j = 0; j < seg.dim; ++j) {
      seg.centroids[c * seg.dim + j] =
          static_cast<float>(result.centroids(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)));
    }
  }
  for (std::size_t i = 0; i < users.size(); ++i) {
    seg.assignment.emplace_back(users.ids()[i], static_cast<std::uint32_t>(result.assignment[i]));
  }
  std::sort(seg.assignment.begin(), seg.assignment.end());
  seg.top_items.resize(seg.k);
  return seg;
}

std::size_t assign_segment(std::span<const float> v, const Segmentation& seg) {
  if (seg.mode == DistanceMode::cosine) {
    double norm = 0.0;
    for (float x : v) norm += double(x) * double(x);
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      Vector unit(v.size());
      for (std::size_t j = 0; j < v.size(); ++j) unit[j] = static_cast<float>(v[j] / norm);
      return nearest_centroid(unit, seg.centroids, seg.dim);
    }
  }
  return nearest_centroid(v, seg.centroids, seg.dim);
}

std::vector<std::vector<Scored>> segment_top_items(const Segmentation& seg, const InteractionLog& log,
                                                   const Catalog& catalog, std::size_t k, PopularityCount count) {
  std::vector<std::map<TrackId, double>> tallies(seg.k);
  for (const auto& [user, s] : seg.assignment) {
    std::set<TrackId> seen;
    for (const auto& e : log.for_user(user)) {
      if (e.signal != Signal::stream || e.entity != EntityKind::track || !catalog.contains(e.item)) continue;
      if (count == PopularityCount::streams || seen.insert(e.item).second) tallies[s][e.item] += 1.0;
    }
  }
  std::vector<std::vector<Scored>> out(seg.k);
  for (std::size_t s = 0; s < seg.k; ++s) {
    auto& list = out[s];
    for (const auto& [t, c] : tallies[s]) list.push_back({t, c});
    std::sort(list.begin(), list.end(), [&](const Scored& a, const Scored& b) {
      if (a.score != b.score) return a.score > b.score;
      const auto ra = catalog.meta(a.id).popularity_rank, rb = catalog.meta(b.id).popularity_rank;
      return ra != rb ? ra < rb : a.id < b.id;
    });
    if (list.size() > k) list.resize(k);
  }
  return out;
}

SegmentProfile describe_segment(std::size_t segment, const Segmentation& seg, const UserUniverse& universe,
                                const InteractionLog& log, const Catalog& catalog) {
  if (segment >= seg.k) throw UsageError("segment " + std::to_string(segment) + " does not exist");
  SegmentProfile p;
  std::map<std::string, std::size_t> countries, ages, genres;
  for (auto user : seg.members(segment)) {
    ++p.members;
    if (universe.contains(user)) {
      const auto& demo = universe.record(user).demographics;
      ++countries[demo.country.empty() ? std::string(kUnknown) : demo.country];
      ++ages[std::string(to_string(age_class(demo.age)))];
    } else {
      ++countries[std::string(kUnknown)];
      ++ages[std::string(kUnknown)];
    }
    std::set<EntityId> artists;
    for (const auto& e : log.for_user(user)) {
      if (e.signal != Signal::stream && e.signal != Signal::favorite && e.signal != Signal::onboarding) continue;
      if (e.entity == EntityKind::artist) {
        artists.insert(e.item);
      } else if (e.entity == EntityKind::track && catalog.contains(e.item)) {
        artists.insert(catalog.meta(e.item).artist);
      }
    }
    std::set<std::string> member_genres;
    for (auto a : artists) {
      for (auto& g : catalog.artist_genres(a)) member_genres.insert(g);
    }
    for (const auto& g : member_genres) ++genres[g];
  }
  auto modal = [](const std::map<std::string, std::size_t>& m) {
    std::string best = std::string(kUnknown);
    std::size_t best_n = 0;
    for (const auto& [name, n] : m) {
      if (n > best_n) {
        best = name;
        best_n = n;
      }
    }
    return best;
  };
  p.country = modal(countries);
  p.age_class = modal(ages);
  std::vector<std::pair<std::string, std::size_t>> ranked(genres.begin(), genres.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (std::size_t i = 0; i < ranked.size() && i < 3; ++i) p.genres.push_back(ranked[i].first);
  return p;
}

void save_segmentation(const std::filesystem::path& path, const Segmentation& seg) {
  seg.validate();
  std::ostringstream out(std::ios::binary);
  io::write_bytes(out, "SEG1");
  io::write_u32(out, kSegmentationVersion);
  io::write_u32(out, static_cast<std::uint32_t>(seg.k));
  io::write_u32(out, static_cast<std::uint32_t>(seg.dim));
  io::write_u32(out, static_cast<std::uint32_t>(seg.mode));
  EmbeddingTable centroids(seg.dim);
  for (std::size_t c = 0; c < seg.k; ++c) centroids.add(c, seg.centroid(c));
  write_embeddings(out, centroids);
  io::write_u64(out, seg.assignment.size());
  for (const auto& [u, s] : seg.assignment) {
    io::write_u64(out, u);
    io::write_u32(out, s);
  }
  for (std::size_t s = 0; s < seg.k; ++s) {
    const auto& list = s < seg.top_items.size() ? seg.top_items[s] : std::vector<Scored>{};
    io::write_u32(out, static_cast<std::uint32_t>(list.size()));
    for (const auto& item : list) {
      io::write_u64(out, item.id);
      io::write_u32(out, static_cast<std::uint32_t>(item.score));
    }
  }
  io::write_file(path, out.str());
}

Segmentation load_segmentation(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path), std::ios::binary);
  if (io::read_bytes(in, 4) != "SEG1") throw FormatError(FormatError::Kind::bad_magic, "not a SEG1 file");
  if (auto v = io::read_u32(in); v != kSegmentationVersion) {
    throw FormatError(FormatError::Kind::version_mismatch, "unsupported segmentation version " + std::to_string(v));
  }
  Segmentation seg;
  seg.k = io::read_u32(in);
  seg.dim = io::read_u32(in);
  auto mode = io::read_u32(in);
  if (mode > 1) throw FormatError(FormatError::Kind::parse, "unknown distance mode");
  seg.mode = static_cast<DistanceMode>(mode);
  auto centroids = read_embeddings(in);
  if (centroids.size() != seg.k || centroids.dim() != seg.dim) {
    throw FormatError(FormatError::Kind::shape_mismatch, "centroid block does not match header");
  }
  seg.centroids = centroids.data();
  const auto n = io::read_u64(in);
  seg.assignment.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto u = io::read_u64(in);
    auto s = io::read_u32(in);
    seg.assignment.emplace_back(u, s);
  }
  seg.top_items.resize(seg.k);
  for (std::size_t s = 0; s < seg.k; ++s) {
    auto len = io::read_u32(in);
    for (std::uint32_t i = 0; i < len; ++i) {
      auto t = io::read_u64(in);
      auto c = io::read_u32(in);
      seg.top_items[s].push_back({t, double(c)});
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(FormatError::Kind::shape_mismatch, "trailing bytes in segmentation file");
  }
  seg.validate();
  return seg;
}

std::string segmentation_to_text(const Segmentation& seg) {
  std::ostringstream out;
  out << "segmentation k=" << seg.k << " d=" << seg.dim
      << " mode=" << (seg.mode == DistanceMode::cosine ? "cosine" : "euclidean") << '\n';
  for (std::size_t s = 0; s < seg.k; ++s) {
    out << "centroid\t" << s << '\t';
    auto c = seg.centroid(s);
    for (std::size_t j = 0; j < c.size(); ++j) out << (j ? "," : "") << io::format_float(c[j]);
    out << '\n';
  }
  for (const auto& [u, s] : seg.assignment) out << "assign\t" << u << '\t' << s << '\n';
  for (std::size_t s = 0; s < seg.top_items.size(); ++s) {
    out << "top\t" << s << '\t';
    for (std::size_t i = 0; i < seg.top_items[s].size(); ++i) {
      out << (i ? "," : "") << seg.top_items[s][i].id << ':' << seg.top_items[s][i].score;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace coldstart
