#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jointspace/embedding_store.hpp"

namespace jointspace {

struct Edge {
  std::size_t to;
  double weight;  // great-circle distance, radians

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Vertex {
  std::string id;
  DomainTag domain;

  friend bool operator==(const Vertex&, const Vertex&) = default;
};

// Undirected epsilon-neighbourhood graph. Adjacency lists are sorted by
// neighbour index; every edge is stored in both directions with the same
// weight, and 0 < weight < epsilon.
class ManifoldGraph {
 public:
  ManifoldGraph(std::vector<Vertex> vertices, std::vector<std::vector<Edge>> adjacency,
                double epsilon);

  std::size_t vertex_count() const noexcept { return vertices_.size(); }
  std::size_t edge_count() const noexcept { return edge_count_; }
  double epsilon() const noexcept { return epsilon_; }

  const Vertex& vertex(std::size_t i) const { return vertices_.at(i); }
  const std::vector<Vertex>& vertices() const noexcept { return vertices_; }
  std::span<const Edge> neighbors(std::size_t i) const { return adjacency_.at(i); }

  // Checks symmetry, weight bounds and ordering; throws InvalidArgument.
  void check_invariants() const;

 private:
  std::vector<Vertex> vertices_;
  std::vector<std::vector<Edge>> adjacency_;
  double epsilon_;
  std::size_t edge_count_ = 0;
};

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

struct GeodesicResult {
  std::size_t source;
  std::vector<double> distances;  // kUnreachable when no path exists
  std::vector<std::optional<std::size_t>> predecessors;
  // Vertices in the order they were settled (source first).
  std::vector<std::size_t> settled_order;

  bool reachable(std::size_t v) const { return distances.at(v) != kUnreachable; }
};

// Exact all-pairs construction: edge (i, j) iff 0 < d(i, j) < epsilon.
ManifoldGraph build_epsilon_graph(const EmbeddingSet& set, double epsilon, unsigned threads = 1);

// Smallest epsilon with |E| >= ratio * |V|: just above the ceil(ratio*|V|)-th
// smallest positive pairwise distance. Throws Unsatisfiable.
double calibrate_threshold(const EmbeddingSet& set, double target_edge_ratio,
                           unsigned threads = 1);

inline constexpr double kDefaultEdgeRatio = 2.0;

// Single-source weighted shortest paths. Each predecessor is the smallest
// index u with dist[u] + w(u, v) == dist[v].
GeodesicResult dijkstra(const ManifoldGraph& graph, std::size_t source);

// Source to dest inclusive; nullopt when unreachable.
std::optional<std::vector<std::size_t>> shortest_path(const GeodesicResult& result,
                                                      std::size_t dest);
std::optional<std::vector<std::size_t>> shortest_path(const ManifoldGraph& graph,
                                                      std::size_t source, std::size_t dest);

// The k reachable targets nearest to `query` by geodesic distance, ascending,
// ties by index.
std::vector<std::pair<std::size_t, double>> geodesic_nearest_in_set(
    const ManifoldGraph& graph, std::size_t query, std::span<const std::size_t> targets,
    std::size_t k);
std::vector<std::pair<std::size_t, double>> geodesic_nearest_in_set(
    const GeodesicResult& from_query, std::span<const std::size_t> targets, std::size_t k);

// Dense component ids, numbered by smallest member index.
std::vector<std::size_t> connected_components(const ManifoldGraph& graph);

// `<path>` gets one "src dst weight" line per undirected edge (src < dst,
// sorted); `<path>.json` gets epsilon, counts and vertex ids.
void save_edge_list(const ManifoldGraph& graph, const std::filesystem::path& path);
ManifoldGraph load_edge_list(const std::filesystem::path& path);

}  // namespace jointspace
