#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jointspace/cci_world.hpp"
#include "jointspace/embedding_store.hpp"
#include "jointspace/manifold_graph.hpp"

namespace jointspace {

// Scene index (into a CciDataset) of every graph vertex. Image vertices map
// to their scene; text vertices to the scene their caption describes.
struct VertexSceneMap {
  std::vector<std::size_t> scene_of;

  std::size_t size() const noexcept { return scene_of.size(); }
  void validate(std::size_t vertex_count, const cci::CciDataset& dataset) const;
};

// Precomputed reachability between scenes, shared by the predicates below.
class SceneReachability {
 public:
  explicit SceneReachability(const cci::CciDataset& dataset);

  bool reachable(std::size_t a, std::size_t b) const;
  std::size_t scene_count() const noexcept { return neighbors_.size(); }

 private:
  std::vector<std::vector<std::size_t>> neighbors_;  // sorted
};

// Same scene (an image and its own caption) or reachable scenes.
bool is_smooth_transition(std::size_t a, std::size_t b, const VertexSceneMap& map,
                          const SceneReachability& reach);
bool is_smooth_transition(std::size_t a, std::size_t b, const VertexSceneMap& map,
                          const cci::CciDataset& dataset);

// Every consecutive pair smooth and no non-adjacent pair smooth.
bool is_smooth_path(std::span<const std::size_t> path, const VertexSceneMap& map,
                    const SceneReachability& reach);
bool is_smooth_path(std::span<const std::size_t> path, const VertexSceneMap& map,
                    const cci::CciDataset& dataset);

struct SmoothPathCount {
  std::uint64_t count = 0;
  std::uint64_t reachable_pairs = 0;  // ordered image pairs joined by any path
  std::optional<double> ln_count;     // natural log; empty when count is 0
};

// For every ordered pair (s, t) of distinct image vertices with t reachable
// from s, takes the deterministic Dijkstra path and counts it when smooth.
SmoothPathCount count_smooth_shortest_paths(const ManifoldGraph& graph, const VertexSceneMap& map,
                                            const cci::CciDataset& dataset, unsigned threads = 1);
SmoothPathCount count_smooth_shortest_paths(const ManifoldGraph& graph, const VertexSceneMap& map,
                                            const SceneReachability& reach, unsigned threads = 1);

struct SmoothPath {
  std::size_t source;
  std::size_t target;
  std::vector<std::size_t> vertices;
};

// Up to `limit` counted paths, ordered by (source, target).
std::vector<SmoothPath> list_smooth_paths(const ManifoldGraph& graph, const VertexSceneMap& map,
                                          const SceneReachability& reach, std::size_t limit);

struct FeatureVariant {
  std::string name;  // "psi", "psi_random", "psi_phi"
  EmbeddingSet points;
  VertexSceneMap map;
};

struct PathCountReport {
  double threshold = 0.0;
  std::vector<std::string> variants;
  std::vector<SmoothPathCount> counts;  // aligned with `variants`
};

// One report per threshold (ascending); each builds every variant's graph
// at that threshold and counts its smooth shortest paths.
std::vector<PathCountReport> sweep_thresholds(const std::vector<FeatureVariant>& variants,
                                              const std::vector<double>& thresholds,
                                              const cci::CciDataset& dataset,
                                              unsigned threads = 1);

std::string path_report_to_csv(const std::vector<PathCountReport>& reports);
std::string path_report_to_json(const std::vector<PathCountReport>& reports);

}  // namespace jointspace
