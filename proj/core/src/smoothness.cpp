#include "jointspace/smoothness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "jointspace/errors.hpp"
#include "jointspace/parallel.hpp"

namespace jointspace {

namespace {

// Smoothness of every prefix of the shortest-path tree rooted at `source`:
// smooth[v] says whether the tree path source..v is a smooth path. Vertices
// are visited in settle order, so a predecessor is always decided first.
std::vector<char> smooth_prefixes(const GeodesicResult& tree, const VertexSceneMap& map,
                                  const SceneReachability& reach) {
  std::vector<char> smooth(tree.distances.size(), 0);
  smooth[tree.source] = 1;
  for (std::size_t k = 1; k < tree.settled_order.size(); ++k) {
    const auto v = tree.settled_order[k];
    const auto p = *tree.predecessors[v];
    if (!smooth[p] || !is_smooth_transition(p, v, map, reach)) continue;
    bool ok = true;
    for (auto u = p; u != tree.source && ok;) {
      u = *tree.predecessors[u];
      ok = !is_smooth_transition(u, v, map, reach);
    }
    smooth[v] = ok ? 1 : 0;
  }
  return smooth;
}

std::string fixed4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

}  // namespace

void VertexSceneMap::validate(std::size_t vertex_count, const cci::CciDataset& dataset) const {
  if (scene_of.size() != vertex_count) {
    throw LengthMismatch("scene map covers " + std::to_string(scene_of.size()) + " of " +
                         std::to_string(vertex_count) + " vertices");
  }
  for (auto s : scene_of) {
    if (s >= dataset.size()) throw InvalidArgument("scene map points past the dataset");
  }
}

SceneReachability::SceneReachability(const cci::CciDataset& dataset)
    : neighbors_(cci::reachable_neighbor_lists(dataset)) {}

bool SceneReachability::reachable(std::size_t a, std::size_t b) const {
  const auto& list = neighbors_.at(a);
  return std::binary_search(list.begin(), list.end(), b);
}

bool is_smooth_transition(std::size_t a, std::size_t b, const VertexSceneMap& map,
                          const SceneReachability& reach) {
  const auto sa = map.scene_of.at(a);
  const auto sb = map.scene_of.at(b);
  return sa == sb || reach.reachable(sa, sb);
}

bool is_smooth_transition(std::size_t a, std::size_t b, const VertexSceneMap& map,
                          const cci::CciDataset& dataset) {
  const auto sa = map.scene_of.at(a);
  const auto sb = map.scene_of.at(b);
  return sa == sb || cci::is_reachable(dataset.scenes.at(sa), dataset.scenes.at(sb));
}

namespace {

template <typename Reach>
bool smooth_path_impl(std::span<const std::size_t> path, const VertexSceneMap& map,
                      const Reach& reach) {
  if (path.size() < 2) return false;
  for (std::size_t i = 0; i < path.size(); ++i) {
    for (std::size_t j = i + 1; j < path.size(); ++j) {
      const bool smooth = is_smooth_transition(path[i], path[j], map, reach);
      if ((j == i + 1) != smooth) return false;
    }
  }
  return true;
}

}  // namespace

bool is_smooth_path(std::span<const std::size_t> path, const VertexSceneMap& map,
                    const SceneReachability& reach) {
  return smooth_path_impl(path, map, reach);
}

bool is_smooth_path(std::span<const std::size_t> path, const VertexSceneMap& map,
                    const cci::CciDataset& dataset) {
  return smooth_path_impl(path, map, dataset);
}

SmoothPathCount count_smooth_shortest_paths(const ManifoldGraph& graph, const VertexSceneMap& map,
                                            const SceneReachability& reach, unsigned threads) {
  if (map.size() != graph.vertex_count()) {
    throw LengthMismatch("scene map and graph differ in vertex count");
  }
  std::vector<std::size_t> images;
  for (std::size_t v = 0; v < graph.vertex_count(); ++v) {
    if (graph.vertex(v).domain == DomainTag::Image) images.push_back(v);
  }
  std::vector<std::uint64_t> counts(images.size(), 0);
  std::vector<std::uint64_t> reached(images.size(), 0);
  parallel_for(images.size(), threads, [&](std::size_t k) {
    const auto s = images[k];
    const auto tree = dijkstra(graph, s);
    const auto smooth = smooth_prefixes(tree, map, reach);
    for (auto t : images) {
      if (t == s || !tree.reachable(t)) continue;
      ++reached[k];
      if (smooth[t]) ++counts[k];
    }
  });
  SmoothPathCount out;
  for (std::size_t k = 0; k < images.size(); ++k) {
    out.count += counts[k];
    out.reachable_pairs += reached[k];
  }
  if (out.count > 0) out.ln_count = std::log(static_cast<double>(out.count));
  return out;
}

SmoothPathCount count_smooth_shortest_paths(const ManifoldGraph& graph, const VertexSceneMap& map,
                                            const cci::CciDataset& dataset, unsigned threads) {
  map.validate(graph.vertex_count(), dataset);
  return count_smooth_shortest_paths(graph, map, SceneReachability(dataset), threads);
}

std::vector<SmoothPath> list_smooth_paths(const ManifoldGraph& graph, const VertexSceneMap& map,
                                          const SceneReachability& reach, std::size_t limit) {
  std::vector<SmoothPath> out;
  for (std::size_t s = 0; s < graph.vertex_count() && out.size() < limit; ++s) {
    if (graph.vertex(s).domain != DomainTag::Image) continue;
    const auto tree = dijkstra(graph, s);
    const auto smooth = smooth_prefixes(tree, map, reach);
    for (std::size_t t = 0; t < graph.vertex_count() && out.size() < limit; ++t) {
      if (t == s || graph.vertex(t).domain != DomainTag::Image || !smooth[t]) continue;
      out.push_back({s, t, *shortest_path(tree, t)});
    }
  }
  return out;
}

std::vector<PathCountReport> sweep_thresholds(const std::vector<FeatureVariant>& variants,
                                              const std::vector<double>& thresholds,
                                              const cci::CciDataset& dataset, unsigned threads) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw InvalidArgument("thresholds must be ascending");
  }
  for (const auto& v : variants) v.map.validate(v.points.size(), dataset);
  const SceneReachability reach(dataset);
  std::vector<PathCountReport> reports;
  for (double eps : thresholds) {
    PathCountReport report;
    report.threshold = eps;
    for (const auto& v : variants) {
      const auto graph = build_epsilon_graph(v.points, eps, threads);
      report.variants.push_back(v.name);
      report.counts.push_back(count_smooth_shortest_paths(graph, v.map, reach, threads));
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

std::string path_report_to_csv(const std::vector<PathCountReport>& reports) {
  std::ostringstream out;
  out << "threshold";
  if (reports.empty()) {
    out << ",psi,psi_random,psi_phi\n";
    return out.str();
  }
  for (const auto& name : reports.front().variants) out << ',' << name;
  out << '\n';
  for (const auto& r : reports) {
    out << fixed4(r.threshold);
    for (const auto& c : r.counts) out << ',' << (c.ln_count ? fixed4(*c.ln_count) : "NA");
    out << '\n';
  }
  return out.str();
}

std::string path_report_to_json(const std::vector<PathCountReport>& reports) {
  nlohmann::ordered_json j;
  j["kind"] = "paths";
  j["version"] = 1;
  j["log_base"] = "e";
  auto& rows = j["reports"] = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json row;
    row["threshold"] = r.threshold;
    auto& counts = row["counts"] = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < r.variants.size(); ++k) {
      const auto& c = r.counts[k];
      counts[r.variants[k]] = {
          {"count", c.count},
          {"reachable_pairs", c.reachable_pairs},
          {"ln_count", c.ln_count ? nlohmann::ordered_json(*c.ln_count) : nlohmann::ordered_json(nullptr)}};
    }
    rows.push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

}  // namespace jointspace
