#include "jointspace/manifold_graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <queue>
#include <sstream>

#include <nlohmann/json.hpp>

#include "jointspace/errors.hpp"
#include "jointspace/parallel.hpp"

namespace jointspace {

namespace {

// Rows whose dot product is below cos(epsilon) by more than this margin
// cannot produce an edge; the rest are decided on the exact distance.
constexpr double kDotPrefilterMargin = 1e-9;

void require_sphere(const EmbeddingSet& set) {
  if (!set.is_on_sphere()) {
    throw NotNormalized("graph construction needs unit-sphere points");
  }
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

ManifoldGraph::ManifoldGraph(std::vector<Vertex> vertices,
                             std::vector<std::vector<Edge>> adjacency, double epsilon)
    : vertices_(std::move(vertices)), adjacency_(std::move(adjacency)), epsilon_(epsilon) {
  if (adjacency_.size() != vertices_.size()) {
    throw LengthMismatch("adjacency has " + std::to_string(adjacency_.size()) +
                         " rows for " + std::to_string(vertices_.size()) + " vertices");
  }
  std::size_t directed = 0;
  for (const auto& row : adjacency_) directed += row.size();
  edge_count_ = directed / 2;
}

void ManifoldGraph::check_invariants() const {
  const std::size_t n = vertex_count();
  std::size_t directed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = adjacency_[i];
    directed += row.size();
    for (std::size_t k = 0; k < row.size(); ++k) {
      const Edge& e = row[k];
      if (e.to >= n) throw InvalidArgument("edge target out of range");
      if (e.to == i) throw InvalidArgument("self loop at vertex " + std::to_string(i));
      if (!(e.weight > 0.0 && e.weight < epsilon_)) {
        throw InvalidArgument("edge weight outside (0, epsilon)");
      }
      if (k > 0 && row[k - 1].to >= e.to) throw InvalidArgument("adjacency not sorted");
      const auto& back = adjacency_[e.to];
      const auto it = std::lower_bound(back.begin(), back.end(), i,
                                       [](const Edge& x, std::size_t v) { return x.to < v; });
      if (it == back.end() || it->to != i || it->weight != e.weight) {
        throw InvalidArgument("edge " + std::to_string(i) + "-" + std::to_string(e.to) +
                              " has no symmetric twin");
      }
    }
  }
  if (directed % 2 != 0) throw InvalidArgument("odd number of directed edges");
}

ManifoldGraph build_epsilon_graph(const EmbeddingSet& set, double epsilon, unsigned threads) {
  if (!(epsilon >= 0.0)) throw InvalidArgument("epsilon must be non-negative");
  if (set.empty()) throw InvalidArgument("cannot build a graph over an empty set");
  require_sphere(set);

  const std::size_t n = set.size();
  const double dot_floor = std::cos(std::min(epsilon, std::numbers::pi)) - kDotPrefilterMargin;
  std::vector<std::vector<Edge>> adjacency(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto u = set.vector(i);
    auto& row = adjacency[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto v = set.vector(j);
      if (dot(u, v) < dot_floor) continue;
      const double w = great_circle_distance(u, v);
      if (w > 0.0 && w < epsilon) row.push_back({j, w});
    }
  });

  std::vector<Vertex> vertices;
  vertices.reserve(n);
  for (const auto& p : set.points()) vertices.push_back({p.id, p.domain});
  return {std::move(vertices), std::move(adjacency), epsilon};
}

double calibrate_threshold(const EmbeddingSet& set, double target_edge_ratio,
                           unsigned threads) {
  if (!(target_edge_ratio > 0.0)) throw InvalidArgument("target edge ratio must be positive");
  if (set.size() < 2) throw InvalidArgument("calibration needs at least two points");
  require_sphere(set);

  const std::size_t n = set.size();
  const double needed = std::ceil(target_edge_ratio * static_cast<double>(n));
  const double max_pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  if (needed > max_pairs) {
    throw Unsatisfiable("need " + format_double(needed) + " edges but " + std::to_string(n) +
                        " points admit at most " + format_double(max_pairs));
  }
  const auto m = static_cast<std::size_t>(needed);

  // Each block keeps the m smallest positive distances among its rows in a
  // max-heap. The union of blocks yields the global m smallest regardless of
  // how rows are partitioned or scheduled.
  const std::size_t blocks = std::min<std::size_t>(n, 64);
  std::vector<std::vector<double>> heaps(blocks);
  parallel_for(blocks, threads, [&](std::size_t b) {
    auto& heap = heaps[b];
    for (std::size_t i = b; i < n; i += blocks) {
      const auto u = set.vector(i);
      for (std::size_t j = i + 1; j < n; ++j) {
        const double w = great_circle_distance(u, set.vector(j));
        if (w <= 0.0) continue;
        if (heap.size() < m) {
          heap.push_back(w);
          std::push_heap(heap.begin(), heap.end());
        } else if (w < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = w;
          std::push_heap(heap.begin(), heap.end());
        }
      }
    }
  });
  std::vector<double> all;
  for (auto& h : heaps) all.insert(all.end(), h.begin(), h.end());
  if (all.size() < m) {
    throw Unsatisfiable("only " + std::to_string(all.size()) +
                        " point pairs have positive distance; need " + std::to_string(m));
  }
  std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m - 1), all.end());
  const double mth = all[m - 1];
  return std::nextafter(mth, std::numeric_limits<double>::infinity());
}

GeodesicResult dijkstra(const ManifoldGraph& graph, std::size_t source) {
  const std::size_t n = graph.vertex_count();
  if (source >= n) throw InvalidArgument("source vertex out of range");

  GeodesicResult result{source, std::vector<double>(n, kUnreachable),
                        std::vector<std::optional<std::size_t>>(n), {}};
  std::vector<char> settled(n, 0);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  result.distances[source] = 0.0;
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (settled[u]) continue;
    settled[u] = 1;
    result.settled_order.push_back(u);
    for (const Edge& e : graph.neighbors(u)) {
      if (settled[e.to]) continue;
      const double candidate = d + e.weight;
      double& best = result.distances[e.to];
      auto& pred = result.predecessors[e.to];
      if (candidate < best) {
        best = candidate;
        pred = u;
        queue.emplace(candidate, e.to);
      } else if (candidate == best && u < *pred) {
        pred = u;
      }
    }
  }
  return result;
}

std::optional<std::vector<std::size_t>> shortest_path(const GeodesicResult& result,
                                                      std::size_t dest) {
  if (dest >= result.distances.size()) throw InvalidArgument("destination out of range");
  if (!result.reachable(dest)) return std::nullopt;
  std::vector<std::size_t> path{dest};
  for (auto v = dest; v != result.source;) {
    v = *result.predecessors[v];
    path.push_back(v);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::optional<std::vector<std::size_t>> shortest_path(const ManifoldGraph& graph,
                                                      std::size_t source, std::size_t dest) {
  if (dest >= graph.vertex_count()) throw InvalidArgument("destination out of range");
  return shortest_path(dijkstra(graph, source), dest);
}

std::vector<std::pair<std::size_t, double>> geodesic_nearest_in_set(
    const GeodesicResult& from_query, std::span<const std::size_t> targets, std::size_t k) {
  std::vector<std::pair<std::size_t, double>> hits;
  for (std::size_t t : targets) {
    if (t >= from_query.distances.size()) throw InvalidArgument("target out of range");
    if (from_query.reachable(t)) hits.emplace_back(t, from_query.distances[t]);
  }
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
  if (hits.size() > k) hits.resize(k);
  return hits;
}

std::vector<std::pair<std::size_t, double>> geodesic_nearest_in_set(
    const ManifoldGraph& graph, std::size_t query, std::span<const std::size_t> targets,
    std::size_t k) {
  if (targets.empty()) throw InvalidArgument("target set is empty");
  return geodesic_nearest_in_set(dijkstra(graph, query), targets, k);
}

std::vector<std::size_t> connected_components(const ManifoldGraph& graph) {
  constexpr auto kUnset = std::numeric_limits<std::size_t>::max();
  const std::size_t n = graph.vertex_count();
  std::vector<std::size_t> component(n, kUnset);
  std::size_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n; ++start) {
    if (component[start] != kUnset) continue;
    component[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (const Edge& e : graph.neighbors(u)) {
        if (component[e.to] == kUnset) {
          component[e.to] = next;
          stack.push_back(e.to);
        }
      }
    }
    ++next;
  }
  return component;
}

void save_edge_list(const ManifoldGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InvalidArgument("cannot open '" + path.string() + "' for writing");
  for (std::size_t i = 0; i < graph.vertex_count(); ++i) {
    for (const Edge& e : graph.neighbors(i)) {
      if (e.to > i) out << i << ' ' << e.to << ' ' << format_double(e.weight) << '\n';
    }
  }

  nlohmann::ordered_json header;
  header["version"] = 1;
  header["epsilon"] = graph.epsilon();
  header["vertex_count"] = graph.vertex_count();
  header["edge_count"] = graph.edge_count();
  auto& vertices = header["vertices"] = nlohmann::ordered_json::array();
  for (const auto& v : graph.vertices()) {
    vertices.push_back({{"id", v.id}, {"domain", to_string(v.domain)}});
  }
  std::ofstream side(path.string() + ".json", std::ios::trunc);
  side << header.dump(2) << '\n';
}

ManifoldGraph load_edge_list(const std::filesystem::path& path) {
  std::ifstream side(path.string() + ".json");
  if (!side) throw MalformedFile("missing graph header '" + path.string() + ".json'", 0);
  nlohmann::json header;
  std::vector<Vertex> vertices;
  double epsilon = 0.0;
  try {
    header = nlohmann::json::parse(side);
    epsilon = header.at("epsilon").get<double>();
    for (const auto& v : header.at("vertices")) {
      vertices.push_back({v.at("id").get<std::string>(),
                          domain_from_string(v.at("domain").get<std::string>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(std::string("graph header: ") + e.what(), 0);
  }

  std::ifstream in(path);
  if (!in) throw MalformedFile("cannot open '" + path.string() + "'", 0);
  std::vector<std::vector<Edge>> adjacency(vertices.size());
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::size_t a = 0;
    std::size_t b = 0;
    std::string weight_text;
    if (!(fields >> a >> b >> weight_text) || a >= vertices.size() || b >= vertices.size()) {
      throw MalformedFile("bad edge line '" + line + "'", offset);
    }
    double w = 0.0;
    const auto res = std::from_chars(weight_text.data(), weight_text.data() + weight_text.size(), w);
    if (res.ec != std::errc{}) throw MalformedFile("bad edge weight '" + weight_text + "'", offset);
    adjacency[a].push_back({b, w});
    adjacency[b].push_back({a, w});
    offset += line.size() + 1;
  }
  for (auto& row : adjacency) {
    std::sort(row.begin(), row.end(), [](const Edge& x, const Edge& y) { return x.to < y.to; });
  }
  ManifoldGraph graph(std::move(vertices), std::move(adjacency), epsilon);
  graph.check_invariants();
  return graph;
}

}  // namespace jointspace
