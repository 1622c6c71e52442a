#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "jointspace/embedding_store.hpp"
#include "jointspace/manifold_graph.hpp"

namespace jointspace {

enum class RetrievabilityMode { EuclideanThreshold, GraphReachability };

std::string_view to_string(RetrievabilityMode mode);
RetrievabilityMode retrievability_mode_from_string(std::string_view text);

struct RetrievalProtocol {
  std::size_t n_way = 2;
  std::size_t k_shot = 1;
  std::size_t knn_k = 1;
  std::uint64_t seed = 0;
  RetrievabilityMode retrievability_mode = RetrievabilityMode::GraphReachability;
  bool multi_label = false;

  void validate() const;  // throws InvalidArgument
};

struct TargetSplit {
  std::vector<std::size_t> targets;  // ascending
  std::vector<std::size_t> queries;  // ascending
  std::vector<std::string> classes;  // chosen class keys, in selection order
};

// Picks N classes (by label_key) that have at least k labelled image points,
// k targets per class, and turns the remaining points of those classes into
// queries. Text points and unlabelled points never take part.
TargetSplit sample_n_way_k_shot(const EmbeddingSet& set, const RetrievalProtocol& protocol);

// Label vote over ranked neighbours. With one neighbour its full label set is
// copied. Otherwise whole label sets are voted on (ties go to the set that
// ranks first), or with `multi_label` each label is kept when it appears in
// more than half of the neighbours.
LabelSet vote_labels(const EmbeddingSet& set, const std::vector<std::size_t>& ranked,
                     bool multi_label);

// Ranks every target by great-circle distance (ties by index).
LabelSet euclidean_knn_predict(const EmbeddingSet& set, std::span<const std::size_t> targets,
                               std::size_t query, std::size_t knn_k, bool multi_label = false);

// nullopt when no target is reachable from the query. Text vertices may be
// crossed but are never label sources.
std::optional<LabelSet> geodesic_knn_predict(const ManifoldGraph& graph, const EmbeddingSet& set,
                                             std::span<const std::size_t> targets,
                                             std::size_t query, std::size_t knn_k,
                                             bool multi_label = false);

// Per query: EuclideanThreshold -> some target lies within great-circle
// distance < epsilon; GraphReachability -> some target shares the query's
// connected component.
std::vector<bool> retrievable_mask(const EmbeddingSet& set, const ManifoldGraph& graph,
                                   std::span<const std::size_t> targets,
                                   std::span<const std::size_t> queries, RetrievabilityMode mode);

std::pair<std::size_t, std::size_t> count_retrievable(const EmbeddingSet& set,
                                                      const ManifoldGraph& graph,
                                                      std::span<const std::size_t> targets,
                                                      std::span<const std::size_t> queries,
                                                      RetrievabilityMode mode);

struct RetrievalReport {
  std::string method;
  std::string feature_space;
  double accuracy = 0.0;  // R@1 over retrievable queries, 0 when there are none
  std::size_t retrievable_count = 0;
  std::size_t unretrievable_count = 0;
  std::map<std::string, double> per_class_accuracy;
};

// A missing prediction marks an unretrievable query. With `multi_label` a hit
// needs the predicted set to equal the truth; otherwise sharing any label is
// a hit (equality for single-label data).
RetrievalReport evaluate(const std::vector<std::optional<LabelSet>>& predictions,
                         const std::vector<LabelSet>& truth, bool multi_label);

std::string report_to_json(const std::vector<RetrievalReport>& reports);
std::string report_to_csv(const std::vector<RetrievalReport>& reports);

struct LabelRetrievalRun {
  RetrievalReport euclidean_all;         // Eu over every query
  RetrievalReport euclidean_retrievable; // Eu restricted to retrievable queries
  RetrievalReport geodesic;              // Geo, unretrievable by reachability
};

// Runs the Euclidean baseline and the geodesic predictor for one split.
// `graph` is built over `set` (same indexing); `set` may contain text points.
LabelRetrievalRun run_label_retrieval(const EmbeddingSet& set, const ManifoldGraph& graph,
                                      const TargetSplit& split, const RetrievalProtocol& protocol,
                                      const std::string& feature_space, unsigned threads = 1);

}  // namespace jointspace
