#include "jointspace/label_retrieval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "jointspace/errors.hpp"
#include "jointspace/parallel.hpp"
#include "jointspace/random.hpp"

namespace jointspace {

namespace {

std::string fixed4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

bool shares_label(const LabelSet& a, const LabelSet& b) {
  return std::any_of(a.begin(), a.end(), [&](const auto& label) { return b.count(label) > 0; });
}

}  // namespace

std::string_view to_string(RetrievabilityMode mode) {
  return mode == RetrievabilityMode::EuclideanThreshold ? "euclidean_threshold"
                                                        : "graph_reachability";
}

RetrievabilityMode retrievability_mode_from_string(std::string_view text) {
  if (text == "euclidean_threshold") return RetrievabilityMode::EuclideanThreshold;
  if (text == "graph_reachability") return RetrievabilityMode::GraphReachability;
  throw InvalidArgument("unknown retrievability mode '" + std::string(text) + "'");
}

void RetrievalProtocol::validate() const {
  if (n_way < 2) throw InvalidArgument("n_way must be at least 2");
  if (k_shot < 1) throw InvalidArgument("k_shot must be at least 1");
  if (knn_k < 1) throw InvalidArgument("knn_k must be at least 1");
}

TargetSplit sample_n_way_k_shot(const EmbeddingSet& set, const RetrievalProtocol& protocol) {
  protocol.validate();
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set.domain(i) != DomainTag::Image || set.labels(i).empty()) continue;
    members[label_key(set.labels(i))].push_back(i);
  }
  std::vector<std::string> eligible;
  for (const auto& [key, idx] : members) {
    if (idx.size() >= protocol.k_shot) eligible.push_back(key);
  }
  if (eligible.size() < protocol.n_way) {
    throw InsufficientClasses(std::to_string(eligible.size()) + " classes have at least " +
                              std::to_string(protocol.k_shot) + " image points; need " +
                              std::to_string(protocol.n_way));
  }

  Rng rng = Rng::stream(protocol.seed, "n_way_k_shot");
  rng.shuffle(eligible);
  eligible.resize(protocol.n_way);

  TargetSplit split;
  split.classes = eligible;
  for (const auto& key : eligible) {
    auto idx = members[key];
    Rng class_rng = rng.fork(key);
    class_rng.shuffle(idx);
    split.targets.insert(split.targets.end(), idx.begin(),
                         idx.begin() + static_cast<std::ptrdiff_t>(protocol.k_shot));
    split.queries.insert(split.queries.end(),
                         idx.begin() + static_cast<std::ptrdiff_t>(protocol.k_shot), idx.end());
  }
  std::sort(split.targets.begin(), split.targets.end());
  std::sort(split.queries.begin(), split.queries.end());
  return split;
}

LabelSet vote_labels(const EmbeddingSet& set, const std::vector<std::size_t>& ranked,
                     bool multi_label) {
  if (ranked.empty()) return {};
  if (ranked.size() == 1) return set.labels(ranked.front());

  if (multi_label) {
    std::map<std::string, std::size_t> counts;
    for (auto i : ranked) {
      for (const auto& label : set.labels(i)) ++counts[label];
    }
    LabelSet out;
    for (const auto& [label, c] : counts) {
      if (2 * c > ranked.size()) out.insert(label);
    }
    return out;
  }

  // Whole-set vote; the first occurrence rank breaks ties.
  struct Tally {
    std::size_t votes = 0;
    std::size_t first_rank = 0;
  };
  std::map<LabelSet, Tally> tallies;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    auto [it, inserted] = tallies.try_emplace(set.labels(ranked[r]), Tally{0, r});
    ++it->second.votes;
  }
  auto best = tallies.begin();
  for (auto it = tallies.begin(); it != tallies.end(); ++it) {
    if (it->second.votes > best->second.votes ||
        (it->second.votes == best->second.votes && it->second.first_rank < best->second.first_rank)) {
      best = it;
    }
  }
  return best->first;
}

LabelSet euclidean_knn_predict(const EmbeddingSet& set, std::span<const std::size_t> targets,
                               std::size_t query, std::size_t knn_k, bool multi_label) {
  if (targets.empty()) throw InvalidArgument("target set is empty");
  if (knn_k == 0) throw InvalidArgument("knn_k must be positive");
  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(targets.size());
  const auto q = set.vector(query);
  for (auto t : targets) ranked.emplace_back(great_circle_distance(q, set.vector(t)), t);
  const auto k = std::min(knn_k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end());
  std::vector<std::size_t> top;
  for (std::size_t r = 0; r < k; ++r) top.push_back(ranked[r].second);
  return vote_labels(set, top, multi_label);
}

std::optional<LabelSet> geodesic_knn_predict(const ManifoldGraph& graph, const EmbeddingSet& set,
                                             std::span<const std::size_t> targets,
                                             std::size_t query, std::size_t knn_k,
                                             bool multi_label) {
  if (graph.vertex_count() != set.size()) {
    throw LengthMismatch("graph and set index different point counts");
  }
  std::vector<std::size_t> image_targets;
  for (auto t : targets) {
    if (set.domain(t) == DomainTag::Image) image_targets.push_back(t);
  }
  if (image_targets.empty()) throw InvalidArgument("no image targets");
  const auto nearest = geodesic_nearest_in_set(graph, query, image_targets, knn_k);
  if (nearest.empty()) return std::nullopt;
  std::vector<std::size_t> ranked;
  for (const auto& [t, d] : nearest) ranked.push_back(t);
  return vote_labels(set, ranked, multi_label);
}

std::vector<bool> retrievable_mask(const EmbeddingSet& set, const ManifoldGraph& graph,
                                   std::span<const std::size_t> targets,
                                   std::span<const std::size_t> queries, RetrievabilityMode mode) {
  std::vector<bool> mask(queries.size(), false);
  if (mode == RetrievabilityMode::EuclideanThreshold) {
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      const auto q = set.vector(queries[qi]);
      mask[qi] = std::any_of(targets.begin(), targets.end(), [&](std::size_t t) {
        return great_circle_distance(q, set.vector(t)) < graph.epsilon();
      });
    }
    return mask;
  }
  const auto component = connected_components(graph);
  std::vector<char> has_target(graph.vertex_count(), 0);
  for (auto t : targets) has_target[component.at(t)] = 1;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    mask[qi] = has_target[component.at(queries[qi])] != 0;
  }
  return mask;
}

std::pair<std::size_t, std::size_t> count_retrievable(const EmbeddingSet& set,
                                                      const ManifoldGraph& graph,
                                                      std::span<const std::size_t> targets,
                                                      std::span<const std::size_t> queries,
                                                      RetrievabilityMode mode) {
  const auto mask = retrievable_mask(set, graph, targets, queries, mode);
  const auto yes = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  return {yes, mask.size() - yes};
}

RetrievalReport evaluate(const std::vector<std::optional<LabelSet>>& predictions,
                         const std::vector<LabelSet>& truth, bool multi_label) {
  if (predictions.size() != truth.size()) {
    throw LengthMismatch(std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(truth.size()) + " ground-truth entries");
  }
  RetrievalReport report;
  std::size_t hits = 0;
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_class;  // hits, total
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (!predictions[i]) {
      ++report.unretrievable_count;
      continue;
    }
    ++report.retrievable_count;
    const bool hit = multi_label ? *predictions[i] == truth[i] : shares_label(*predictions[i], truth[i]);
    auto& slot = per_class[label_key(truth[i])];
    ++slot.second;
    if (hit) {
      ++hits;
      ++slot.first;
    }
  }
  if (report.retrievable_count > 0) {
    report.accuracy = static_cast<double>(hits) / static_cast<double>(report.retrievable_count);
  }
  for (const auto& [key, counts] : per_class) {
    report.per_class_accuracy[key] =
        static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  return report;
}

std::string report_to_json(const std::vector<RetrievalReport>& reports) {
  nlohmann::ordered_json j;
  j["kind"] = "label";
  j["version"] = 1;
  auto& rows = j["reports"] = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json row;
    row["method"] = r.method;
    row["feature_space"] = r.feature_space;
    row["accuracy"] = r.accuracy;
    row["retrievable_count"] = r.retrievable_count;
    row["unretrievable_count"] = r.unretrievable_count;
    row["per_class_accuracy"] = r.per_class_accuracy;
    rows.push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

std::string report_to_csv(const std::vector<RetrievalReport>& reports) {
  std::ostringstream out;
  out << "method,accuracy,retrievable_points\n";
  for (const auto& r : reports) {
    out << r.method << ',' << fixed4(r.accuracy) << ',' << r.retrievable_count << '\n';
  }
  return out.str();
}

LabelRetrievalRun run_label_retrieval(const EmbeddingSet& set, const ManifoldGraph& graph,
                                      const TargetSplit& split, const RetrievalProtocol& protocol,
                                      const std::string& feature_space, unsigned threads) {
  protocol.validate();
  const auto& queries = split.queries;
  std::vector<LabelSet> truth;
  truth.reserve(queries.size());
  for (auto q : queries) truth.push_back(set.labels(q));

  std::vector<LabelSet> euclidean(queries.size());
  std::vector<std::optional<LabelSet>> geodesic(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t qi) {
    euclidean[qi] = euclidean_knn_predict(set, split.targets, queries[qi], protocol.knn_k,
                                          protocol.multi_label);
    geodesic[qi] = geodesic_knn_predict(graph, set, split.targets, queries[qi], protocol.knn_k,
                                        protocol.multi_label);
  });

  const auto masked = [&](const std::vector<bool>& mask) {
    std::vector<std::optional<LabelSet>> out(queries.size());
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      if (mask[qi]) out[qi] = euclidean[qi];
    }
    return out;
  };
  const auto threshold_mask = retrievable_mask(set, graph, split.targets, queries,
                                               RetrievabilityMode::EuclideanThreshold);
  const auto protocol_mask =
      retrievable_mask(set, graph, split.targets, queries, protocol.retrievability_mode);

  // Geodesic predictions are already empty for queries without a reachable
  // target; the protocol mode can only shrink that set further.
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    if (!protocol_mask[qi]) geodesic[qi].reset();
  }

  LabelRetrievalRun run;
  run.euclidean_all = evaluate(masked(threshold_mask), truth, protocol.multi_label);
  run.euclidean_all.method = "Baseline (" + feature_space + " + Eu)";
  run.euclidean_retrievable = evaluate(masked(protocol_mask), truth, protocol.multi_label);
  run.euclidean_retrievable.method = "Baseline* in " + feature_space;
  run.geodesic = evaluate(geodesic, truth, protocol.multi_label);
  run.geodesic.method = feature_space + " + Geo";
  for (auto* r : {&run.euclidean_all, &run.euclidean_retrievable, &run.geodesic}) {
    r->feature_space = feature_space;
  }
  return run;
}

}  // namespace jointspace
