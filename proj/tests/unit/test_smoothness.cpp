#include <gtest/gtest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "jointspace/errors.hpp"
#include "jointspace/smoothness.hpp"
#include "oracles.hpp"

using namespace jointspace;
using namespace jointspace::cci;

namespace {

CciDataset world_of(std::vector<Scene> scenes) {
  CciDataset ds;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    scenes[i].id = "s" + std::to_string(i);
    ds.scenes.push_back(scenes[i]);
    ds.parent.emplace_back();
    ds.modification.emplace_back();
    ds.iteration.push_back(0);
  }
  ds.rebuild_index();
  return ds;
}

SceneObject base_object() { return SceneObject{Shape::Cube, Color::Red, Material::Rubber, Size::Small}; }

// s0..s4: one object, each step changes one further attribute.
CciDataset chain_world() {
  std::vector<Scene> scenes;
  SceneObject o = base_object();
  scenes.push_back({"", {o}});
  o.shape = Shape::Sphere;
  scenes.push_back({"", {o}});
  o.color = Color::Blue;
  scenes.push_back({"", {o}});
  o.material = Material::Metal;
  scenes.push_back({"", {o}});
  o.size = Size::Large;
  scenes.push_back({"", {o}});
  return world_of(scenes);
}

VertexSceneMap identity_map(std::size_t n) {
  VertexSceneMap m;
  for (std::size_t i = 0; i < n; ++i) m.scene_of.push_back(i);
  return m;
}

ManifoldGraph graph_of(std::size_t n, const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges,
                       std::vector<DomainTag> tags = {}) {
  std::vector<Vertex> vs;
  for (std::size_t i = 0; i < n; ++i) {
    vs.push_back({"v" + std::to_string(i), tags.empty() ? DomainTag::Image : tags[i]});
  }
  std::vector<std::vector<Edge>> adj(n);
  for (auto [a, b, w] : edges) {
    adj[a].push_back({b, w});
    adj[b].push_back({a, w});
  }
  for (auto& l : adj) std::sort(l.begin(), l.end(), [](auto& x, auto& y) { return x.to < y.to; });
  return ManifoldGraph(std::move(vs), std::move(adj), 1.0);
}

// Small generated world with noisy image + caption embeddings.
struct Joint {
  CciDataset ds;
  EmbeddingSet points;
  VertexSceneMap map;
};

Joint joint_world(std::uint64_t seed, std::size_t iterations, std::size_t branching) {
  GeneratorConfig cfg;
  cfg.iterations = iterations;
  cfg.branching = branching;
  Rng rng = Rng::stream(seed, "cci");
  Joint j{generate_cci(cfg, rng), {}, {}};
  const Rng key = Rng::stream(seed, "embed");
  std::vector<PointInfo> infos;
  std::vector<double> data;
  for (int domain = 0; domain < 2; ++domain) {
    const auto tag = domain == 0 ? DomainTag::Image : DomainTag::Text;
    for (std::size_t s = 0; s < j.ds.size(); ++s) {
      const auto v = scene_embedding(j.ds.scenes[s], 16, 0.05, key.fork(s), tag);
      infos.push_back({std::string(to_string(tag)) + "/" + j.ds.scenes[s].id, tag, {}});
      data.insert(data.end(), v.begin(), v.end());
      j.map.scene_of.push_back(s);
    }
  }
  j.points = EmbeddingSet::on_sphere(16, std::move(infos), std::move(data));
  return j;
}

}  // namespace

TEST(SmoothTransition, Cases) {
  const auto ds = chain_world();
  VertexSceneMap map{{0, 0, 1, 2}};  // vertex 1 is the caption of scene 0
  EXPECT_TRUE(is_smooth_transition(0, 1, map, ds));
  EXPECT_TRUE(is_smooth_transition(0, 2, map, ds));
  EXPECT_FALSE(is_smooth_transition(0, 3, map, ds));
  const SceneReachability reach(ds);
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) {
      EXPECT_EQ(is_smooth_transition(a, b, map, reach), is_smooth_transition(a, b, map, ds));
    }
  }
}

TEST(SmoothPath, Cases) {
  const auto ds = chain_world();
  const auto map = identity_map(5);
  const std::vector<std::size_t> two{0, 1};
  EXPECT_TRUE(is_smooth_path(two, map, ds));
  const std::vector<std::size_t> chain{0, 1, 2, 3, 4};
  EXPECT_TRUE(is_smooth_path(chain, map, ds));
  const std::vector<std::size_t> rev{4, 3, 2, 1, 0};
  EXPECT_TRUE(is_smooth_path(rev, map, ds));
  const std::vector<std::size_t> one{0};
  EXPECT_FALSE(is_smooth_path(one, map, ds));
  const std::vector<std::size_t> jump{0, 2};
  EXPECT_FALSE(is_smooth_path(jump, map, ds));
  // a-b-c with a and c reachable: three colours of the same object.
  auto r = base_object();
  auto b = r;
  b.color = Color::Blue;
  auto g = r;
  g.color = Color::Green;
  const auto colours = world_of({{"", {r}}, {"", {b}}, {"", {g}}});
  const std::vector<std::size_t> abc{0, 1, 2};
  EXPECT_FALSE(is_smooth_path(abc, identity_map(3), colours));
  // A caption of the first scene two steps later collapses onto it.
  VertexSceneMap with_caption{{0, 1, 0}};
  EXPECT_FALSE(is_smooth_path(abc, with_caption, ds));
}

TEST(SmoothPath, ReverseInvariantOnRandomPaths) {
  const auto j = joint_world(5, 2, 6);
  const SceneReachability reach(j.ds);
  Rng rng(5);
  for (int t = 0; t < 2000; ++t) {
    std::vector<std::size_t> path;
    const auto len = 2 + rng.uniform_index(4);
    for (std::size_t k = 0; k < len; ++k) path.push_back(rng.uniform_index(j.points.size()));
    auto rev = path;
    std::reverse(rev.begin(), rev.end());
    EXPECT_EQ(is_smooth_path(path, j.map, reach), is_smooth_path(rev, j.map, reach));
    EXPECT_EQ(is_smooth_path(path, j.map, reach), oracle::smooth_path(path, j.map, j.ds));
  }
}

TEST(CountPaths, EdgelessAndSingleEdge) {
  const auto ds = chain_world();
  const auto none = count_smooth_shortest_paths(graph_of(5, {}), identity_map(5), ds);
  EXPECT_EQ(none.count, 0u);
  EXPECT_FALSE(none.ln_count.has_value());
  const auto pair = count_smooth_shortest_paths(graph_of(5, {{0, 1, 0.1}}), identity_map(5), ds);
  EXPECT_EQ(pair.count, 2u);
  EXPECT_EQ(pair.reachable_pairs, 2u);
  EXPECT_NEAR(*pair.ln_count, std::log(2.0), 1e-15);
}

TEST(CountPaths, TextOnlyInterior) {
  // image0 -- text(scene1) -- image2 where scenes 0,1,2 form a chain.
  const auto ds = chain_world();
  VertexSceneMap map{{0, 1, 2}};
  const auto g = graph_of(3, {{0, 1, 0.1}, {1, 2, 0.1}},
                          {DomainTag::Image, DomainTag::Text, DomainTag::Image});
  const auto c = count_smooth_shortest_paths(g, map, ds);
  EXPECT_EQ(c.count, 2u);  // 0->2 and 2->0; text endpoints never count
  EXPECT_EQ(c.reachable_pairs, 2u);
  const auto listed = list_smooth_paths(g, map, SceneReachability(ds), 10);
  ASSERT_EQ(listed.size(), 2u);
  EXPECT_EQ(listed[0].vertices, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(CountPaths, MatchesBruteForceOnGeneratedWorlds) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto j = joint_world(seed, 2, 6);  // 43 scenes, 86 vertices
    for (double ratio : {1.0, 3.0}) {
      const double eps = calibrate_threshold(j.points, ratio);
      const auto g = build_epsilon_graph(j.points, eps);
      const auto fast = count_smooth_shortest_paths(g, j.map, j.ds, 1);
      EXPECT_EQ(fast.count, oracle::smooth_path_count(g, j.map, j.ds)) << seed << " " << ratio;
      EXPECT_EQ(count_smooth_shortest_paths(g, j.map, j.ds, 3).count, fast.count);
    }
  }
}

TEST(CountPaths, ListedPathsAreSmoothImagePaths) {
  const auto j = joint_world(7, 2, 6);
  const auto g = build_epsilon_graph(j.points, calibrate_threshold(j.points, 3.0));
  const SceneReachability reach(j.ds);
  const auto paths = list_smooth_paths(g, j.map, reach, 1000);
  EXPECT_EQ(paths.size(), count_smooth_shortest_paths(g, j.map, reach).count);
  for (const auto& p : paths) {
    EXPECT_EQ(g.vertex(p.source).domain, DomainTag::Image);
    EXPECT_EQ(g.vertex(p.target).domain, DomainTag::Image);
    EXPECT_TRUE(oracle::smooth_path(p.vertices, j.map, j.ds));
    for (std::size_t k = 1; k + 1 < p.vertices.size(); ++k) {
      const auto v = p.vertices[k];
      if (g.vertex(v).domain != DomainTag::Image) continue;
      EXPECT_NE(j.map.scene_of[v], j.map.scene_of[p.source]);
      EXPECT_NE(j.map.scene_of[v], j.map.scene_of[p.target]);
    }
  }
}

TEST(Sweep, ReachablePairsMonotoneAndReports) {
  const auto j = joint_world(3, 2, 6);
  const std::size_t n = j.ds.size();
  std::vector<PointInfo> img_infos(j.points.points().begin(), j.points.points().begin() + n);
  const auto psi = EmbeddingSet::on_sphere(
      16, img_infos, std::vector<double>(j.points.data().begin(), j.points.data().begin() + n * 16));
  std::vector<FeatureVariant> variants{{"psi", psi, identity_map(n)}, {"psi_phi", j.points, j.map}};
  std::vector<double> eps;
  for (double r : {0.5, 1.0, 2.0, 4.0}) eps.push_back(calibrate_threshold(psi, r));
  const auto reports = sweep_thresholds(variants, eps, j.ds);
  ASSERT_EQ(reports.size(), 4u);
  for (std::size_t k = 1; k < reports.size(); ++k) {
    for (std::size_t v = 0; v < 2; ++v) {
      EXPECT_GE(reports[k].counts[v].reachable_pairs, reports[k - 1].counts[v].reachable_pairs);
    }
  }
  const auto csv = path_report_to_csv(reports);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "threshold,psi,psi_phi");
  const auto js = nlohmann::json::parse(path_report_to_json(reports));
  EXPECT_EQ(js["log_base"], "e");
  EXPECT_EQ(path_report_to_csv({}), "threshold,psi,psi_random,psi_phi\n");
  std::vector<double> descending{eps[1], eps[0]};
  EXPECT_THROW(sweep_thresholds(variants, descending, j.ds), InvalidArgument);
}

TEST(Sweep, CsvFormatsNaAndFourDecimals) {
  PathCountReport r;
  r.threshold = 0.5;
  r.variants = {"psi", "psi_random", "psi_phi"};
  r.counts = {SmoothPathCount{0, 0, std::nullopt}, SmoothPathCount{2, 2, std::log(2.0)},
              SmoothPathCount{21000, 30000, std::log(21000.0)}};
  EXPECT_EQ(path_report_to_csv({r}),
            "threshold,psi,psi_random,psi_phi\n0.5000,NA,0.6931,9.9523\n");
}

TEST(VertexSceneMap, Validation) {
  const auto ds = chain_world();
  const VertexSceneMap short_map{{0, 1}};
  const VertexSceneMap bad_scene{{0, 9}};
  EXPECT_THROW(short_map.validate(3, ds), LengthMismatch);
  EXPECT_THROW(bad_scene.validate(2, ds), InvalidArgument);
}
