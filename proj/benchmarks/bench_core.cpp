#include <benchmark/benchmark.h>

#include "jointspace/alignment.hpp"
#include "jointspace/cci_world.hpp"
#include "jointspace/joint_loss.hpp"
#include "jointspace/manifold_graph.hpp"
#include "jointspace/random.hpp"
#include "jointspace/smoothness.hpp"

using namespace jointspace;

namespace {

EmbeddingSet cloud(std::size_t n, std::size_t dim) {
  Rng rng = Rng::stream(1, "bench");
  return random_sphere_points(n, dim, rng);
}

struct World {
  cci::CciDataset dataset;
  EmbeddingSet points;
  VertexSceneMap map;
};

World cci_world(std::size_t iterations) {
  cci::GeneratorConfig config;
  config.iterations = iterations;
  config.branching = 10;
  Rng rng = Rng::stream(1, "cci");
  World w{cci::generate_cci(config, rng), {}, {}};
  const Rng key = Rng::stream(1, "scene");
  std::vector<PointInfo> infos;
  std::vector<double> data;
  for (const auto domain : {DomainTag::Image, DomainTag::Text}) {
    for (std::size_t s = 0; s < w.dataset.size(); ++s) {
      const auto v = cci::scene_embedding(w.dataset.scenes[s], 32, 0.05, key.fork(s), domain);
      infos.push_back({std::string(domain == DomainTag::Image ? "img/" : "txt/") + std::to_string(s),
                       domain, {}});
      data.insert(data.end(), v.begin(), v.end());
      w.map.scene_of.push_back(s);
    }
  }
  w.points = EmbeddingSet::on_sphere(32, std::move(infos), std::move(data));
  return w;
}

}  // namespace

static void BM_BuildEpsilonGraph(benchmark::State& state) {
  const auto set = cloud(static_cast<std::size_t>(state.range(0)), 16);
  const double eps = calibrate_threshold(set, kDefaultEdgeRatio);
  const auto threads = static_cast<unsigned>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(build_epsilon_graph(set, eps, threads));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildEpsilonGraph)->ArgsProduct({{500, 1000, 2000, 4000}, {1, 4}})->Unit(benchmark::kMillisecond);

static void BM_Dijkstra(benchmark::State& state) {
  const auto set = cloud(static_cast<std::size_t>(state.range(0)), 8);
  const auto graph = build_epsilon_graph(set, calibrate_threshold(set, 8.0));
  std::size_t source = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dijkstra(graph, source));
    source = (source + 1) % graph.vertex_count();
  }
  state.counters["edges"] = static_cast<double>(graph.edge_count());
}
BENCHMARK(BM_Dijkstra)->Arg(1000)->Arg(4000)->Arg(16000)->Unit(benchmark::kMicrosecond);

static void BM_CountSmoothPaths(benchmark::State& state) {
  const auto world = cci_world(static_cast<std::size_t>(state.range(0)));
  const auto graph = build_epsilon_graph(world.points, calibrate_threshold(world.points, 2.0));
  const SceneReachability reach(world.dataset);
  const auto threads = static_cast<unsigned>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(count_smooth_shortest_paths(graph, world.map, reach, threads));
  }
  state.counters["vertices"] = static_cast<double>(graph.vertex_count());
}
BENCHMARK(BM_CountSmoothPaths)->ArgsProduct({{2, 3}, {1, 4}})->Unit(benchmark::kMillisecond);

static void BM_LossGradient(benchmark::State& state) {
  const auto b = static_cast<Eigen::Index>(state.range(0));
  Batch batch{Eigen::MatrixXd::Random(b, 32), Eigen::MatrixXd::Random(b, 32)};
  for (auto _ : state) benchmark::DoNotOptimize(loss_gradient(batch));
}
BENCHMARK(BM_LossGradient)->Arg(32)->Arg(256);

static void BM_Procrustes(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = cloud(n, 32);
  std::vector<PointInfo> infos;
  CorrespondenceMap corr;
  for (std::size_t i = 0; i < n; ++i) {
    infos.push_back({"t" + std::to_string(i), DomainTag::Text, {}});
    corr.pairs.emplace_back(a.id(i), infos.back().id);
  }
  const auto b = EmbeddingSet::on_sphere(32, std::move(infos), a.data());
  for (auto _ : state) benchmark::DoNotOptimize(procrustes_align(b, a, corr));
}
BENCHMARK(BM_Procrustes)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
