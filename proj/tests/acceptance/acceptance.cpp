// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cli/app.hpp"
#include "jointspace/alignment.hpp"
#include "jointspace/cci_world.hpp"
#include "jointspace/embedding_store.hpp"
#include "jointspace/joint_loss.hpp"
#include "jointspace/label_retrieval.hpp"
#include "jointspace/manifold_graph.hpp"
#include "jointspace/random.hpp"
#include "jointspace/smoothness.hpp"
#include "jointspace/synthetic.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace jointspace;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* format, double a = 0, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "jointspace");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

// 1 -------------------------------------------------------------------------
Outcome cci_counts() {
  cci::GeneratorConfig config;
  config.iterations = 4;
  config.branching = 10;
  Rng rng = Rng::stream(7, "cci");
  const auto ds = cci::generate_cci(config, rng);
  std::set<std::string> unique;
  for (const auto& s : ds.scenes) unique.insert(cci::fingerprint(s));
  const auto triples = cci::retrieval_triples(ds);
  Outcome o;
  o.pass = ds.size() == 11111 && unique.size() == 11111 && triples.train.size() == 1110 &&
           triples.test.size() == 10000;
  o.detail = std::to_string(ds.size()) + " scenes, " + std::to_string(unique.size()) +
             " unique, " + std::to_string(triples.train.size()) + " train / " +
             std::to_string(triples.test.size()) + " test";
  return o;
}

// 2 -------------------------------------------------------------------------
Outcome procrustes_recovery() {
  constexpr std::size_t kPoints = 200;
  constexpr std::size_t kDim = 16;
  int proper = 0;
  double worst_residual = 0.0;
  double worst_rotation = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng = Rng::stream(seed, "procrustes");
    std::vector<PointInfo> a_info;
    std::vector<PointInfo> b_info;
    CorrespondenceMap corr;
    for (std::size_t i = 0; i < kPoints; ++i) {
      a_info.push_back({"a/" + std::to_string(i), DomainTag::Image, {}});
      b_info.push_back({"b/" + std::to_string(i), DomainTag::Text, {}});
      corr.pairs.emplace_back(a_info.back().id, b_info.back().id);
    }
    auto rot_rng = rng.fork("rotation");
    const Eigen::MatrixXd r = synthetic::random_rotation(kDim, rot_rng);
    Eigen::VectorXd t(kDim);
    for (std::size_t k = 0; k < kDim; ++k) t[static_cast<Eigen::Index>(k)] = rng.normal();
    const auto source = random_sphere_points(kPoints, kDim, rng, a_info);
    std::vector<PointInfo> moved_info = b_info;
    const auto moved = apply_transform(RigidTransform(r, t), source, false);
    const auto target = EmbeddingSet::free_space(kDim, std::move(moved_info), moved.data());

    const auto result = procrustes_align(source, target, corr);
    const auto aligned = apply_transform(result.transform, source, false);
    const double residual = alignment_residual(aligned, target, corr);
    worst_residual = std::max(worst_residual, residual);
    worst_rotation = std::max(worst_rotation, (result.transform.rotation() - r).norm());
    if (std::abs(result.transform.rotation().determinant() - 1.0) < 1e-9) ++proper;
  }
  Outcome o;
  o.pass = proper == 100 && worst_residual < 1e-9;
  o.detail = fmt("det=+1 in %.0f/100, max RMS residual %.2e, max |R-R*| %.2e", proper,
                 worst_residual, worst_rotation);
  return o;
}

// 3 -------------------------------------------------------------------------
Outcome dijkstra_oracle() {
  int exact = 0;
  int brute_checked = 0;
  double worst_brute = 0.0;
  bool paths_ok = true;
  for (std::uint64_t g = 0; g < 200; ++g) {
    Rng rng = Rng::stream(g, "dijkstra");
    const bool small = g % 2 == 0;
    const auto n = small ? 2 + rng.uniform_index(9) : 2 + rng.uniform_index(49);
    const auto graph = oracle::random_graph(n, rng.uniform(0.1, 0.6), rng);
    bool same = true;
    for (std::size_t s = 0; s < n; ++s) {
      const auto fast = dijkstra(graph, s);
      const auto slow = oracle::bellman_ford(graph, s);
      for (std::size_t v = 0; v < n; ++v) {
        if (fast.distances[v] != slow.dist[v]) same = false;
        if (fast.reachable(v) && shortest_path(fast, v) != oracle::reconstruct(slow, s, v)) {
          paths_ok = false;
        }
        if (small) {
          const double brute = oracle::brute_force_distance(graph, s, v);
          if (std::isinf(brute) != std::isinf(fast.distances[v])) {
            worst_brute = INFINITY;
          } else if (!std::isinf(brute)) {
            worst_brute = std::max(worst_brute, std::abs(brute - fast.distances[v]));
          }
        }
      }
    }
    if (small) ++brute_checked;
    if (same) ++exact;
  }
  Outcome o;
  o.pass = exact == 200 && paths_ok && worst_brute <= 1e-12;
  o.detail = fmt("Bellman-Ford exact on %.0f/200 graphs, brute force on %.0f graphs max |diff| %.1e",
                 exact, brute_checked, worst_brute) +
             (paths_ok ? "" : ", predecessor paths differ");
  return o;
}

// 4 -------------------------------------------------------------------------
Outcome loss_and_gradient() {
  Batch closed{Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)};
  const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  const double closed_err = std::abs(ranking_loss(closed) - expected);

  const double h = 1e-5;
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    Rng rng = Rng::stream(t, "gradient");
    const auto bsz = static_cast<Eigen::Index>(1 + rng.uniform_index(8));
    const auto d = static_cast<Eigen::Index>(1 + rng.uniform_index(16));
    Batch b{Eigen::MatrixXd(bsz, d), Eigen::MatrixXd(bsz, d)};
    for (Eigen::Index i = 0; i < bsz; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        b.images(i, j) = 0.5 * rng.normal();
        b.texts(i, j) = 0.5 * rng.normal();
      }
    }
    const auto g = loss_gradient(b);
    for (int which = 0; which < 2; ++which) {
      Eigen::MatrixXd& m = which == 0 ? b.images : b.texts;
      const Eigen::MatrixXd& analytic = which == 0 ? g.images : g.texts;
      for (Eigen::Index i = 0; i < bsz; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
          const double keep = m(i, j);
          m(i, j) = keep + h;
          const double up = oracle::naive_loss(b.images, b.texts);
          m(i, j) = keep - h;
          const double down = oracle::naive_loss(b.images, b.texts);
          m(i, j) = keep;
          const double numeric = (up - down) / (2.0 * h);
          const double scale = std::max({std::abs(numeric), std::abs(analytic(i, j)), 1e-3});
          worst = std::max(worst, std::abs(numeric - analytic(i, j)) / scale);
        }
      }
    }
  }
  Outcome o;
  o.pass = closed_err < 1e-12 && worst < 1e-5;
  o.detail = fmt("closed form |err| %.1e, max relative gradient error %.2e over 50 batches",
                 closed_err, worst);
  return o;
}

// 5 -------------------------------------------------------------------------
Outcome geodesic_beats_euclidean() {
  double eu = 0.0;
  double geo = 0.0;
  double eu_all = 0.0;
  constexpr int kSeeds = 20;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    synthetic::ArcsConfig config;  // 500 points per class
    Rng rng = Rng::stream(seed, "arcs");
    const auto world = synthetic::interleaved_arcs(config, rng);
    RetrievalProtocol protocol;
    protocol.n_way = 2;
    protocol.k_shot = 5;
    protocol.knn_k = 1;
    protocol.seed = seed;
    const auto split = sample_n_way_k_shot(world.images, protocol);
    const auto graph = build_epsilon_graph(world.images, 0.03);
    const auto run = run_label_retrieval(world.images, graph, split, protocol, "Arcs");
    eu += run.euclidean_retrievable.accuracy;
    eu_all += run.euclidean_all.accuracy;
    geo += run.geodesic.accuracy;
  }
  eu /= kSeeds;
  geo /= kSeeds;
  eu_all /= kSeeds;
  Outcome o;
  o.pass = geo - eu >= 0.05;
  o.detail = fmt("mean R@1 geodesic %.4f vs Euclidean %.4f on the same queries, margin %.4f", geo,
                 eu, geo - eu) +
             fmt("; Euclidean within-eps queries only %.4f", eu_all);
  return o;
}

// 6 -------------------------------------------------------------------------
Outcome text_augmentation() {
  int increased = 0;
  double worst_change = 0.0;
  std::size_t before_total = 0;
  std::size_t after_total = 0;
  constexpr int kSeeds = 20;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    synthetic::ArcsConfig config;
    config.points_per_class = 60;
    config.texts_per_class = 60;
    Rng rng = Rng::stream(seed, "arcs");
    auto world = synthetic::interleaved_arcs(config, rng);
    // Caption encoder output lives in its own rotated frame until aligned.
    auto rot_rng = rng.fork("rot");
    const auto r = synthetic::random_rotation(config.dim, rot_rng);
    const auto rotated = apply_transform(
        RigidTransform(r, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(config.dim))),
        world.texts);
    const auto aligned = apply_transform(
        procrustes_align(rotated, world.images, world.correspondence).transform, rotated);

    RetrievalProtocol protocol;
    protocol.n_way = 2;
    protocol.k_shot = 5;
    protocol.seed = seed;
    const auto split = sample_n_way_k_shot(world.images, protocol);
    const double eps = 0.04;
    const auto base = run_label_retrieval(world.images, build_epsilon_graph(world.images, eps),
                                          split, protocol, "Images");
    const auto joint = merge(world.images, aligned);
    const auto aug =
        run_label_retrieval(joint, build_epsilon_graph(joint, eps), split, protocol, "Joint");
    before_total += base.geodesic.retrievable_count;
    after_total += aug.geodesic.retrievable_count;
    if (aug.geodesic.retrievable_count > base.geodesic.retrievable_count) ++increased;
    worst_change = std::max(worst_change, std::abs(aug.geodesic.accuracy - base.geodesic.accuracy));
  }
  Outcome o;
  o.pass = increased == kSeeds && worst_change < 0.05;
  o.detail = fmt("retrievable count up in %.0f/20 seeds (total %.0f -> %.0f)", increased,
                 static_cast<double>(before_total), static_cast<double>(after_total)) +
             fmt(", max |R@1 change| %.4f", worst_change);
  return o;
}

// 7 -------------------------------------------------------------------------
Outcome smooth_path_ordering(const fs::path& scratch) {
  bool ok = true;
  std::size_t thresholds = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto dir = scratch / ("c7_" + std::to_string(seed));
    fs::create_directories(dir);
    const auto cfg = dir / "sweep.yaml";
    const auto s = std::to_string(seed);
    oracle::write_file(cfg, "cci: {iterations: 3, branching: 10, seed: " + s +
                                "}\n"
                                "embed: {dim: 32, noise_sigma: 0.05, seed: " + s +
                                "}\n"
                                "loss: {steps: 500, lr: 0.5, batch_size: 32, seed: " + s +
                                "}\n"
                                "align: {method: procrustes, move: text}\n"
                                "graph: {edge_ratios: [0.5, 1.0, 2.0, 3.0, 4.0]}\n");
    if (run_cli({"sweep", "-c", cfg.string(), "-o", dir.string()}) != 0) return {false, "sweep failed"};
    const auto report = nlohmann::json::parse(oracle::read_file(dir / "report.json"));
    thresholds = std::max(thresholds, report["reports"].size());
    for (const auto& row : report["reports"]) {
      const auto psi = row["counts"]["psi"]["count"].get<std::uint64_t>();
      const auto rnd = row["counts"]["psi_random"]["count"].get<std::uint64_t>();
      const auto phi = row["counts"]["psi_phi"]["count"].get<std::uint64_t>();
      if (!(phi > rnd && rnd >= psi)) ok = false;
      if (seed == 1) {
        detail += fmt("eps %.3f: %.0f/", row["threshold"].get<double>(), static_cast<double>(psi)) +
                  std::to_string(rnd) + "/" + std::to_string(phi) + "; ";
      }
    }
  }
  Outcome o;
  o.pass = ok && thresholds >= 3;
  o.detail = "3 seeds x " + std::to_string(thresholds) +
             " thresholds, seed 1 counts psi/random/phi: " + detail.substr(0, detail.size() - 2);
  return o;
}

// 8 -------------------------------------------------------------------------
Outcome smooth_path_oracle() {
  int matched = 0;
  std::uint64_t total = 0;
  std::size_t vertices = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    cci::GeneratorConfig config;
    config.iterations = 3;
    config.branching = 5;
    Rng rng = Rng::stream(seed, "cci");
    const auto ds = cci::generate_cci(config, rng);
    const Rng key = Rng::stream(seed, "scene");
    std::vector<PointInfo> infos;
    std::vector<double> data;
    VertexSceneMap map;
    for (const auto domain : {DomainTag::Image, DomainTag::Text}) {
      for (std::size_t s = 0; s < ds.size(); ++s) {
        const auto v = cci::scene_embedding(ds.scenes[s], 16, 0.05, key.fork(s), domain);
        infos.push_back({std::string(domain == DomainTag::Image ? "img/" : "txt/") + ds.scenes[s].id,
                         domain, {}});
        data.insert(data.end(), v.begin(), v.end());
        map.scene_of.push_back(s);
      }
    }
    const auto set = EmbeddingSet::on_sphere(16, std::move(infos), std::move(data));
    vertices = set.size();
    const double ratio = 1.0 + static_cast<double>(seed % 3);
    const auto graph = build_epsilon_graph(set, calibrate_threshold(set, ratio));
    const auto fast = count_smooth_shortest_paths(graph, map, ds, 4);
    const auto slow = oracle::smooth_path_count(graph, map, ds);
    if (fast.count == slow) ++matched;
    total += slow;
  }
  Outcome o;
  o.pass = matched == 10 && vertices <= 500;
  o.detail = fmt("exact match %.0f/10 seeds on %.0f-vertex worlds, %.0f paths in total", matched,
                 static_cast<double>(vertices), static_cast<double>(total));
  return o;
}

// 9 -------------------------------------------------------------------------
std::map<std::string, std::string> artifacts(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name != "manifest.json") files[name] = oracle::read_file(e.path());
  }
  return files;
}

Outcome determinism(const fs::path& scratch) {
  const std::vector<std::pair<std::string, std::string>> runs{
      {"gen-cci", "gen_cci.yaml"},
      {"embed", "embed.yaml"},
      {"fit-text", "fit_text.yaml"},
      {"align", "align.yaml"},
      {"build-graph", "build_graph.yaml"},
      {"label-retrieval", "label_retrieval.yaml"},
      {"label-retrieval", "label_retrieval_text.yaml"},
      {"count-smooth-paths", "count_smooth_paths.yaml"},
      {"sweep", "sweep.yaml"},
  };
  int identical = 0;
  std::size_t files = 0;
  std::string failures;
  for (const auto& [command, config] : runs) {
    const auto cfg = std::string(JOINTSPACE_CONFIG_DIR) + "/" + config;
    const auto base = scratch / ("c9_" + config);
    std::vector<std::map<std::string, std::string>> outputs;
    for (const char* threads : {"1", "4", "1"}) {
      const auto dir = base / (std::string("t") + threads + "_" + std::to_string(outputs.size()));
      if (run_cli({command, "-c", cfg, "-o", dir.string(), "-j", threads}) != 0) {
        return {false, command + " failed"};
      }
      outputs.push_back(artifacts(dir));
    }
    if (outputs[0] == outputs[1] && outputs[0] == outputs[2] && !outputs[0].empty()) {
      ++identical;
    } else {
      failures += " " + config;
    }
    files += outputs[0].size();
  }
  Outcome o;
  o.pass = identical == static_cast<int>(runs.size());
  o.detail = std::to_string(identical) + "/" + std::to_string(runs.size()) +
             " pipelines byte-identical across --threads 1/4/1 (" + std::to_string(files) +
             " files in total)" + (failures.empty() ? "" : "; differ:" + failures);
  return o;
}

}  // namespace

int main() {
  oracle::TempDir scratch("acceptance");
  struct Criterion {
    int id;
    const char* title;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "CCI counting identities", 30, cci_counts},
      {2, "Procrustes recovery", 5, procrustes_recovery},
      {3, "Dijkstra oracle equivalence", 60, dijkstra_oracle},
      {4, "ranking loss and gradient", 10, loss_and_gradient},
      {5, "geodesic beats Euclidean", 60, geodesic_beats_euclidean},
      {6, "text augmentation increases retrievability", 60, text_augmentation},
      {7, "smooth-path ordering psi+phi > psi+random >= psi", 600,
       [&] { return smooth_path_ordering(scratch.path()); }},
      {8, "smooth-path oracle equivalence", 120, smooth_path_oracle},
      {9, "CLI determinism across thread counts", 600,
       [&] { return determinism(scratch.path()); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = seconds < c.budget_seconds;
    const bool pass = o.pass && in_budget;
    if (!pass) ++failed;
    std::printf("%s criterion %d: %s (%s; %.2f s of %.0f s budget)\n", pass ? "PASS" : "FAIL",
                c.id, c.title, o.detail.c_str(), seconds, c.budget_seconds);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
