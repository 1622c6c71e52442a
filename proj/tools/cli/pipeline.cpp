#include "pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "jointspace/alignment.hpp"
#include "jointspace/cci_world.hpp"
#include "jointspace/errors.hpp"
#include "jointspace/joint_loss.hpp"
#include "jointspace/label_retrieval.hpp"
#include "jointspace/manifold_graph.hpp"
#include "jointspace/random.hpp"
#include "jointspace/smoothness.hpp"
#include "jointspace/synthetic.hpp"

namespace jointspace::cli {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr const char* kImagePrefix = "img/";
constexpr const char* kTextPrefix = "txt/";
constexpr const char* kRandomPrefix = "rnd/";

std::string fixed4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Collects artifacts under the output directory.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  fs::path path(const std::string& name) {
    names_.push_back(name);
    return dir_ / name;
  }

  void text(const std::string& name, const std::string& content) {
    std::ofstream out(path(name), std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write '" + (dir_ / name).string() + "'");
    out << content;
  }

  void embeddings(const std::string& name, const EmbeddingSet& set) {
    save_embeddings(set, path(name));
    names_.push_back(name + ".json");
  }

  void edges(const std::string& name, const ManifoldGraph& graph) {
    save_edge_list(graph, path(name));
    names_.push_back(name + ".json");
  }

  const fs::path& dir() const noexcept { return dir_; }
  std::vector<std::string> names() const {
    auto n = names_;
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
    return n;
  }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

void write_report(Outputs& out, const ExperimentConfig& cfg, const std::string& json,
                  const std::string& csv) {
  if (cfg.output.json) out.text("report.json", json);
  if (cfg.output.csv) out.text("report.csv", csv);
}

// Flat key/value report for pipeline stages without a table shape.
void write_metrics(Outputs& out, const ExperimentConfig& cfg, const std::string& kind,
                   const std::vector<std::pair<std::string, Json>>& metrics) {
  Json j;
  j["kind"] = kind;
  j["version"] = 1;
  std::ostringstream csv;
  csv << "metric,value\n";
  for (const auto& [k, v] : metrics) {
    j[k] = v;
    csv << k << ',';
    if (v.is_number_float()) {
      csv << fixed4(v.get<double>());
    } else if (v.is_string()) {
      csv << v.get<std::string>();
    } else {
      csv << v.dump();
    }
    csv << '\n';
  }
  write_report(out, cfg, j.dump(2) + "\n", csv.str());
}

template <typename T>
const T& need(const std::optional<T>& section, const char* name, const std::string& command) {
  if (!section) throw ConfigError(name, "section required by " + command);
  return *section;
}

// ---------------------------------------------------------------- stages

struct Paired {
  EmbeddingSet images;
  EmbeddingSet texts;  // may be empty
  CorrespondenceMap corr;
};

cci::CciDataset obtain_dataset(const ExperimentConfig& cfg, const std::string& command) {
  if (cfg.input.dataset) return cci::load_dataset_jsonl(*cfg.input.dataset);
  const auto& c = need(cfg.cci, "cci", command);
  cci::GeneratorConfig gc;
  gc.iterations = c.iterations;
  gc.branching = c.branching;
  gc.min_objects = c.min_objects;
  gc.max_objects = c.max_objects;
  gc.object_cap = c.object_cap;
  Rng rng = Rng::stream(c.seed, "cci");
  return cci::generate_cci(gc, rng);
}

EmbeddingSet rotate(const EmbeddingSet& set, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "text_encoder");
  const auto r = synthetic::random_rotation(set.dim(), rng);
  return apply_transform(RigidTransform(r, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(set.dim()))), set);
}

Paired embed_dataset(const cci::CciDataset& ds, const EmbedSection& e) {
  const Rng key = Rng::stream(e.seed, "scene");
  std::vector<PointInfo> ii;
  std::vector<PointInfo> ti;
  std::vector<double> id;
  std::vector<double> td;
  CorrespondenceMap corr;
  for (std::size_t s = 0; s < ds.size(); ++s) {
    const auto& scene = ds.scenes[s];
    const Rng scene_key = key.fork(s);
    const auto a = cci::scene_embedding(scene, e.dim, e.noise_sigma, scene_key, DomainTag::Image);
    const auto b = cci::scene_embedding(scene, e.dim, e.noise_sigma, scene_key, DomainTag::Text);
    ii.push_back({kImagePrefix + scene.id, DomainTag::Image, {}});
    ti.push_back({kTextPrefix + scene.id, DomainTag::Text, {}});
    id.insert(id.end(), a.begin(), a.end());
    td.insert(td.end(), b.begin(), b.end());
    corr.pairs.emplace_back(ii.back().id, ti.back().id);
  }
  Paired p{EmbeddingSet::on_sphere(e.dim, std::move(ii), std::move(id)),
           EmbeddingSet::on_sphere(e.dim, std::move(ti), std::move(td)), std::move(corr)};
  if (e.text_rotation) p.texts = rotate(p.texts, e.seed);
  return p;
}

// Captions pair with images by id: "txt/<key>" <-> "img/<key>".
CorrespondenceMap pair_by_id(const EmbeddingSet& images, const EmbeddingSet& texts) {
  CorrespondenceMap corr;
  for (const auto& p : texts.points()) {
    if (p.id.rfind(kTextPrefix, 0) != 0) {
      throw UnknownId("text id '" + p.id + "' does not start with '" + kTextPrefix + "'");
    }
    const auto image_id = kImagePrefix + p.id.substr(std::char_traits<char>::length(kTextPrefix));
    if (!images.find(image_id)) throw UnknownId("no image '" + image_id + "' for text '" + p.id + "'");
    corr.pairs.emplace_back(image_id, p.id);
  }
  return corr;
}

Paired obtain_pair(const ExperimentConfig& cfg, const std::string& command, bool need_texts,
                   cci::CciDataset* dataset_out = nullptr) {
  if (cfg.input.images) {
    Paired p;
    p.images = load_embeddings(*cfg.input.images);
    if (cfg.input.texts) {
      p.texts = load_embeddings(*cfg.input.texts);
      p.corr = pair_by_id(p.images, p.texts);
    } else if (need_texts) {
      throw ConfigError("input.texts", "required by " + command + " when input.images is given");
    }
    if (dataset_out) *dataset_out = obtain_dataset(cfg, command);
    return p;
  }
  auto ds = obtain_dataset(cfg, command);
  auto p = embed_dataset(ds, need(cfg.embed, "embed", command));
  if (dataset_out) *dataset_out = std::move(ds);
  return p;
}

struct FitOutcome {
  std::vector<double> trace;
  double loss_before = 0.0;
  double loss_after = 0.0;
  double dot_before = 0.0;
  double dot_after = 0.0;
};

FitOutcome fit_stage(const LossSection& l, Paired& p) {
  FitOptions o;
  o.steps = l.steps;
  o.learning_rate = l.lr;
  o.batch_size = l.batch_size;
  Rng rng = Rng::stream(l.seed, "fit");
  FitOutcome f;
  f.loss_before = full_batch_loss(p.images, p.texts, p.corr);
  f.dot_before = mean_matched_dot(p.images, p.texts, p.corr);
  auto r = fit_text_embeddings(p.images, p.texts, p.corr, o, rng);
  p.texts = std::move(r.texts);
  f.trace = std::move(r.loss_trace);
  f.loss_after = full_batch_loss(p.images, p.texts, p.corr);
  f.dot_after = mean_matched_dot(p.images, p.texts, p.corr);
  return f;
}

struct AlignOutcome {
  TransformRecord record;
  bool degenerate = false;
};

AlignOutcome align_stage(const AlignSection& a, Paired& p) {
  const double before = alignment_residual(p.images, p.texts, p.corr);
  EmbeddingSet& moving = a.move == MoveSide::Text ? p.texts : p.images;
  const EmbeddingSet& fixed = a.move == MoveSide::Text ? p.images : p.texts;
  const AlignmentResult result = a.method == AlignMethod::Procrustes
                                     ? procrustes_align(moving, fixed, p.corr)
                                     : icp_verbatim(moving, fixed, p.corr);
  moving = apply_transform(result.transform, moving, a.renormalize);
  const double after = alignment_residual(p.images, p.texts, p.corr);
  return {TransformRecord{a.method, result.transform, before, after}, result.degenerate_covariance};
}

// Optional fit then optional alignment, as configured.
void prepare_joint(const ExperimentConfig& cfg, Paired& p) {
  if (p.texts.empty()) return;
  if (cfg.loss) fit_stage(*cfg.loss, p);
  if (cfg.align) align_stage(*cfg.align, p);
}

double resolve_epsilon(const ExperimentConfig& cfg, const EmbeddingSet& images, unsigned threads) {
  if (cfg.graph && cfg.graph->epsilon) return *cfg.graph->epsilon;
  const double ratio =
      cfg.graph && cfg.graph->target_edge_ratio ? *cfg.graph->target_edge_ratio : kDefaultEdgeRatio;
  return calibrate_threshold(images, ratio, threads);
}

std::string scene_key(const std::string& id) {
  const auto slash = id.find('/');
  return slash == std::string::npos ? id : id.substr(slash + 1);
}

VertexSceneMap scene_map(const EmbeddingSet& set, const cci::CciDataset& ds) {
  VertexSceneMap m;
  m.scene_of.reserve(set.size());
  for (const auto& p : set.points()) m.scene_of.push_back(ds.index_of(scene_key(p.id)));
  return m;
}

// ---------------------------------------------------------------- commands

struct Context {
  const ExperimentConfig& cfg;
  const std::string& command;
  unsigned threads;
  Outputs& out;
  std::map<std::string, std::uint64_t> seeds;
};

void cmd_gen_cci(Context& c) {
  const auto& s = need(c.cfg.cci, "cci", c.command);
  c.seeds["cci"] = s.seed;
  const auto ds = obtain_dataset(c.cfg, c.command);
  const auto triples = cci::retrieval_triples(ds);
  cci::save_dataset_jsonl(ds, c.out.path("dataset.jsonl"));
  cci::save_triples_csv(triples, c.out.path("triples.csv"));
  write_metrics(c.out, c.cfg, "cci",
                {{"scenes", ds.size()},
                 {"expected_scenes", cci::expected_scene_count(s.iterations, s.branching)},
                 {"train_triples", triples.train.size()},
                 {"test_triples", triples.test.size()},
                 {"avg_reachable", cci::avg_reachable(ds)}});
}

void cmd_embed(Context& c) {
  const auto p = obtain_pair(c.cfg, c.command, true);
  c.out.embeddings("image.emb", p.images);
  c.out.embeddings("text.emb", p.texts);
  write_metrics(c.out, c.cfg, "embed",
                {{"points", p.images.size() + p.texts.size()},
                 {"dim", p.images.dim()},
                 {"mean_matched_dot", mean_matched_dot(p.images, p.texts, p.corr)},
                 {"alignment_residual", alignment_residual(p.images, p.texts, p.corr)}});
}

void cmd_fit_text(Context& c) {
  const auto& l = need(c.cfg.loss, "loss", c.command);
  c.seeds["loss"] = l.seed;
  auto p = obtain_pair(c.cfg, c.command, true);
  const auto f = fit_stage(l, p);
  c.out.embeddings("text.emb", p.texts);
  c.out.text("loss_trace.csv", loss_trace_csv(f.trace));
  write_metrics(c.out, c.cfg, "fit",
                {{"steps", l.steps},
                 {"full_batch_loss_before", f.loss_before},
                 {"full_batch_loss_after", f.loss_after},
                 {"mean_matched_dot_before", f.dot_before},
                 {"mean_matched_dot_after", f.dot_after}});
}

void cmd_align(Context& c) {
  const auto& a = need(c.cfg.align, "align", c.command);
  auto p = obtain_pair(c.cfg, c.command, true);
  if (c.cfg.loss) fit_stage(*c.cfg.loss, p);
  const auto r = align_stage(a, p);
  c.out.embeddings("image.emb", p.images);
  c.out.embeddings("text.emb", p.texts);
  c.out.text("transform.json", transform_to_json(r.record));
  write_metrics(c.out, c.cfg, "align",
                {{"method", std::string(to_string(a.method))},
                 {"move", a.move == MoveSide::Text ? "text" : "image"},
                 {"residual_before", r.record.residual_before},
                 {"residual_after", r.record.residual_after},
                 {"degenerate_covariance", r.degenerate}});
}

void cmd_build_graph(Context& c) {
  auto p = obtain_pair(c.cfg, c.command, false);
  prepare_joint(c.cfg, p);
  const double eps = resolve_epsilon(c.cfg, p.images, c.threads);
  const auto points = p.texts.empty() ? p.images : merge(p.images, p.texts);
  const auto graph = build_epsilon_graph(points, eps, c.threads);
  const auto comp = connected_components(graph);
  std::map<std::size_t, std::size_t> sizes;
  for (auto k : comp) ++sizes[k];
  std::size_t largest = 0;
  for (const auto& [_, n] : sizes) largest = std::max(largest, n);
  c.out.edges("graph.edges", graph);
  write_metrics(c.out, c.cfg, "graph",
                {{"vertices", graph.vertex_count()},
                 {"edges", graph.edge_count()},
                 {"epsilon", eps},
                 {"components", sizes.size()},
                 {"largest_component", largest}});
}

Paired label_world(const ExperimentConfig& cfg, const std::string& command) {
  if (cfg.synthetic) {
    const auto& y = *cfg.synthetic;
    synthetic::ArcsConfig ac;
    ac.points_per_class = y.points_per_class;
    ac.texts_per_class = y.texts_per_class;
    ac.dim = y.dim;
    ac.chart_scale = y.chart_scale;
    ac.noise = y.noise;
    ac.arm_offset = y.arm_offset;
    ac.text_jitter = y.text_jitter;
    Rng rng = Rng::stream(y.seed, "arcs");
    auto w = synthetic::interleaved_arcs(ac, rng);
    Paired p{std::move(w.images), std::move(w.texts), std::move(w.correspondence)};
    if (!p.texts.empty() && y.text_rotation) p.texts = rotate(p.texts, y.seed);
    return p;
  }
  if (!cfg.input.images) {
    throw ConfigError("synthetic", "section (or input.images) required by " + command);
  }
  return obtain_pair(cfg, command, false);
}

void cmd_label_retrieval(Context& c) {
  const auto& l = need(c.cfg.label, "label", c.command);
  c.seeds["label"] = l.protocol.seed;
  if (c.cfg.synthetic) c.seeds["synthetic"] = c.cfg.synthetic->seed;
  auto p = label_world(c.cfg, c.command);
  prepare_joint(c.cfg, p);
  const auto split = sample_n_way_k_shot(p.images, l.protocol);
  const double eps = resolve_epsilon(c.cfg, p.images, c.threads);

  const auto g_img = build_epsilon_graph(p.images, eps, c.threads);
  const auto base = run_label_retrieval(p.images, g_img, split, l.protocol, "Joint", c.threads);
  std::vector<RetrievalReport> rows{base.euclidean_all, base.euclidean_retrievable, base.geodesic};
  if (!p.texts.empty()) {
    // Text points only join the graph; targets and queries keep their indices.
    const auto joint = merge(p.images, p.texts);
    const auto g_joint = build_epsilon_graph(joint, eps, c.threads);
    const auto aug = run_label_retrieval(joint, g_joint, split, l.protocol, "Joint + Text", c.threads);
    rows.push_back(aug.euclidean_retrievable);
    rows.push_back(aug.geodesic);
  }
  write_report(c.out, c.cfg, report_to_json(rows), report_to_csv(rows));
}

std::vector<FeatureVariant> smoothness_variants(Context& c, const cci::CciDataset& ds, Paired p) {
  prepare_joint(c.cfg, p);
  if (p.texts.empty()) throw ConfigError("input.texts", "caption embeddings required by " + c.command);
  // Uniform random unit vectors, one per caption, standing in for Phi.
  std::vector<PointInfo> rnd_info;
  for (const auto& t : p.texts.points()) {
    rnd_info.push_back({kRandomPrefix + scene_key(t.id), DomainTag::Text, {}});
  }
  const std::uint64_t rnd_seed = c.cfg.embed ? c.cfg.embed->seed : 0;
  Rng rng = Rng::stream(rnd_seed, "random_baseline");
  const auto random = random_sphere_points(p.texts.size(), p.texts.dim(), rng, std::move(rnd_info));
  const auto with_random = merge(p.images, random);
  const auto with_text = merge(p.images, p.texts);
  return {{"psi", p.images, scene_map(p.images, ds)},
          {"psi_random", with_random, scene_map(with_random, ds)},
          {"psi_phi", with_text, scene_map(with_text, ds)}};
}

void dump_paths(Context& c, const cci::CciDataset& ds, const FeatureVariant& v, double eps) {
  const auto graph = build_epsilon_graph(v.points, eps, c.threads);
  const auto paths = list_smooth_paths(graph, v.map, SceneReachability(ds), c.cfg.output.paths_limit);
  std::ostringstream out;
  for (const auto& path : paths) {
    Json j;
    j["source"] = v.points.id(path.source);
    j["target"] = v.points.id(path.target);
    j["vertices"] = Json::array();
    j["scenes"] = Json::array();
    for (auto u : path.vertices) {
      j["vertices"].push_back(v.points.id(u));
      j["scenes"].push_back(ds.scenes[v.map.scene_of[u]].id);
    }
    out << j.dump() << '\n';
  }
  c.out.text("paths.jsonl", out.str());
}

void smooth_paths_common(Context& c, bool sweep) {
  if (c.cfg.loss) c.seeds["loss"] = c.cfg.loss->seed;
  cci::CciDataset ds;
  auto p = obtain_pair(c.cfg, c.command, true, &ds);
  const auto variants = smoothness_variants(c, ds, std::move(p));
  const auto& psi = variants.front().points;

  std::vector<double> thresholds;
  if (sweep) {
    const auto& g = need(c.cfg.graph, "graph", c.command);
    if (!g.thresholds.empty()) {
      thresholds = g.thresholds;
    } else if (!g.edge_ratios.empty()) {
      for (double r : g.edge_ratios) thresholds.push_back(calibrate_threshold(psi, r, c.threads));
      std::sort(thresholds.begin(), thresholds.end());
    } else {
      throw ConfigError("graph.thresholds", "sweep needs graph.thresholds or graph.edge_ratios");
    }
  } else {
    thresholds.push_back(resolve_epsilon(c.cfg, psi, c.threads));
  }
  const auto reports = sweep_thresholds(variants, thresholds, ds, c.threads);
  write_report(c.out, c.cfg, path_report_to_json(reports), path_report_to_csv(reports));
  if (c.cfg.output.paths_limit > 0) dump_paths(c, ds, variants.back(), thresholds.front());
}

void cmd_count_smooth_paths(Context& c) { smooth_paths_common(c, false); }
void cmd_sweep(Context& c) { smooth_paths_common(c, true); }

using Command = void (*)(Context&);

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> table{
      {"gen-cci", cmd_gen_cci},
      {"embed", cmd_embed},
      {"align", cmd_align},
      {"build-graph", cmd_build_graph},
      {"label-retrieval", cmd_label_retrieval},
      {"fit-text", cmd_fit_text},
      {"count-smooth-paths", cmd_count_smooth_paths},
      {"sweep", cmd_sweep},
  };
  return table;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const Context& c, const std::string& started_at, double seconds) {
  Json m;
  m["tool"] = "jointspace";
  m["version"] = kVersion;
  m["command"] = c.command;
  m["config"] = c.cfg.source.string();
  m["config_hash"] = config_hash(c.cfg.text);
  m["seeds"] = Json::object();
  for (const auto& [k, v] : c.seeds) m["seeds"][k] = v;
  m["threads"] = c.threads;
  m["started_at"] = started_at;
  m["wall_time_seconds"] = seconds;
  m["outputs"] = Json::object();
  for (const auto& name : c.out.names()) {
    std::ifstream in(c.out.dir() / name, std::ios::binary);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    m["outputs"][name] = hex64(Rng::hash(bytes.str()));
  }
  std::ofstream(c.out.dir() / "manifest.json", std::ios::binary | std::ios::trunc) << m.dump(2) << '\n';
}

void record_seeds(const ExperimentConfig& cfg, std::map<std::string, std::uint64_t>& seeds) {
  if (cfg.cci && !cfg.input.dataset) seeds["cci"] = cfg.cci->seed;
  if (cfg.embed && !cfg.input.images) seeds["embed"] = cfg.embed->seed;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [k, _] : commands()) n.push_back(k);
    return n;
  }();
  return names;
}

int run(const std::string& subcommand, const RunOptions& options, std::ostream& out,
        std::ostream& err) {
  const auto it = commands().find(subcommand);
  if (it == commands().end()) {
    err << "error: unknown subcommand '" << subcommand << "'\n";
    return kExitConfig;
  }
  ExperimentConfig cfg;
  try {
    cfg = load_config(options.config);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  fs::path dir = cfg.output.dir;
  if (const char* env = std::getenv("JOINTSPACE_OUT_DIR"); env && *env) dir = env;
  if (options.out) dir = *options.out;

  const auto started_at = utc_now();
  const auto start = std::chrono::steady_clock::now();
  try {
    Outputs outputs(dir);
    Context ctx{cfg, subcommand, std::max(1u, options.threads), outputs, {}};
    record_seeds(cfg, ctx.seeds);
    it->second(ctx);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(ctx, started_at, seconds);
    out << subcommand << ": wrote " << outputs.names().size() + 1 << " files to " << dir.string()
        << '\n';
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    err << "error [" << e.name() << "]: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error [RuntimeError]: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace jointspace::cli
