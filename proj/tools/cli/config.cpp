#include "config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "jointspace/errors.hpp"
#include "jointspace/random.hpp"

namespace jointspace::cli {

namespace {

// Typed access to one mapping node; remembers which keys were read so the
// rest can be rejected as unknown.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (!node_.IsMap() && !node_.IsNull()) throw ConfigError(path_, "expected a mapping");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.IsMap() && node_[key] && !node_[key].IsNull();
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    return has(key) ? convert<T>(key) : fallback;
  }

  template <typename T>
  std::optional<T> maybe(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return convert<T>(key);
  }

  template <typename T>
  T require(const std::string& key) {
    if (!has(key)) throw ConfigError(field(key), "required");
    return convert<T>(key);
  }

  std::vector<double> list(const std::string& key) {
    if (!has(key)) return {};
    const auto n = node_[key];
    if (!n.IsSequence()) throw ConfigError(field(key), "expected a list of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < n.size(); ++i) {
      try {
        out.push_back(n[i].as<double>());
      } catch (const YAML::Exception&) {
        throw ConfigError(field(key) + "[" + std::to_string(i) + "]", "expected a number");
      }
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& key) {
    if (!has(key)) return {};
    const auto n = node_[key];
    if (!n.IsSequence()) throw ConfigError(field(key), "expected a list of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(n[i].as<std::string>());
    return out;
  }

  void finish() const {
    if (!node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError(field(key), "unknown key");
    }
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  template <typename T>
  T convert(const std::string& key) {
    const auto n = node_[key];
    if (!n.IsScalar()) throw ConfigError(field(key), "expected a scalar");
    try {
      if constexpr (std::is_same_v<T, bool> || std::is_floating_point_v<T> ||
                    std::is_same_v<T, std::string>) {
        return n.as<T>();
      } else {
        // Parse signed first so that negative counts are reported instead of
        // wrapping around.
        const auto scalar = n.Scalar();
        if (!scalar.empty() && scalar.front() == '-') throw ConfigError(field(key), "must be non-negative");
        return n.as<T>();
      }
    } catch (const YAML::Exception&) {
      throw ConfigError(field(key), "cannot read value '" + n.Scalar() + "'");
    }
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename T>
void positive(const std::string& path, T value) {
  if (!(value > T{0})) throw ConfigError(path, "must be positive");
}

CciSection read_cci(Section s) {
  CciSection c;
  c.iterations = s.get("iterations", c.iterations);
  c.branching = s.get("branching", c.branching);
  c.seed = s.require<std::uint64_t>("seed");
  c.min_objects = s.get("min_objects", c.min_objects);
  c.max_objects = s.get("max_objects", c.max_objects);
  c.object_cap = s.get("object_cap", c.object_cap);
  s.finish();
  positive(s.field("branching"), c.branching);
  positive(s.field("min_objects"), c.min_objects);
  if (c.max_objects < c.min_objects) throw ConfigError(s.field("max_objects"), "below min_objects");
  if (c.object_cap < c.max_objects) throw ConfigError(s.field("object_cap"), "below max_objects");
  return c;
}

EmbedSection read_embed(Section s) {
  EmbedSection e;
  e.dim = s.get("dim", e.dim);
  e.noise_sigma = s.get("noise_sigma", e.noise_sigma);
  e.seed = s.require<std::uint64_t>("seed");
  e.text_rotation = s.get("text_rotation", e.text_rotation);
  s.finish();
  positive(s.field("dim"), e.dim);
  if (!(e.noise_sigma >= 0.0)) throw ConfigError(s.field("noise_sigma"), "must be non-negative");
  return e;
}

AlignSection read_align(Section s) {
  AlignSection a;
  const auto method = s.get<std::string>("method", "procrustes");
  try {
    a.method = align_method_from_string(method);
  } catch (const Error&) {
    throw ConfigError(s.field("method"), "expected verbatim or procrustes, got '" + method + "'");
  }
  const auto move = s.get<std::string>("move", "text");
  if (move == "text") {
    a.move = MoveSide::Text;
  } else if (move == "image") {
    a.move = MoveSide::Image;
  } else {
    throw ConfigError(s.field("move"), "expected image or text, got '" + move + "'");
  }
  a.renormalize = s.get("renormalize", a.renormalize);
  s.finish();
  return a;
}

GraphSection read_graph(Section s) {
  GraphSection g;
  g.epsilon = s.maybe<double>("epsilon");
  g.target_edge_ratio = s.maybe<double>("target_edge_ratio");
  g.thresholds = s.list("thresholds");
  g.edge_ratios = s.list("edge_ratios");
  s.finish();
  if (g.epsilon && g.target_edge_ratio) {
    throw ConfigError(s.field("epsilon"), "give either epsilon or target_edge_ratio, not both");
  }
  if (g.epsilon && !(*g.epsilon >= 0.0)) throw ConfigError(s.field("epsilon"), "must be non-negative");
  if (g.target_edge_ratio) positive(s.field("target_edge_ratio"), *g.target_edge_ratio);
  if (!g.thresholds.empty() && !g.edge_ratios.empty()) {
    throw ConfigError(s.field("thresholds"), "give either thresholds or edge_ratios, not both");
  }
  for (std::size_t i = 0; i < g.thresholds.size(); ++i) {
    if (!(g.thresholds[i] >= 0.0)) {
      throw ConfigError(s.field("thresholds") + "[" + std::to_string(i) + "]", "must be non-negative");
    }
    if (i > 0 && g.thresholds[i] < g.thresholds[i - 1]) {
      throw ConfigError(s.field("thresholds"), "must be ascending");
    }
  }
  for (std::size_t i = 0; i < g.edge_ratios.size(); ++i) {
    positive(s.field("edge_ratios") + "[" + std::to_string(i) + "]", g.edge_ratios[i]);
  }
  return g;
}

LabelSection read_label(Section s) {
  LabelSection l;
  auto& p = l.protocol;
  p.n_way = s.get("n_way", p.n_way);
  p.k_shot = s.get("k_shot", p.k_shot);
  p.knn_k = s.get("knn_k", p.knn_k);
  p.seed = s.require<std::uint64_t>("seed");
  const auto mode = s.get<std::string>("retrievability_mode", "graph_reachability");
  try {
    p.retrievability_mode = retrievability_mode_from_string(mode);
  } catch (const Error&) {
    throw ConfigError(s.field("retrievability_mode"),
                      "expected euclidean_threshold or graph_reachability, got '" + mode + "'");
  }
  p.multi_label = s.get("multi_label", p.multi_label);
  s.finish();
  positive(s.field("n_way"), p.n_way);
  positive(s.field("k_shot"), p.k_shot);
  positive(s.field("knn_k"), p.knn_k);
  return l;
}

LossSection read_loss(Section s) {
  LossSection l;
  l.steps = s.get("steps", l.steps);
  l.lr = s.get("lr", l.lr);
  l.batch_size = s.get("batch_size", l.batch_size);
  l.seed = s.require<std::uint64_t>("seed");
  s.finish();
  if (!(l.lr >= 0.0)) throw ConfigError(s.field("lr"), "must be non-negative");
  positive(s.field("batch_size"), l.batch_size);
  return l;
}

SyntheticSection read_synthetic(Section s) {
  SyntheticSection y;
  y.kind = s.get<std::string>("kind", y.kind);
  y.points_per_class = s.get("points_per_class", y.points_per_class);
  y.texts_per_class = s.get("texts_per_class", y.texts_per_class);
  y.dim = s.get("dim", y.dim);
  y.chart_scale = s.get("chart_scale", y.chart_scale);
  y.noise = s.get("noise", y.noise);
  y.arm_offset = s.get("arm_offset", y.arm_offset);
  y.text_jitter = s.get("text_jitter", y.text_jitter);
  y.text_rotation = s.get("text_rotation", y.text_rotation);
  y.seed = s.require<std::uint64_t>("seed");
  s.finish();
  if (y.kind != "arcs") throw ConfigError(s.field("kind"), "only 'arcs' is supported");
  positive(s.field("points_per_class"), y.points_per_class);
  if (y.texts_per_class > y.points_per_class) {
    throw ConfigError(s.field("texts_per_class"), "exceeds points_per_class");
  }
  if (y.dim < 3) throw ConfigError(s.field("dim"), "must be at least 3");
  return y;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

InputSection read_input(Section s, const std::filesystem::path& base) {
  InputSection in;
  if (auto v = s.maybe<std::string>("dataset")) in.dataset = resolve(base, *v);
  if (auto v = s.maybe<std::string>("images")) in.images = resolve(base, *v);
  if (auto v = s.maybe<std::string>("texts")) in.texts = resolve(base, *v);
  s.finish();
  if (in.texts && !in.images) throw ConfigError(s.field("texts"), "needs input.images as well");
  return in;
}

OutputSection read_output(Section s) {
  OutputSection o;
  o.dir = s.get<std::string>("dir", o.dir.string());
  if (s.has("formats")) {
    o.json = o.csv = false;
    for (const auto& f : s.strings("formats")) {
      if (f == "json") {
        o.json = true;
      } else if (f == "csv") {
        o.csv = true;
      } else {
        throw ConfigError(s.field("formats"), "unknown format '" + f + "'");
      }
    }
  }
  o.paths_limit = s.get("paths_limit", o.paths_limit);
  s.finish();
  return o;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("", std::string("not valid YAML: ") + e.what());
  }
  ExperimentConfig cfg;
  cfg.text = text;
  Section top(root, "");
  if (top.has("cci")) cfg.cci = read_cci(Section(root["cci"], "cci"));
  if (top.has("embed")) cfg.embed = read_embed(Section(root["embed"], "embed"));
  if (top.has("align")) cfg.align = read_align(Section(root["align"], "align"));
  if (top.has("graph")) cfg.graph = read_graph(Section(root["graph"], "graph"));
  if (top.has("label")) cfg.label = read_label(Section(root["label"], "label"));
  if (top.has("loss")) cfg.loss = read_loss(Section(root["loss"], "loss"));
  if (top.has("synthetic")) cfg.synthetic = read_synthetic(Section(root["synthetic"], "synthetic"));
  if (top.has("input")) cfg.input = read_input(Section(root["input"], "input"), base_dir);
  if (top.has("output")) cfg.output = read_output(Section(root["output"], "output"));
  top.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  auto cfg = parse_config(text.str(), path.parent_path());
  cfg.source = path;
  return cfg;
}

std::string config_hash(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(Rng::hash(text)));
  return buf;
}

}  // namespace jointspace::cli
