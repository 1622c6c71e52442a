#include "jointspace/cci_world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "jointspace/errors.hpp"

namespace jointspace::cci {

namespace {

constexpr std::array<std::string_view, 3> kShapes = {"cube", "sphere", "cylinder"};
constexpr std::array<std::string_view, 8> kColors = {"gray",  "red",    "blue", "green",
                                                     "brown", "purple", "cyan", "yellow"};
constexpr std::array<std::string_view, 2> kMaterials = {"rubber", "metal"};
constexpr std::array<std::string_view, 2> kSizes = {"small", "large"};

// Offsets of each attribute block inside the one-hot encoding.
constexpr std::array<std::size_t, 4> kBlockOffset = {0, 3, 11, 13};

std::span<const std::string_view> vocabulary(Attribute attribute) {
  switch (attribute) {
    case Attribute::Shape: return kShapes;
    case Attribute::Color: return kColors;
    case Attribute::Material: return kMaterials;
    case Attribute::Size: return kSizes;
  }
  return {};
}

std::string encode(const SceneObject& o) {
  std::string s(4, '0');
  for (auto a : kAttributes) s[static_cast<std::size_t>(a)] = static_cast<char>('0' + o.get(a));
  return s;
}

std::string join_sorted(std::vector<std::string> parts) {
  std::sort(parts.begin(), parts.end());
  std::string out;
  for (const auto& p : parts) {
    out += p;
    out += ';';
  }
  return out;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

nlohmann::ordered_json object_json(const SceneObject& o) {
  nlohmann::ordered_json j;
  for (auto a : kAttributes) j[std::string(attribute_name(a))] = value_name(a, o.get(a));
  return j;
}

SceneObject object_from_json(const nlohmann::json& j) {
  SceneObject o;
  for (auto a : kAttributes) {
    o.set(a, value_from_string(a, j.at(std::string(attribute_name(a))).get<std::string>()));
  }
  return o;
}

std::size_t count_differences(const SceneObject& a, const SceneObject& b) {
  std::size_t n = 0;
  for (auto attr : kAttributes) n += a.get(attr) != b.get(attr);
  return n;
}

SceneObject random_object(Rng& rng) {
  SceneObject o;
  for (auto a : kAttributes) {
    o.set(a, static_cast<std::uint8_t>(rng.uniform_index(vocabulary_size(a))));
  }
  return o;
}

}  // namespace

std::size_t vocabulary_size(Attribute attribute) { return vocabulary(attribute).size(); }

std::string_view attribute_name(Attribute attribute) {
  switch (attribute) {
    case Attribute::Shape: return "shape";
    case Attribute::Color: return "color";
    case Attribute::Material: return "material";
    case Attribute::Size: return "size";
  }
  return "";
}

Attribute attribute_from_string(std::string_view text) {
  for (auto a : kAttributes) {
    if (attribute_name(a) == text) return a;
  }
  throw InvalidArgument("unknown attribute '" + std::string(text) + "'");
}

std::string_view value_name(Attribute attribute, std::uint8_t value) {
  const auto vocab = vocabulary(attribute);
  if (value >= vocab.size()) throw InvalidArgument("attribute value out of range");
  return vocab[value];
}

std::uint8_t value_from_string(Attribute attribute, std::string_view text) {
  const auto vocab = vocabulary(attribute);
  for (std::size_t v = 0; v < vocab.size(); ++v) {
    if (vocab[v] == text) return static_cast<std::uint8_t>(v);
  }
  throw InvalidArgument("unknown " + std::string(attribute_name(attribute)) + " '" +
                        std::string(text) + "'");
}

std::uint8_t SceneObject::get(Attribute attribute) const {
  switch (attribute) {
    case Attribute::Shape: return static_cast<std::uint8_t>(shape);
    case Attribute::Color: return static_cast<std::uint8_t>(color);
    case Attribute::Material: return static_cast<std::uint8_t>(material);
    case Attribute::Size: return static_cast<std::uint8_t>(size);
  }
  return 0;
}

void SceneObject::set(Attribute attribute, std::uint8_t value) {
  if (value >= vocabulary_size(attribute)) throw InvalidArgument("attribute value out of range");
  switch (attribute) {
    case Attribute::Shape: shape = static_cast<Shape>(value); break;
    case Attribute::Color: color = static_cast<Color>(value); break;
    case Attribute::Material: material = static_cast<Material>(value); break;
    case Attribute::Size: size = static_cast<Size>(value); break;
  }
}

std::string SceneObject::describe() const {
  std::string s;
  for (auto a : {Attribute::Size, Attribute::Color, Attribute::Material, Attribute::Shape}) {
    if (!s.empty()) s += ' ';
    s += value_name(a, get(a));
  }
  return s;
}

std::string fingerprint(const Scene& scene) {
  std::vector<std::string> parts;
  parts.reserve(scene.objects.size());
  for (const auto& o : scene.objects) parts.push_back(encode(o));
  return join_sorted(std::move(parts));
}

std::optional<std::size_t> CciDataset::find(std::string_view scene_id) const {
  const auto it = index_.find(std::string(scene_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t CciDataset::index_of(std::string_view scene_id) const {
  if (auto i = find(scene_id)) return *i;
  throw UnknownId("no scene '" + std::string(scene_id) + "'");
}

void CciDataset::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (!index_.emplace(scenes[i].id, i).second) {
      throw IdCollision("duplicate scene id '" + scenes[i].id + "'");
    }
  }
}

Scene random_scene(Rng& rng, std::size_t min_objects, std::size_t max_objects) {
  if (min_objects < 1 || min_objects > max_objects) {
    throw InvalidArgument("need 1 <= min_objects <= max_objects");
  }
  const auto count = static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(min_objects), static_cast<std::int64_t>(max_objects)));
  Scene scene;
  scene.objects.reserve(count);
  for (std::size_t i = 0; i < count; ++i) scene.objects.push_back(random_object(rng));
  return scene;
}

Scene apply_modification(const Scene& scene, const Modification& mod, std::size_t object_cap) {
  Scene out = scene;
  out.id.clear();
  if (const auto* change = std::get_if<ChangeAttribute>(&mod.kind)) {
    if (change->object_index >= scene.objects.size()) {
      throw InvalidModification("object index " + std::to_string(change->object_index) +
                                " out of range for a scene of " +
                                std::to_string(scene.objects.size()) + " objects");
    }
    if (change->new_value >= vocabulary_size(change->attribute)) {
      throw InvalidModification("value out of range for " +
                                std::string(attribute_name(change->attribute)));
    }
    auto& object = out.objects[change->object_index];
    if (object.get(change->attribute) == change->new_value) {
      throw InvalidModification("new " + std::string(attribute_name(change->attribute)) +
                                " equals the old one");
    }
    object.set(change->attribute, change->new_value);
  } else {
    if (scene.objects.size() >= object_cap) {
      throw InvalidModification("scene already holds the maximum of " +
                                std::to_string(object_cap) + " objects");
    }
    out.objects.push_back(std::get<AddObject>(mod.kind).object);
  }
  return out;
}

std::vector<Modification> sample_modifications(const Scene& scene, std::size_t count, Rng& rng,
                                               const std::unordered_set<std::string>& existing,
                                               std::size_t object_cap, std::size_t retry_budget) {
  if (scene.objects.empty()) throw InvalidModification("scene has no objects");
  std::vector<Modification> out;
  std::unordered_set<std::string> chosen;
  const std::string own = fingerprint(scene);
  const bool can_add = scene.objects.size() < object_cap;
  const std::size_t kinds = kAttributes.size() + (can_add ? 1 : 0);
  const std::size_t attempts = retry_budget * std::max<std::size_t>(count, 1);

  for (std::size_t attempt = 0; attempt < attempts && out.size() < count; ++attempt) {
    // Each attribute and "add an object" are equally likely.
    const auto pick = rng.uniform_index(kinds);
    Modification mod;
    if (pick < kAttributes.size()) {
      const auto attribute = kAttributes[pick];
      const auto index = static_cast<std::size_t>(rng.uniform_index(scene.objects.size()));
      const auto old_value = scene.objects[index].get(attribute);
      auto value = static_cast<std::uint8_t>(rng.uniform_index(vocabulary_size(attribute) - 1));
      if (value >= old_value) ++value;
      mod.kind = ChangeAttribute{index, attribute, value};
    } else {
      mod.kind = AddObject{random_object(rng)};
    }
    const Scene child = apply_modification(scene, mod, object_cap);
    const std::string print = fingerprint(child);
    if (print == own || existing.count(print) || !chosen.insert(print).second) continue;
    mod.instruction = render_text(mod, scene);
    out.push_back(std::move(mod));
  }
  if (out.size() < count) {
    throw ExhaustedRetries("found only " + std::to_string(out.size()) + " of " +
                           std::to_string(count) + " unique modifications after " +
                           std::to_string(attempts) + " attempts");
  }
  return out;
}

std::size_t expected_scene_count(std::size_t iterations, std::size_t branching) {
  std::size_t total = 0;
  std::size_t level = 1;
  for (std::size_t i = 0; i <= iterations; ++i) {
    total += level;
    level *= branching;
  }
  return total;
}

CciDataset generate_cci(const GeneratorConfig& config, Rng& rng) {
  if (config.branching < 1) throw InvalidArgument("branching must be at least 1");
  if (config.max_objects > config.object_cap) {
    throw InvalidArgument("root max_objects exceeds the object cap");
  }
  const std::size_t total = expected_scene_count(config.iterations, config.branching);
  char id_buf[32];
  const auto make_id = [&](std::size_t i) {
    std::snprintf(id_buf, sizeof id_buf, "cci_%06zu", i);
    return std::string(id_buf);
  };

  CciDataset data;
  data.scenes.reserve(total);
  std::unordered_set<std::string> seen;
  Scene root = random_scene(rng, config.min_objects, config.max_objects);
  root.id = make_id(0);
  seen.insert(fingerprint(root));
  data.scenes.push_back(std::move(root));
  data.parent.emplace_back();
  data.modification.emplace_back();
  data.iteration.push_back(0);

  std::size_t level_begin = 0;
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    const std::size_t level_end = data.scenes.size();
    for (std::size_t p = level_begin; p < level_end; ++p) {
      const Scene source = data.scenes[p];
      auto mods = sample_modifications(source, config.branching, rng, seen, config.object_cap,
                                       config.retry_budget);
      for (auto& mod : mods) {
        Scene child = apply_modification(source, mod, config.object_cap);
        child.id = make_id(data.scenes.size());
        seen.insert(fingerprint(child));
        data.scenes.push_back(std::move(child));
        data.parent.emplace_back(p);
        data.modification.emplace_back(std::move(mod));
        data.iteration.push_back(it);
      }
    }
    level_begin = level_end;
  }
  data.rebuild_index();
  return data;
}

bool is_reachable(const Scene& a, const Scene& b) {
  auto x = a.objects;
  auto y = b.objects;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::vector<SceneObject> only_a;
  std::vector<SceneObject> only_b;
  std::set_difference(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(only_a));
  std::set_difference(y.begin(), y.end(), x.begin(), x.end(), std::back_inserter(only_b));
  if (only_a.size() == 1 && only_b.size() == 1) {
    return count_differences(only_a.front(), only_b.front()) == 1;
  }
  return (only_a.empty() && only_b.size() == 1) || (only_b.empty() && only_a.size() == 1);
}

std::vector<std::vector<std::size_t>> reachable_neighbor_lists(const CciDataset& dataset) {
  const std::size_t n = dataset.size();
  struct Removal {
    std::size_t scene;
    SceneObject removed;
  };
  std::unordered_map<std::string, std::vector<Removal>> by_signature;
  std::unordered_map<std::string, std::size_t> by_fingerprint;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& objects = dataset.scenes[i].objects;
    std::vector<std::string> parts;
    for (const auto& o : objects) parts.push_back(encode(o));
    by_fingerprint.emplace(join_sorted(parts), i);
    std::vector<SceneObject> distinct = objects;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (const auto& removed : distinct) {
      auto rest = parts;
      rest.erase(std::find(rest.begin(), rest.end(), encode(removed)));
      by_signature[join_sorted(std::move(rest))].push_back({i, removed});
    }
  }

  std::vector<std::vector<std::size_t>> neighbors(n);
  // Rule (a): equal after removing one object each, removed objects one
  // attribute apart.
  for (const auto& [signature, group] : by_signature) {
    for (std::size_t p = 0; p < group.size(); ++p) {
      for (std::size_t q = p + 1; q < group.size(); ++q) {
        if (group[p].scene == group[q].scene) continue;
        if (count_differences(group[p].removed, group[q].removed) == 1) {
          neighbors[group[p].scene].push_back(group[q].scene);
          neighbors[group[q].scene].push_back(group[p].scene);
        }
      }
    }
    // Rule (b): a whole scene equals another scene minus one object.
    if (const auto it = by_fingerprint.find(signature); it != by_fingerprint.end()) {
      for (const auto& r : group) {
        neighbors[r.scene].push_back(it->second);
        neighbors[it->second].push_back(r.scene);
      }
    }
  }
  for (auto& list : neighbors) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return neighbors;
}

std::unordered_set<std::string> reachable_neighbors(const CciDataset& dataset,
                                                    std::string_view scene_id) {
  const auto target = dataset.index_of(scene_id);
  std::unordered_set<std::string> out;
  for (std::size_t j = 0; j < dataset.size(); ++j) {
    if (j != target && is_reachable(dataset.scenes[target], dataset.scenes[j])) {
      out.insert(dataset.scenes[j].id);
    }
  }
  return out;
}

double avg_reachable(const CciDataset& dataset) {
  if (dataset.size() == 0) return 0.0;
  std::size_t total = 0;
  for (const auto& list : reachable_neighbor_lists(dataset)) total += list.size();
  return static_cast<double>(total) / static_cast<double>(dataset.size());
}

std::string render_text(const Modification& mod, const Scene& source) {
  if (const auto* change = std::get_if<ChangeAttribute>(&mod.kind)) {
    const auto& object = source.objects.at(change->object_index);
    return "change the " + std::string(attribute_name(change->attribute)) + " of the " +
           object.describe() + " to " +
           std::string(value_name(change->attribute, change->new_value));
  }
  return "add a " + std::get<AddObject>(mod.kind).object.describe();
}

std::string render_text(const Scene& scene) {
  auto objects = scene.objects;
  std::sort(objects.begin(), objects.end());
  std::string text = "a scene with";
  for (std::size_t i = 0; i < objects.size(); ++i) {
    text += i == 0 ? " a " : (i + 1 == objects.size() ? " and a " : ", a ");
    text += objects[i].describe();
  }
  return text;
}

std::vector<double> scene_embedding(const Scene& scene, std::size_t dim, double noise_sigma,
                                    const Rng& rng, DomainTag domain) {
  if (dim < kEncodingWidth) {
    throw DimensionTooSmall("embedding dim " + std::to_string(dim) + " is below the " +
                            std::to_string(kEncodingWidth) + "-wide attribute encoding");
  }
  if (scene.objects.empty()) throw InvalidArgument("scene has no objects");
  std::vector<double> v(dim, 0.0);
  for (const auto& o : scene.objects) {
    for (auto a : kAttributes) v[kBlockOffset[static_cast<std::size_t>(a)] + o.get(a)] += 1.0;
  }
  normalize_in_place(v);
  if (noise_sigma > 0.0) {
    Rng noise = rng.fork(to_string(domain));
    for (double& x : v) x += noise_sigma * noise.normal();
  }
  normalize_in_place(v);
  return v;
}

TripleSplit retrieval_triples(const CciDataset& dataset) {
  TripleSplit split;
  if (dataset.size() == 0) return split;
  const auto last = *std::max_element(dataset.iteration.begin(), dataset.iteration.end());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!dataset.parent[i]) continue;
    RetrievalTriple t{dataset.scenes[*dataset.parent[i]].id, dataset.modification[i]->instruction,
                      dataset.scenes[i].id};
    (dataset.iteration[i] == last ? split.test : split.train).push_back(std::move(t));
  }
  return split;
}

void save_dataset_jsonl(const CciDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InvalidArgument("cannot open '" + path.string() + "' for writing");
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& scene = dataset.scenes[i];
    nlohmann::ordered_json j;
    j["id"] = scene.id;
    j["iteration"] = dataset.iteration[i];
    j["parent"] = dataset.parent[i] ? nlohmann::ordered_json(dataset.scenes[*dataset.parent[i]].id)
                                    : nlohmann::ordered_json(nullptr);
    if (const auto& mod = dataset.modification[i]) {
      nlohmann::ordered_json m;
      if (const auto* change = std::get_if<ChangeAttribute>(&mod->kind)) {
        m["kind"] = "change_attribute";
        m["object_index"] = change->object_index;
        m["attribute"] = attribute_name(change->attribute);
        m["new_value"] = value_name(change->attribute, change->new_value);
      } else {
        m["kind"] = "add_object";
        m["object"] = object_json(std::get<AddObject>(mod->kind).object);
      }
      j["modification"] = std::move(m);
      j["instruction"] = mod->instruction;
    } else {
      j["modification"] = nullptr;
      j["instruction"] = nullptr;
    }
    auto& objects = j["objects"] = nlohmann::ordered_json::array();
    for (const auto& o : scene.objects) objects.push_back(object_json(o));
    out << j.dump() << '\n';
  }
}

CciDataset load_dataset_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MalformedFile("cannot open '" + path.string() + "'", 0);
  CciDataset data;
  std::vector<std::optional<std::string>> parent_ids;
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    if (line.empty()) {
      offset += 1;
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(line);
      Scene scene;
      scene.id = j.at("id").get<std::string>();
      for (const auto& o : j.at("objects")) scene.objects.push_back(object_from_json(o));
      data.iteration.push_back(j.at("iteration").get<std::size_t>());
      parent_ids.push_back(j.at("parent").is_null()
                               ? std::nullopt
                               : std::optional<std::string>(j.at("parent").get<std::string>()));
      if (j.at("modification").is_null()) {
        data.modification.emplace_back();
      } else {
        const auto& m = j.at("modification");
        Modification mod;
        if (m.at("kind") == "change_attribute") {
          const auto attribute = attribute_from_string(m.at("attribute").get<std::string>());
          mod.kind = ChangeAttribute{m.at("object_index").get<std::size_t>(), attribute,
                                     value_from_string(attribute, m.at("new_value").get<std::string>())};
        } else {
          mod.kind = AddObject{object_from_json(m.at("object"))};
        }
        mod.instruction = j.at("instruction").get<std::string>();
        data.modification.emplace_back(std::move(mod));
      }
      data.scenes.push_back(std::move(scene));
    } catch (const nlohmann::json::exception& e) {
      throw MalformedFile("dataset record: " + std::string(e.what()), offset);
    } catch (const InvalidArgument& e) {
      throw MalformedFile("dataset record: " + std::string(e.what()), offset);
    }
    offset += line.size() + 1;
  }
  data.rebuild_index();
  for (const auto& pid : parent_ids) {
    data.parent.push_back(pid ? std::optional<std::size_t>(data.index_of(*pid)) : std::nullopt);
  }
  return data;
}

void save_triples_csv(const TripleSplit& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InvalidArgument("cannot open '" + path.string() + "' for writing");
  out << "source_id,instruction,target_id,split\n";
  for (const auto* part : {&split.train, &split.test}) {
    const char* name = part == &split.train ? "train" : "test";
    for (const auto& t : *part) {
      out << csv_field(t.source_id) << ',' << csv_field(t.instruction) << ','
          << csv_field(t.target_id) << ',' << name << '\n';
    }
  }
}

}  // namespace jointspace::cci
