#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "jointspace/embedding_store.hpp"
#include "jointspace/random.hpp"

namespace jointspace::cci {

// Closed CLEVR attribute vocabularies.
enum class Shape : std::uint8_t { Cube, Sphere, Cylinder };
enum class Color : std::uint8_t { Gray, Red, Blue, Green, Brown, Purple, Cyan, Yellow };
enum class Material : std::uint8_t { Rubber, Metal };
enum class Size : std::uint8_t { Small, Large };

enum class Attribute : std::uint8_t { Shape, Color, Material, Size };

inline constexpr std::array<Attribute, 4> kAttributes = {Attribute::Shape, Attribute::Color,
                                                         Attribute::Material, Attribute::Size};

std::size_t vocabulary_size(Attribute attribute);
std::string_view attribute_name(Attribute attribute);
Attribute attribute_from_string(std::string_view text);
std::string_view value_name(Attribute attribute, std::uint8_t value);
std::uint8_t value_from_string(Attribute attribute, std::string_view text);

// Width of the one-hot scene encoding: 3 + 8 + 2 + 2.
inline constexpr std::size_t kEncodingWidth = 15;

struct SceneObject {
  Shape shape = Shape::Cube;
  Color color = Color::Gray;
  Material material = Material::Rubber;
  Size size = Size::Small;

  std::uint8_t get(Attribute attribute) const;
  void set(Attribute attribute, std::uint8_t value);

  // "small red rubber cube"
  std::string describe() const;

  friend auto operator<=>(const SceneObject&, const SceneObject&) = default;
};

struct Scene {
  std::string id;
  std::vector<SceneObject> objects;
};

// Canonical serialization of the object multiset; equal iff the scenes hold
// the same objects regardless of order or id.
std::string fingerprint(const Scene& scene);

struct ChangeAttribute {
  std::size_t object_index;
  Attribute attribute;
  std::uint8_t new_value;
};

struct AddObject {
  SceneObject object;
};

struct Modification {
  std::variant<ChangeAttribute, AddObject> kind;
  std::string instruction;
};

inline constexpr std::size_t kDefaultObjectCap = 10;

struct GeneratorConfig {
  std::size_t iterations = 4;
  std::size_t branching = 10;
  std::size_t min_objects = 3;  // root scene
  std::size_t max_objects = 6;  // root scene
  std::size_t object_cap = kDefaultObjectCap;
  std::size_t retry_budget = 1000;  // attempts per requested modification
};

struct CciDataset {
  std::vector<Scene> scenes;  // breadth-first generation order
  std::vector<std::optional<std::size_t>> parent;
  std::vector<std::optional<Modification>> modification;  // from parent
  std::vector<std::size_t> iteration;

  std::size_t size() const noexcept { return scenes.size(); }
  std::size_t index_of(std::string_view scene_id) const;  // throws UnknownId
  std::optional<std::size_t> find(std::string_view scene_id) const;

  void rebuild_index();

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

Scene random_scene(Rng& rng, std::size_t min_objects, std::size_t max_objects);

// Throws InvalidModification for a bad index, a no-op change, or an add past
// `object_cap`.
Scene apply_modification(const Scene& scene, const Modification& mod,
                         std::size_t object_cap = kDefaultObjectCap);

// `count` modifications whose results are pairwise distinct and absent from
// `existing`. Throws ExhaustedRetries after retry_budget * count attempts.
std::vector<Modification> sample_modifications(const Scene& scene, std::size_t count, Rng& rng,
                                               const std::unordered_set<std::string>& existing,
                                               std::size_t object_cap = kDefaultObjectCap,
                                               std::size_t retry_budget = 1000);

// sum_{i=0}^{iterations} branching^i unique scenes, breadth first.
CciDataset generate_cci(const GeneratorConfig& config, Rng& rng);

std::size_t expected_scene_count(std::size_t iterations, std::size_t branching);

// (a) the multisets differ by one object on each side and those two objects
// differ in exactly one attribute; or (b) one multiset is the other plus one
// object.
bool is_reachable(const Scene& a, const Scene& b);

// Reachable neighbours of every scene, via a removal-signature index.
std::vector<std::vector<std::size_t>> reachable_neighbor_lists(const CciDataset& dataset);
std::unordered_set<std::string> reachable_neighbors(const CciDataset& dataset,
                                                    std::string_view scene_id);
double avg_reachable(const CciDataset& dataset);

std::string render_text(const Modification& mod, const Scene& source);
std::string render_text(const Scene& scene);

// Normalized sum of per-object one-hot attribute blocks, zero padded to
// `dim`, plus isotropic Gaussian noise of scale `noise_sigma`, re-normalized.
// The noise stream is keyed by the domain, so image and caption encodings of
// the same scene get independent draws from the same generator.
std::vector<double> scene_embedding(const Scene& scene, std::size_t dim, double noise_sigma,
                                    const Rng& rng, DomainTag domain);

struct RetrievalTriple {
  std::string source_id;
  std::string instruction;
  std::string target_id;
};

struct TripleSplit {
  std::vector<RetrievalTriple> train;  // target iteration below the last
  std::vector<RetrievalTriple> test;   // target iteration equal to the last
};

TripleSplit retrieval_triples(const CciDataset& dataset);

void save_dataset_jsonl(const CciDataset& dataset, const std::filesystem::path& path);
CciDataset load_dataset_jsonl(const std::filesystem::path& path);
void save_triples_csv(const TripleSplit& split, const std::filesystem::path& path);

}  // namespace jointspace::cci
