#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace jointspace {

class Rng;

enum class DomainTag { Image, Text };

std::string_view to_string(DomainTag tag);
DomainTag domain_from_string(std::string_view text);

using LabelSet = std::set<std::string>;

// Sorted labels joined with '|'. Used as the class key of a point.
std::string label_key(const LabelSet& labels);

inline constexpr double kUnitNormTolerance = 1e-9;
inline constexpr double kMinNorm = 1e-12;

struct PointInfo {
  std::string id;
  DomainTag domain = DomainTag::Image;
  LabelSet labels;

  friend bool operator==(const PointInfo&, const PointInfo&) = default;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// An ordered, immutable cloud of d-dimensional points with ids, domain tags
// and label sets. Sets built by `on_sphere` (the default for everything the
// pipeline produces) hold unit vectors only; `free_space` sets carry
// arbitrary vectors and exist for rigid transforms applied without
// re-projection.
class EmbeddingSet {
 public:
  enum class Geometry { Sphere, Free };

  EmbeddingSet() = default;

  // Validates ids, dimension and (for spheres) unit norm.
  static EmbeddingSet on_sphere(std::size_t dim, std::vector<PointInfo> points,
                                std::vector<double> row_major);
  static EmbeddingSet free_space(std::size_t dim, std::vector<PointInfo> points,
                                 std::vector<double> row_major);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  Geometry geometry() const noexcept { return geometry_; }
  bool is_on_sphere() const noexcept { return geometry_ == Geometry::Sphere; }

  const PointInfo& point(std::size_t i) const { return points_.at(i); }
  const std::vector<PointInfo>& points() const noexcept { return points_; }
  const std::string& id(std::size_t i) const { return points_.at(i).id; }
  DomainTag domain(std::size_t i) const { return points_.at(i).domain; }
  const LabelSet& labels(std::size_t i) const { return points_.at(i).labels; }

  std::span<const double> vector(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  const std::vector<double>& data() const noexcept { return data_; }
  Eigen::Map<const RowMatrix> matrix() const {
    return {data_.data(), static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dim_)};
  }

  std::optional<std::size_t> find(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;  // throws UnknownId

  // Same metadata, new vectors.
  EmbeddingSet with_vectors(std::vector<double> row_major, Geometry geometry) const;

  friend bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
    return a.dim_ == b.dim_ && a.geometry_ == b.geometry_ && a.points_ == b.points_ &&
           a.data_ == b.data_;
  }

 private:
  EmbeddingSet(std::size_t dim, Geometry geometry, std::vector<PointInfo> points,
               std::vector<double> data);

  std::size_t dim_ = 0;
  Geometry geometry_ = Geometry::Sphere;
  std::vector<PointInfo> points_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Pairs of (image id, text id). A text id appears at most once.
struct CorrespondenceMap {
  std::vector<std::pair<std::string, std::string>> pairs;

  bool empty() const noexcept { return pairs.empty(); }
  std::size_t size() const noexcept { return pairs.size(); }
};

// Every image id exists in `images`, every text id in `texts`, and no text id
// repeats. Throws UnknownId / IdCollision.
void validate(const CorrespondenceMap& corr, const EmbeddingSet& images,
              const EmbeddingSet& texts);

// Returns (index in a, index in b) per pair. `a`/`b` may be given in either
// order: (images, texts) or (texts, images).
std::vector<std::pair<std::size_t, std::size_t>> resolve_pairs(const CorrespondenceMap& corr,
                                                                const EmbeddingSet& a,
                                                                const EmbeddingSet& b);

// Unit-normalizes each vector. Without `infos`, points get ids "0", "1", ...
// and the Image tag. Throws ZeroVector for norms below 1e-12.
EmbeddingSet normalize_to_sphere(const std::vector<std::vector<double>>& vectors,
                                 std::vector<PointInfo> infos = {});

void normalize_in_place(std::span<double> v);

double dot(std::span<const double> u, std::span<const double> v);

// Angle between unit vectors, radians in [0, pi]. Computed as
// 2 atan2(|u - v|, |u + v|), which equals arccos(u . v) on the sphere.
double great_circle_distance(std::span<const double> u, std::span<const double> v);

// Points a then b, tags preserved. Throws DimensionMismatch / IdCollision.
EmbeddingSet merge(const EmbeddingSet& a, const EmbeddingSet& b);

// `count` points drawn uniformly on the unit sphere. Empty `infos` gives
// ids "0", "1", ... tagged Image.
EmbeddingSet random_sphere_points(std::size_t count, std::size_t dim, Rng& rng,
                                  std::vector<PointInfo> infos = {});

// `<stem>.emb` holds an 8-byte magic, u64 count, u64 dim, then count*dim
// float64 values, all little-endian. `<stem>.emb.json` holds the metadata.
void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& emb_path);
EmbeddingSet load_embeddings(const std::filesystem::path& emb_path);

inline constexpr int kEmbeddingFormatVersion = 1;

}  // namespace jointspace
