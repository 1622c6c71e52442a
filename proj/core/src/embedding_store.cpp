#include "jointspace/embedding_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "jointspace/errors.hpp"
#include "jointspace/random.hpp"

namespace jointspace {

namespace {

constexpr std::array<char, 8> kMagic = {'J', 'S', 'E', 'M', 'B', '\0', '\0', '\1'};
constexpr std::uint64_t kHeaderBytes = 8 + 8 + 8;

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= std::uint64_t{p[b]} << (8 * b);
  return v;
}

std::filesystem::path sidecar_path(const std::filesystem::path& emb_path) {
  return std::filesystem::path(emb_path.string() + ".json");
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

}  // namespace

std::string_view to_string(DomainTag tag) {
  return tag == DomainTag::Image ? "image" : "text";
}

DomainTag domain_from_string(std::string_view text) {
  if (text == "image") return DomainTag::Image;
  if (text == "text") return DomainTag::Text;
  throw InvalidArgument("unknown domain tag '" + std::string(text) + "'");
}

std::string label_key(const LabelSet& labels) {
  std::string key;
  for (const auto& label : labels) {
    if (!key.empty()) key += '|';
    key += label;
  }
  return key;
}

EmbeddingSet::EmbeddingSet(std::size_t dim, Geometry geometry, std::vector<PointInfo> points,
                           std::vector<double> data)
    : dim_(dim), geometry_(geometry), points_(std::move(points)), data_(std::move(data)) {
  if (dim_ == 0) throw DimensionMismatch("embedding dimension must be positive");
  if (data_.size() != points_.size() * dim_) {
    throw DimensionMismatch("expected " + std::to_string(points_.size() * dim_) +
                            " values for " + std::to_string(points_.size()) +
                            " points of dim " + std::to_string(dim_) + ", got " +
                            std::to_string(data_.size()));
  }
  index_.reserve(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!index_.emplace(points_[i].id, i).second) {
      throw IdCollision("duplicate id '" + points_[i].id + "'");
    }
  }
  for (double x : data_) {
    if (!std::isfinite(x)) throw InvalidArgument("embedding contains a non-finite value");
  }
  if (geometry_ == Geometry::Sphere) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const double n = norm(vector(i));
      if (std::abs(n - 1.0) > kUnitNormTolerance) {
        throw NotNormalized("point '" + points_[i].id + "' has norm " + std::to_string(n));
      }
    }
  }
}

EmbeddingSet EmbeddingSet::on_sphere(std::size_t dim, std::vector<PointInfo> points,
                                     std::vector<double> row_major) {
  return EmbeddingSet(dim, Geometry::Sphere, std::move(points), std::move(row_major));
}

EmbeddingSet EmbeddingSet::free_space(std::size_t dim, std::vector<PointInfo> points,
                                      std::vector<double> row_major) {
  return EmbeddingSet(dim, Geometry::Free, std::move(points), std::move(row_major));
}

std::optional<std::size_t> EmbeddingSet::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t EmbeddingSet::index_of(std::string_view id) const {
  if (auto i = find(id)) return *i;
  throw UnknownId("no point with id '" + std::string(id) + "'");
}

EmbeddingSet EmbeddingSet::with_vectors(std::vector<double> row_major, Geometry geometry) const {
  return EmbeddingSet(dim_, geometry, points_, std::move(row_major));
}

void validate(const CorrespondenceMap& corr, const EmbeddingSet& images,
              const EmbeddingSet& texts) {
  std::unordered_set<std::string> seen_text;
  for (const auto& [image_id, text_id] : corr.pairs) {
    if (!images.find(image_id)) throw UnknownId("image id '" + image_id + "' not in set");
    if (!texts.find(text_id)) throw UnknownId("text id '" + text_id + "' not in set");
    if (!seen_text.insert(text_id).second) {
      throw IdCollision("text id '" + text_id + "' appears in more than one pair");
    }
  }
}

std::vector<std::pair<std::size_t, std::size_t>> resolve_pairs(const CorrespondenceMap& corr,
                                                                const EmbeddingSet& a,
                                                                const EmbeddingSet& b) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch("paired sets have dims " + std::to_string(a.dim()) + " and " +
                            std::to_string(b.dim()));
  }
  const auto resolve = [&](const EmbeddingSet& first, const EmbeddingSet& second,
                           bool swapped) -> std::optional<std::vector<std::pair<std::size_t, std::size_t>>> {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(corr.size());
    for (const auto& [image_id, text_id] : corr.pairs) {
      const auto i = first.find(swapped ? text_id : image_id);
      const auto j = second.find(swapped ? image_id : text_id);
      if (!i || !j) return std::nullopt;
      out.emplace_back(*i, *j);
    }
    return out;
  };
  if (auto forward = resolve(a, b, false)) {
    validate(corr, a, b);
    return *forward;
  }
  if (auto backward = resolve(a, b, true)) {
    validate(corr, b, a);
    return *backward;
  }
  throw UnknownId("correspondence ids do not resolve against the given sets");
}

double dot(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw DimensionMismatch("vectors have dims " + std::to_string(u.size()) + " and " +
                            std::to_string(v.size()));
  }
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * v[k];
  return s;
}

double great_circle_distance(std::span<const double> u, std::span<const double> v) {
  // Half-chord form: exact 0 for identical inputs and well conditioned near 0
  // and pi, where arccos of a rounded dot product is not.
  double diff = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    diff += (u[i] - v[i]) * (u[i] - v[i]);
    sum += (u[i] + v[i]) * (u[i] + v[i]);
  }
  return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
}

void normalize_in_place(std::span<double> v) {
  const double n = norm(v);
  if (!(n >= kMinNorm)) throw ZeroVector("cannot normalize a vector of norm " + std::to_string(n));
  for (double& x : v) x /= n;
}

EmbeddingSet normalize_to_sphere(const std::vector<std::vector<double>>& vectors,
                                 std::vector<PointInfo> infos) {
  if (vectors.empty()) throw InvalidArgument("no vectors to normalize");
  if (infos.empty()) {
    infos.reserve(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      infos.push_back({std::to_string(i), DomainTag::Image, {}});
    }
  }
  if (infos.size() != vectors.size()) {
    throw LengthMismatch(std::to_string(vectors.size()) + " vectors but " +
                         std::to_string(infos.size()) + " point records");
  }
  const std::size_t dim = vectors.front().size();
  std::vector<double> data;
  data.reserve(vectors.size() * dim);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != dim) {
      throw DimensionMismatch("vector " + std::to_string(i) + " has dim " +
                              std::to_string(vectors[i].size()) + ", expected " +
                              std::to_string(dim));
    }
    const auto begin = data.size();
    data.insert(data.end(), vectors[i].begin(), vectors[i].end());
    normalize_in_place(std::span<double>(data).subspan(begin, dim));
  }
  return EmbeddingSet::on_sphere(dim, std::move(infos), std::move(data));
}

EmbeddingSet merge(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.dim() != b.dim()) {
    throw DimensionMismatch("cannot merge dims " + std::to_string(a.dim()) + " and " +
                            std::to_string(b.dim()));
  }
  std::vector<PointInfo> points = a.points();
  points.insert(points.end(), b.points().begin(), b.points().end());
  std::vector<double> data = a.data();
  data.insert(data.end(), b.data().begin(), b.data().end());
  const bool sphere = a.is_on_sphere() && b.is_on_sphere();
  return sphere ? EmbeddingSet::on_sphere(a.dim(), std::move(points), std::move(data))
                : EmbeddingSet::free_space(a.dim(), std::move(points), std::move(data));
}

EmbeddingSet random_sphere_points(std::size_t count, std::size_t dim, Rng& rng,
                                  std::vector<PointInfo> infos) {
  if (infos.empty()) {
    for (std::size_t i = 0; i < count; ++i) {
      infos.push_back({std::to_string(i), DomainTag::Image, {}});
    }
  }
  if (infos.size() != count) {
    throw LengthMismatch("random_sphere_points needs one point record per vector");
  }
  std::vector<double> data(count * dim);
  for (std::size_t i = 0; i < count; ++i) {
    auto row = std::span<double>(data).subspan(i * dim, dim);
    do {
      for (double& x : row) x = rng.normal();
    } while (norm(row) < kMinNorm);
    normalize_in_place(row);
  }
  return EmbeddingSet::on_sphere(dim, std::move(infos), std::move(data));
}

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& emb_path) {
  std::string blob;
  blob.reserve(kHeaderBytes + set.data().size() * 8);
  blob.append(kMagic.data(), kMagic.size());
  put_u64(blob, set.size());
  put_u64(blob, set.dim());
  for (double x : set.data()) put_u64(blob, std::bit_cast<std::uint64_t>(x));

  std::ofstream out(emb_path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot open '" + emb_path.string() + "' for writing");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));

  nlohmann::ordered_json meta;
  meta["version"] = kEmbeddingFormatVersion;
  meta["dim"] = set.dim();
  meta["count"] = set.size();
  meta["geometry"] = set.is_on_sphere() ? "sphere" : "free";
  auto& points = meta["points"] = nlohmann::ordered_json::array();
  for (const auto& p : set.points()) {
    nlohmann::ordered_json record;
    record["id"] = p.id;
    record["domain"] = to_string(p.domain);
    record["labels"] = p.labels;
    points.push_back(std::move(record));
  }
  std::ofstream side(sidecar_path(emb_path), std::ios::trunc);
  if (!side) throw InvalidArgument("cannot open sidecar for '" + emb_path.string() + "'");
  side << meta.dump(2) << '\n';
}

EmbeddingSet load_embeddings(const std::filesystem::path& emb_path) {
  std::ifstream side(sidecar_path(emb_path));
  if (!side) throw MalformedFile("missing metadata '" + sidecar_path(emb_path).string() + "'", 0);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(side);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedFile("metadata is not valid JSON: " + std::string(e.what()), e.byte);
  }

  std::size_t dim = 0;
  std::size_t count = 0;
  bool sphere = true;
  std::vector<PointInfo> points;
  try {
    if (!meta.contains("version")) throw MalformedFile("metadata lacks 'version'", 0);
    if (meta.at("version").get<int>() != kEmbeddingFormatVersion) {
      throw MalformedFile("unsupported metadata version " + meta.at("version").dump(), 0);
    }
    dim = meta.at("dim").get<std::size_t>();
    count = meta.at("count").get<std::size_t>();
    sphere = meta.value("geometry", std::string("sphere")) == "sphere";
    for (const auto& record : meta.at("points")) {
      PointInfo p;
      p.id = record.at("id").get<std::string>();
      p.domain = domain_from_string(record.at("domain").get<std::string>());
      p.labels = record.value("labels", LabelSet{});
      points.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile("metadata schema error: " + std::string(e.what()), 0);
  }
  if (points.size() != count) {
    throw MalformedFile("metadata lists " + std::to_string(points.size()) +
                            " points but count is " + std::to_string(count),
                        0);
  }

  std::ifstream in(emb_path, std::ios::binary);
  if (!in) throw MalformedFile("cannot open '" + emb_path.string() + "'", 0);
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  if (blob.size() < kHeaderBytes) throw MalformedFile("truncated header", blob.size());
  if (std::memcmp(blob.data(), kMagic.data(), kMagic.size()) != 0) {
    throw MalformedFile("bad magic", 0);
  }
  const std::uint64_t file_count = get_u64(bytes + 8);
  const std::uint64_t file_dim = get_u64(bytes + 16);
  if (file_dim != dim) {
    throw DimensionMismatch("vector file has dim " + std::to_string(file_dim) +
                            " but metadata says " + std::to_string(dim));
  }
  if (file_count != count) {
    throw MalformedFile("vector file holds " + std::to_string(file_count) +
                            " rows but metadata says " + std::to_string(count),
                        8);
  }
  const std::uint64_t expected = kHeaderBytes + count * dim * 8;
  if (blob.size() < expected) {
    // Report the first byte of the first incomplete value.
    const std::uint64_t complete = (blob.size() - kHeaderBytes) / 8;
    throw MalformedFile("truncated vector data", kHeaderBytes + complete * 8);
  }
  if (blob.size() > expected) throw MalformedFile("trailing bytes after vector data", expected);

  std::vector<double> data(count * dim);
  for (std::size_t k = 0; k < data.size(); ++k) {
    data[k] = std::bit_cast<double>(get_u64(bytes + kHeaderBytes + 8 * k));
  }
  return sphere ? EmbeddingSet::on_sphere(dim, std::move(points), std::move(data))
                : EmbeddingSet::free_space(dim, std::move(points), std::move(data));
}

}  // namespace jointspace
