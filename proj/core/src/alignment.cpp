#include "jointspace/alignment.hpp"

#include <cmath>

#include <Eigen/SVD>
#include <Eigen/LU>
#include <nlohmann/json.hpp>

#include "jointspace/errors.hpp"

namespace jointspace {

namespace {

constexpr double kOrthogonalityTolerance = 1e-9;
// Singular values below this fraction of the largest count as zero.
constexpr double kRankTolerance = 1e-10;

struct PairedClouds {
  Eigen::MatrixXd first;   // n x d
  Eigen::MatrixXd second;  // n x d
};

PairedClouds paired_rows(const EmbeddingSet& a, const EmbeddingSet& b,
                         const CorrespondenceMap& corr) {
  if (corr.empty()) throw InvalidArgument("correspondence map is empty");
  const auto pairs = resolve_pairs(corr, a, b);
  const auto n = static_cast<Eigen::Index>(pairs.size());
  const auto d = static_cast<Eigen::Index>(a.dim());
  PairedClouds out{Eigen::MatrixXd(n, d), Eigen::MatrixXd(n, d)};
  const auto ma = a.matrix();
  const auto mb = b.matrix();
  for (Eigen::Index r = 0; r < n; ++r) {
    out.first.row(r) = ma.row(static_cast<Eigen::Index>(pairs[r].first));
    out.second.row(r) = mb.row(static_cast<Eigen::Index>(pairs[r].second));
  }
  return out;
}

Eigen::Index numerical_rank(const Eigen::VectorXd& singular_values) {
  if (singular_values.size() == 0 || singular_values(0) <= 0.0) return 0;
  Eigen::Index rank = 0;
  for (Eigen::Index k = 0; k < singular_values.size(); ++k) {
    if (singular_values(k) > kRankTolerance * singular_values(0)) ++rank;
  }
  return rank;
}

}  // namespace

std::string_view to_string(AlignMethod method) {
  return method == AlignMethod::Verbatim ? "verbatim" : "procrustes";
}

AlignMethod align_method_from_string(std::string_view text) {
  if (text == "verbatim") return AlignMethod::Verbatim;
  if (text == "procrustes") return AlignMethod::Procrustes;
  throw InvalidArgument("unknown alignment method '" + std::string(text) + "'");
}

RigidTransform::RigidTransform(Eigen::MatrixXd rotation, Eigen::VectorXd translation)
    : rotation_(std::move(rotation)), translation_(std::move(translation)) {
  const auto d = translation_.size();
  if (rotation_.rows() != d || rotation_.cols() != d) {
    throw DimensionMismatch("rotation is " + std::to_string(rotation_.rows()) + "x" +
                            std::to_string(rotation_.cols()) + " but translation has dim " +
                            std::to_string(d));
  }
  const Eigen::MatrixXd defect = rotation_.transpose() * rotation_ - Eigen::MatrixXd::Identity(d, d);
  if (d > 0 && defect.cwiseAbs().maxCoeff() >= kOrthogonalityTolerance) {
    throw InvalidArgument("rotation is not orthogonal (defect " +
                          std::to_string(defect.cwiseAbs().maxCoeff()) + ")");
  }
}

RigidTransform RigidTransform::identity(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return {Eigen::MatrixXd::Identity(d, d), Eigen::VectorXd::Zero(d)};
}

Eigen::MatrixXd RigidTransform::homogeneous() const {
  const auto d = translation_.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(d + 1, d + 1);
  h.topLeftCorner(d, d) = rotation_;
  h.topRightCorner(d, 1) = translation_;
  return h;
}

AlignmentResult icp_verbatim(const EmbeddingSet& psi, const EmbeddingSet& phi,
                             const CorrespondenceMap& corr) {
  const auto clouds = paired_rows(psi, phi, corr);
  const Eigen::RowVectorXd mean_psi = clouds.first.colwise().mean();
  const Eigen::RowVectorXd mean_phi = clouds.second.colwise().mean();
  const Eigen::MatrixXd psi_hat = clouds.first.rowwise() - mean_psi;
  const Eigen::MatrixXd phi_hat = clouds.second.rowwise() - mean_phi;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(psi_hat.transpose() * phi_hat,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd& u = svd.matrixU();
  const Eigen::MatrixXd vt = svd.matrixV().transpose();
  Eigen::MatrixXd rotation = vt.transpose() * u.transpose();
  Eigen::VectorXd translation = (mean_psi - mean_phi).transpose();

  const auto d = static_cast<Eigen::Index>(psi.dim());
  return {RigidTransform(std::move(rotation), std::move(translation)), AlignMethod::Verbatim,
          numerical_rank(svd.singularValues()) < d, svd.singularValues()};
}

AlignmentResult procrustes_align(const EmbeddingSet& source, const EmbeddingSet& target,
                                 const CorrespondenceMap& corr) {
  const auto clouds = paired_rows(source, target, corr);
  const Eigen::RowVectorXd mean_source = clouds.first.colwise().mean();
  const Eigen::RowVectorXd mean_target = clouds.second.colwise().mean();
  const Eigen::MatrixXd source_hat = clouds.first.rowwise() - mean_source;
  const Eigen::MatrixXd target_hat = clouds.second.rowwise() - mean_target;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(source_hat.transpose() * target_hat,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd& u = svd.matrixU();
  const Eigen::MatrixXd& v = svd.matrixV();
  const auto d = static_cast<Eigen::Index>(source.dim());
  Eigen::VectorXd signs = Eigen::VectorXd::Ones(d);
  if ((v * u.transpose()).determinant() < 0.0) signs(d - 1) = -1.0;
  Eigen::MatrixXd rotation = v * signs.asDiagonal() * u.transpose();
  Eigen::VectorXd translation = mean_target.transpose() - rotation * mean_source.transpose();

  // With a proper-rotation constraint one missing direction is still
  // determined; two or more are not.
  return {RigidTransform(std::move(rotation), std::move(translation)), AlignMethod::Procrustes,
          numerical_rank(svd.singularValues()) < d - 1, svd.singularValues()};
}

EmbeddingSet apply_transform(const RigidTransform& transform, const EmbeddingSet& set,
                             bool renormalize) {
  if (transform.dim() != set.dim()) {
    throw DimensionMismatch("transform has dim " + std::to_string(transform.dim()) +
                            " but set has dim " + std::to_string(set.dim()));
  }
  const auto d = static_cast<Eigen::Index>(set.dim());
  std::vector<double> data(set.data().size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Eigen::Map<const Eigen::VectorXd> v(set.vector(i).data(), d);
    Eigen::Map<Eigen::VectorXd> out(data.data() + i * set.dim(), d);
    out = transform.rotation() * v + transform.translation();
    if (renormalize) {
      try {
        normalize_in_place(std::span<double>(out.data(), set.dim()));
      } catch (const ZeroVector&) {
        throw ZeroVector("point '" + set.id(i) + "' maps to the origin");
      }
    }
  }
  return set.with_vectors(std::move(data), renormalize ? EmbeddingSet::Geometry::Sphere
                                                       : EmbeddingSet::Geometry::Free);
}

double alignment_residual(const EmbeddingSet& a, const EmbeddingSet& b,
                          const CorrespondenceMap& corr) {
  const auto clouds = paired_rows(a, b, corr);
  return std::sqrt((clouds.first - clouds.second).rowwise().squaredNorm().mean());
}

std::string transform_to_json(const TransformRecord& record) {
  const auto& t = record.transform;
  const auto d = static_cast<Eigen::Index>(t.dim());
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["method"] = to_string(record.method);
  j["d"] = t.dim();
  std::vector<double> rotation;
  rotation.reserve(static_cast<std::size_t>(d * d));
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) rotation.push_back(t.rotation()(r, c));
  }
  j["rotation"] = rotation;
  j["translation"] = std::vector<double>(t.translation().data(), t.translation().data() + d);
  j["residual_before"] = record.residual_before;
  j["residual_after"] = record.residual_after;
  return j.dump(2);
}

TransformRecord transform_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto d = j.at("d").get<Eigen::Index>();
    const auto rotation = j.at("rotation").get<std::vector<double>>();
    const auto translation = j.at("translation").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(rotation.size()) != d * d ||
        static_cast<Eigen::Index>(translation.size()) != d) {
      throw SchemaMismatch("transform arrays do not match d = " + std::to_string(d));
    }
    Eigen::MatrixXd r(d, d);
    for (Eigen::Index row = 0; row < d; ++row) {
      for (Eigen::Index col = 0; col < d; ++col) r(row, col) = rotation[row * d + col];
    }
    Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(translation.data(), d);
    return {align_method_from_string(j.at("method").get<std::string>()),
            RigidTransform(std::move(r), std::move(t)), j.value("residual_before", 0.0),
            j.value("residual_after", 0.0)};
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(std::string("transform JSON: ") + e.what());
  }
}

}  // namespace jointspace
