#pragma once

#include <string>
#include <string_view>

#include <Eigen/Core>

#include "jointspace/embedding_store.hpp"

namespace jointspace {

enum class AlignMethod { Verbatim, Procrustes };

std::string_view to_string(AlignMethod method);
AlignMethod align_method_from_string(std::string_view text);

// v -> R v + t. The rotation is orthogonal (max |R^T R - I| < 1e-9).
class RigidTransform {
 public:
  RigidTransform(Eigen::MatrixXd rotation, Eigen::VectorXd translation);

  static RigidTransform identity(std::size_t dim);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(translation_.size()); }
  const Eigen::MatrixXd& rotation() const noexcept { return rotation_; }
  const Eigen::VectorXd& translation() const noexcept { return translation_; }
  // (d+1)x(d+1): top-left R, last column t, last row (0, ..., 0, 1).
  Eigen::MatrixXd homogeneous() const;

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const { return rotation_ * v + translation_; }

 private:
  Eigen::MatrixXd rotation_;
  Eigen::VectorXd translation_;
};

struct AlignmentResult {
  RigidTransform transform;
  AlignMethod method;
  // Set when the cross-covariance rank is too low for a unique rotation.
  // The transform is still returned.
  bool degenerate_covariance = false;
  Eigen::VectorXd singular_values;
};

// Single-pass alignment exactly as the reference procedure states it: centre
// both paired clouds, SVD(psi_c^T phi_c) = U S Vt, R = Vt^T U^T,
// t = mean(psi) - mean(phi). No reflection correction.
AlignmentResult icp_verbatim(const EmbeddingSet& psi, const EmbeddingSet& phi,
                             const CorrespondenceMap& corr);

// Kabsch solution: the proper rotation R (det = +1) and t = mean_target -
// R mean_source minimising sum |R s_i + t - target_i|^2 over paired points.
AlignmentResult procrustes_align(const EmbeddingSet& source, const EmbeddingSet& target,
                                 const CorrespondenceMap& corr);

// Maps each vector through `transform`; with `renormalize` the results are
// projected back to the unit sphere (ZeroVector if one lands on the origin).
EmbeddingSet apply_transform(const RigidTransform& transform, const EmbeddingSet& set,
                             bool renormalize = true);

// Root-mean-square Euclidean distance over the paired points.
double alignment_residual(const EmbeddingSet& a, const EmbeddingSet& b,
                          const CorrespondenceMap& corr);

struct TransformRecord {
  AlignMethod method;
  RigidTransform transform;
  double residual_before = 0.0;
  double residual_after = 0.0;
};

std::string transform_to_json(const TransformRecord& record);
TransformRecord transform_from_json(std::string_view text);

}  // namespace jointspace
