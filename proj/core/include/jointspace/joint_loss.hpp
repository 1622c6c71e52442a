#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "jointspace/embedding_store.hpp"

namespace jointspace {

class Rng;

// B matched (image, text) pairs; row i of `images` pairs with row i of
// `texts`, every other text row is a negative for it.
struct Batch {
  Eigen::MatrixXd images;  // B x d
  Eigen::MatrixXd texts;   // B x d

  Eigen::Index size() const noexcept { return images.rows(); }
  void validate() const;  // equal shapes, B >= 1
};

// L = (1/B) sum_i -log( exp(psi_i . phi_i) / sum_j exp(psi_i . phi_j) ).
// The denominator runs over every j, the matched pair included.
double ranking_loss(const Batch& batch);

struct LossGradient {
  Eigen::MatrixXd images;  // dL/dpsi, B x d
  Eigen::MatrixXd texts;   // dL/dphi, B x d
};

// dL/dpsi_i = (1/B)(sum_j p_ij phi_j - phi_i),
// dL/dphi_j = (1/B) sum_i (p_ij - delta_ij) psi_i.
LossGradient loss_gradient(const Batch& batch);

struct FitOptions {
  std::size_t steps = 500;
  double learning_rate = 0.5;
  std::size_t batch_size = 32;
};

struct FitResult {
  EmbeddingSet texts;
  std::vector<double> loss_trace;  // minibatch loss before each step
};

// Projected minibatch gradient descent on the text vectors only: each step
// draws `batch_size` pairs without replacement (all pairs, in order, when
// batch_size covers them), moves the paired texts down the gradient, and
// re-normalizes them to the sphere. `corr` must pair every text exactly once.
FitResult fit_text_embeddings(const EmbeddingSet& images, const EmbeddingSet& text_init,
                              const CorrespondenceMap& corr, const FitOptions& options, Rng& rng);

// Mean dot product over the pairs of `corr`.
double mean_matched_dot(const EmbeddingSet& images, const EmbeddingSet& texts,
                        const CorrespondenceMap& corr);

// Loss of every pair at once, in correspondence order.
double full_batch_loss(const EmbeddingSet& images, const EmbeddingSet& texts,
                       const CorrespondenceMap& corr);

std::string loss_trace_csv(const std::vector<double>& trace);

}  // namespace jointspace
