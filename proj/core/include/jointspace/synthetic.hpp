#pragma once

#include <cstddef>

#include "jointspace/embedding_store.hpp"
#include "jointspace/random.hpp"

namespace jointspace::synthetic {

// Two interleaved half-moon arcs drawn in a tangent chart around the north
// pole and lifted onto the unit sphere, then zero padded to `dim`.
// Euclidean nearest neighbours jump between the arms near their tips;
// walking along an arm does not.
struct ArcsConfig {
  std::size_t points_per_class = 500;
  std::size_t texts_per_class = 0;  // caption-like companions, one per image at most
  std::size_t dim = 3;
  double chart_scale = 0.5;   // chart units to tangent-plane units
  double noise = 0.02;        // isotropic chart noise
  double arm_offset = 0.7;    // vertical shift of the lower arm; smaller interleaves tighter
  double text_jitter = 0.02;  // arc-parameter jitter of a caption around its image
};

struct ArcsWorld {
  EmbeddingSet images;  // labels {"arc_a"} or {"arc_b"}
  EmbeddingSet texts;   // unlabelled, may be empty
  CorrespondenceMap correspondence;
};

ArcsWorld interleaved_arcs(const ArcsConfig& config, Rng& rng);

// Random proper rotation of R^dim (QR of a Gaussian matrix, sign fixed).
Eigen::MatrixXd random_rotation(std::size_t dim, Rng& rng);

}  // namespace jointspace::synthetic
