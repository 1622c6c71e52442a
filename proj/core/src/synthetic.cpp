#include "jointspace/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/LU>
#include <Eigen/QR>

#include "jointspace/errors.hpp"

namespace jointspace::synthetic {

namespace {

struct ChartPoint {
  double x;
  double y;
};

ChartPoint arc_point(bool upper, double t, double offset) {
  if (upper) return {std::cos(t), std::sin(t)};
  return {1.0 - std::cos(t), offset - std::sin(t)};
}

void lift(const ArcsConfig& config, ChartPoint p, Rng& rng, std::vector<double>& out) {
  const auto begin = out.size();
  out.resize(begin + config.dim, 0.0);
  // Centre the pair of moons on the pole before lifting.
  out[begin] = config.chart_scale * (p.x - 0.5 + config.noise * rng.normal());
  out[begin + 1] = config.chart_scale * (p.y - 0.5 * config.arm_offset + config.noise * rng.normal());
  out[begin + 2] = 1.0;
  normalize_in_place(std::span<double>(out).subspan(begin, config.dim));
}

}  // namespace

ArcsWorld interleaved_arcs(const ArcsConfig& config, Rng& rng) {
  if (config.dim < 3) throw DimensionTooSmall("arcs need at least 3 dimensions");
  if (config.points_per_class == 0) throw InvalidArgument("points_per_class must be positive");
  if (config.texts_per_class > config.points_per_class) {
    throw InvalidArgument("at most one caption per image");
  }
  std::vector<PointInfo> image_info;
  std::vector<double> image_data;
  std::vector<PointInfo> text_info;
  std::vector<double> text_data;
  CorrespondenceMap corr;

  for (int arm = 0; arm < 2; ++arm) {
    const bool upper = arm == 0;
    const std::string label = upper ? "arc_a" : "arc_b";
    Rng arm_rng = rng.fork(label);
    std::vector<double> params(config.points_per_class);
    for (double& t : params) t = arm_rng.uniform(0.0, std::numbers::pi);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const std::string id = label + "/" + std::to_string(i);
      image_info.push_back({"img/" + id, DomainTag::Image, {label}});
      lift(config, arc_point(upper, params[i], config.arm_offset), arm_rng, image_data);
      if (i < config.texts_per_class) {
        const double t = params[i] + config.text_jitter * arm_rng.normal();
        text_info.push_back({"txt/" + id, DomainTag::Text, {}});
        lift(config, arc_point(upper, t, config.arm_offset), arm_rng, text_data);
        corr.pairs.emplace_back("img/" + id, "txt/" + id);
      }
    }
  }
  ArcsWorld world{EmbeddingSet::on_sphere(config.dim, std::move(image_info), std::move(image_data)),
                  {}, std::move(corr)};
  if (!text_info.empty()) {
    world.texts = EmbeddingSet::on_sphere(config.dim, std::move(text_info), std::move(text_data));
  }
  return world;
}

Eigen::MatrixXd random_rotation(std::size_t dim, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) g(r, c) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < d; ++c) {
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  }
  if (q.determinant() < 0.0) q.col(0) *= -1.0;
  return q;
}

}  // namespace jointspace::synthetic
