#include "jointspace/joint_loss.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "jointspace/errors.hpp"
#include "jointspace/random.hpp"

namespace jointspace {

namespace {

// Row-wise softmax of the similarity matrix S = Psi Phi^T, max-subtracted.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

Batch gather(const EmbeddingSet& images, const EmbeddingSet& texts,
             const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
             std::span<const std::size_t> rows) {
  const auto d = static_cast<Eigen::Index>(images.dim());
  Batch batch{Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), d),
              Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), d)};
  const auto mi = images.matrix();
  const auto mt = texts.matrix();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto [i, t] = pairs[rows[r]];
    batch.images.row(static_cast<Eigen::Index>(r)) = mi.row(static_cast<Eigen::Index>(i));
    batch.texts.row(static_cast<Eigen::Index>(r)) = mt.row(static_cast<Eigen::Index>(t));
  }
  return batch;
}

std::vector<std::pair<std::size_t, std::size_t>> image_text_pairs(const EmbeddingSet& images,
                                                                  const EmbeddingSet& texts,
                                                                  const CorrespondenceMap& corr) {
  if (corr.empty()) throw InvalidArgument("correspondence map is empty");
  validate(corr, images, texts);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(corr.size());
  for (const auto& [image_id, text_id] : corr.pairs) {
    pairs.emplace_back(images.index_of(image_id), texts.index_of(text_id));
  }
  return pairs;
}

}  // namespace

void Batch::validate() const {
  if (images.rows() < 1) throw InvalidArgument("batch must hold at least one pair");
  if (images.rows() != texts.rows() || images.cols() != texts.cols()) {
    throw DimensionMismatch("image and text batches differ in shape");
  }
}

double ranking_loss(const Batch& batch) {
  batch.validate();
  const Eigen::MatrixXd logits = batch.images * batch.texts.transpose();
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  const Eigen::VectorXd log_sum =
      ((logits.colwise() - row_max).array().exp().rowwise().sum().log()).matrix() + row_max;
  const double total = (log_sum - logits.diagonal()).sum();
  return total / static_cast<double>(batch.size());
}

LossGradient loss_gradient(const Batch& batch) {
  batch.validate();
  const auto b = batch.size();
  Eigen::MatrixXd coeff = softmax_rows(batch.images * batch.texts.transpose());
  coeff -= Eigen::MatrixXd::Identity(b, b);
  coeff /= static_cast<double>(b);
  return {coeff * batch.texts, coeff.transpose() * batch.images};
}

double mean_matched_dot(const EmbeddingSet& images, const EmbeddingSet& texts,
                        const CorrespondenceMap& corr) {
  const auto pairs = image_text_pairs(images, texts, corr);
  double sum = 0.0;
  for (const auto& [i, t] : pairs) sum += dot(images.vector(i), texts.vector(t));
  return sum / static_cast<double>(pairs.size());
}

double full_batch_loss(const EmbeddingSet& images, const EmbeddingSet& texts,
                       const CorrespondenceMap& corr) {
  const auto pairs = image_text_pairs(images, texts, corr);
  std::vector<std::size_t> rows(pairs.size());
  std::iota(rows.begin(), rows.end(), 0);
  return ranking_loss(gather(images, texts, pairs, rows));
}

FitResult fit_text_embeddings(const EmbeddingSet& images, const EmbeddingSet& text_init,
                              const CorrespondenceMap& corr, const FitOptions& options, Rng& rng) {
  if (options.batch_size < 1) throw InvalidArgument("batch_size must be positive");
  if (!(options.learning_rate >= 0.0)) throw InvalidArgument("learning rate must be non-negative");
  const auto pairs = image_text_pairs(images, text_init, corr);
  if (pairs.size() != text_init.size()) {
    throw InvalidArgument("correspondence must cover every text point exactly once");
  }

  FitResult result{text_init, {}};
  if (options.steps == 0) return result;

  const std::size_t dim = text_init.dim();
  std::vector<double> texts = text_init.data();
  const auto current = [&] {
    return text_init.with_vectors(texts, EmbeddingSet::Geometry::Sphere);
  };
  const std::size_t batch = std::min(options.batch_size, pairs.size());
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  result.loss_trace.reserve(options.steps);

  for (std::size_t step = 0; step < options.steps; ++step) {
    std::vector<std::size_t> rows;
    if (batch == pairs.size()) {
      rows = order;
    } else {
      // Partial Fisher-Yates: the first `batch` slots become the sample.
      for (std::size_t k = 0; k < batch; ++k) {
        const auto j = k + static_cast<std::size_t>(rng.uniform_index(order.size() - k));
        std::swap(order[k], order[j]);
      }
      rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(batch));
    }
    // Gather from the live text buffer.
    const auto d = static_cast<Eigen::Index>(dim);
    Batch b{Eigen::MatrixXd(static_cast<Eigen::Index>(batch), d),
            Eigen::MatrixXd(static_cast<Eigen::Index>(batch), d)};
    const auto mi = images.matrix();
    for (std::size_t r = 0; r < batch; ++r) {
      const auto [i, t] = pairs[rows[r]];
      b.images.row(static_cast<Eigen::Index>(r)) = mi.row(static_cast<Eigen::Index>(i));
      b.texts.row(static_cast<Eigen::Index>(r)) =
          Eigen::Map<const Eigen::RowVectorXd>(texts.data() + t * dim, d);
    }
    result.loss_trace.push_back(ranking_loss(b));
    const LossGradient grad = loss_gradient(b);
    for (std::size_t r = 0; r < batch; ++r) {
      const auto t = pairs[rows[r]].second;
      Eigen::Map<Eigen::RowVectorXd> row(texts.data() + t * dim, d);
      row -= options.learning_rate * grad.texts.row(static_cast<Eigen::Index>(r));
      normalize_in_place(std::span<double>(texts.data() + t * dim, dim));
    }
  }
  result.texts = current();
  return result;
}

std::string loss_trace_csv(const std::vector<double>& trace) {
  std::ostringstream out;
  out << "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10f", trace[i]);
    out << i << ',' << buf << '\n';
  }
  return out.str();
}

}  // namespace jointspace
