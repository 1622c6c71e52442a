#include <gtest/gtest.h>

#include <cmath>

#include "jointspace/cci_world.hpp"
#include "jointspace/errors.hpp"
#include "jointspace/joint_loss.hpp"
#include "jointspace/random.hpp"
#include "jointspace/synthetic.hpp"
#include "oracles.hpp"

using namespace jointspace;

namespace {

Eigen::MatrixXd random_rows(Eigen::Index b, Eigen::Index d, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd m(b, d);
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

struct Paired {
  EmbeddingSet images;
  EmbeddingSet texts;
  CorrespondenceMap corr;
};

Paired cci_pairs(std::uint64_t seed, bool rotate_texts) {
  cci::GeneratorConfig cfg;
  cfg.iterations = 2;
  Rng rng = Rng::stream(seed, "cci");
  const auto ds = cci::generate_cci(cfg, rng);
  std::vector<PointInfo> ii;
  std::vector<PointInfo> ti;
  std::vector<double> id;
  std::vector<double> td;
  CorrespondenceMap corr;
  const Rng key = Rng::stream(seed, "embed");
  for (std::size_t s = 0; s < ds.size(); ++s) {
    const auto a = cci::scene_embedding(ds.scenes[s], 24, 0.05, key.fork(s), DomainTag::Image);
    const auto b = cci::scene_embedding(ds.scenes[s], 24, 0.05, key.fork(s), DomainTag::Text);
    ii.push_back({"img/" + ds.scenes[s].id, DomainTag::Image, {}});
    ti.push_back({"txt/" + ds.scenes[s].id, DomainTag::Text, {}});
    id.insert(id.end(), a.begin(), a.end());
    td.insert(td.end(), b.begin(), b.end());
    corr.pairs.emplace_back(ii.back().id, ti.back().id);
  }
  auto texts = EmbeddingSet::on_sphere(24, ti, td);
  if (rotate_texts) {
    Rng r = Rng::stream(seed, "rotation");
    const Eigen::MatrixXd q = synthetic::random_rotation(24, r);
    std::vector<double> rotated;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      Eigen::Map<const Eigen::VectorXd> v(texts.vector(i).data(), 24);
      const Eigen::VectorXd w = q * v;
      rotated.insert(rotated.end(), w.data(), w.data() + 24);
    }
    texts = texts.with_vectors(std::move(rotated), EmbeddingSet::Geometry::Sphere);
  }
  return {EmbeddingSet::on_sphere(24, ii, id), texts, corr};
}

}  // namespace

TEST(RankingLoss, SinglePairIsZero) {
  Rng rng(1);
  const Batch b{random_rows(1, 4, rng), random_rows(1, 4, rng)};
  EXPECT_EQ(ranking_loss(b), 0.0);
  const auto g = loss_gradient(b);
  EXPECT_EQ(g.images.norm(), 0.0);
  EXPECT_EQ(g.texts.norm(), 0.0);
}

TEST(RankingLoss, ClosedFormTwoPairs) {
  const Batch b{Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)};
  const double e = std::exp(1.0);
  EXPECT_NEAR(ranking_loss(b), -std::log(e / (e + 1.0)), 1e-12);
  EXPECT_NEAR(ranking_loss(b), 0.31326, 1e-5);
}

TEST(RankingLoss, MatchesNaiveAndNonNegative) {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto bsz = 1 + static_cast<Eigen::Index>(rng.uniform_index(8));
    const auto d = 1 + static_cast<Eigen::Index>(rng.uniform_index(16));
    const Batch b{random_rows(bsz, d, rng, 0.5), random_rows(bsz, d, rng, 0.5)};
    const double l = ranking_loss(b);
    EXPECT_NEAR(l, oracle::naive_loss(b.images, b.texts), 1e-12);
    EXPECT_GE(l, 0.0);
  }
}

TEST(RankingLoss, StableForLargeLogits) {
  Batch b{Eigen::MatrixXd::Identity(3, 3) * 40.0, Eigen::MatrixXd::Identity(3, 3) * 40.0};
  EXPECT_TRUE(std::isfinite(ranking_loss(b)));
  EXPECT_NEAR(ranking_loss(b), 0.0, 1e-12);
}

TEST(RankingLoss, PermutationAndRotationInvariant) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const Batch b{random_rows(6, 5, rng, 0.4), random_rows(6, 5, rng, 0.4)};
    Eigen::PermutationMatrix<Eigen::Dynamic> p(6);
    p.setIdentity();
    std::vector<int> idx{0, 1, 2, 3, 4, 5};
    rng.shuffle(idx);
    for (int i = 0; i < 6; ++i) p.indices()[i] = idx[static_cast<std::size_t>(i)];
    const Batch permuted{p * b.images, p * b.texts};
    EXPECT_NEAR(ranking_loss(permuted), ranking_loss(b), 1e-12);
    const Eigen::MatrixXd q = synthetic::random_rotation(5, rng);
    const Batch rotated{b.images * q.transpose(), b.texts * q.transpose()};
    EXPECT_NEAR(ranking_loss(rotated), ranking_loss(b), 1e-12);
  }
}

TEST(RankingLoss, ShapeErrors) {
  EXPECT_THROW(ranking_loss(Batch{Eigen::MatrixXd(2, 3), Eigen::MatrixXd(3, 3)}), DimensionMismatch);
  EXPECT_THROW(ranking_loss(Batch{Eigen::MatrixXd(0, 3), Eigen::MatrixXd(0, 3)}), InvalidArgument);
}

TEST(LossGradient, MatchesCentralDifferences) {
  Rng rng(4);
  const double h = 1e-5;
  for (int t = 0; t < 50; ++t) {
    const auto bsz = 2 + static_cast<Eigen::Index>(rng.uniform_index(7));
    const auto d = 1 + static_cast<Eigen::Index>(rng.uniform_index(16));
    Batch b{random_rows(bsz, d, rng, 0.5), random_rows(bsz, d, rng, 0.5)};
    const auto g = loss_gradient(b);
    for (int which = 0; which < 2; ++which) {
      Eigen::MatrixXd& m = which == 0 ? b.images : b.texts;
      const Eigen::MatrixXd& analytic = which == 0 ? g.images : g.texts;
      for (Eigen::Index i = 0; i < bsz; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
          const double keep = m(i, j);
          m(i, j) = keep + h;
          const double up = oracle::naive_loss(b.images, b.texts);
          m(i, j) = keep - h;
          const double down = oracle::naive_loss(b.images, b.texts);
          m(i, j) = keep;
          const double numeric = (up - down) / (2.0 * h);
          const double scale = std::max({std::abs(numeric), std::abs(analytic(i, j)), 1e-3});
          EXPECT_LT(std::abs(numeric - analytic(i, j)) / scale, 1e-5)
              << "batch " << t << " entry " << i << "," << j;
        }
      }
    }
  }
}

TEST(LossGradient, TextGradientSumsWeightedByImages) {
  // sum_j dL/dphi_j = (1/B) sum_i (sum_j p_ij - 1) psi_i = 0.
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const Batch b{random_rows(5, 4, rng), random_rows(5, 4, rng)};
    EXPECT_LT(loss_gradient(b).texts.colwise().sum().norm(), 1e-12);
  }
}

TEST(Fit, ZeroStepsUnchanged) {
  const auto p = cci_pairs(1, false);
  Rng rng(1);
  FitOptions o;
  o.steps = 0;
  const auto r = fit_text_embeddings(p.images, p.texts, p.corr, o, rng);
  EXPECT_EQ(r.texts, p.texts);
  EXPECT_TRUE(r.loss_trace.empty());
}

TEST(Fit, FullBatchLossNonIncreasingFromImages) {
  const auto p = cci_pairs(2, false);
  // Texts start on top of their images.
  std::vector<PointInfo> infos(p.texts.points());
  const auto start = EmbeddingSet::on_sphere(24, infos, p.images.data());
  Rng rng(2);
  FitOptions o;
  o.steps = 1;
  o.learning_rate = 0.05;
  o.batch_size = p.images.size();
  auto current = start;
  double prev = full_batch_loss(p.images, current, p.corr);
  for (int step = 0; step < 30; ++step) {
    current = fit_text_embeddings(p.images, current, p.corr, o, rng).texts;
    const double now = full_batch_loss(p.images, current, p.corr);
    EXPECT_LE(now, prev + 1e-12);
    prev = now;
  }
}

TEST(Fit, ImprovesMatchedDotFromMisalignedStart) {
  const auto p = cci_pairs(3, true);
  Rng rng = Rng::stream(3, "loss");
  const FitOptions o;  // 500 steps, lr 0.5, B 32
  const auto r = fit_text_embeddings(p.images, p.texts, p.corr, o, rng);
  EXPECT_GT(mean_matched_dot(p.images, r.texts, p.corr), mean_matched_dot(p.images, p.texts, p.corr));
  EXPECT_EQ(r.loss_trace.size(), 500u);
  for (std::size_t i = 0; i < r.texts.size(); ++i) {
    EXPECT_NEAR(dot(r.texts.vector(i), r.texts.vector(i)), 1.0, 1e-12);
  }
  Rng again = Rng::stream(3, "loss");
  EXPECT_EQ(fit_text_embeddings(p.images, p.texts, p.corr, o, again).texts, r.texts);
}

TEST(Fit, RequiresFullCoverage) {
  auto p = cci_pairs(4, false);
  p.corr.pairs.pop_back();
  Rng rng(1);
  EXPECT_THROW(fit_text_embeddings(p.images, p.texts, p.corr, FitOptions{}, rng), InvalidArgument);
}

TEST(LossTrace, CsvHeader) {
  EXPECT_EQ(loss_trace_csv({0.5}), "step,loss\n0,0.5000000000\n");
}
