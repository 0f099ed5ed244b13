#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lidsvd/gmm.hpp"

using namespace lidsvd;

namespace {

gmm::DiagGmm random_model(int m, int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 2.0);
  std::normal_distribution<double> n(0.0, 2.0);
  gmm::DiagGmm g{Vector(m), RowMatrix(m, d), RowMatrix(m, d)};
  for (int k = 0; k < m; ++k) {
    g.weights[k] = u(rng);
    for (int j = 0; j < d; ++j) {
      g.means(k, j) = n(rng);
      g.variances(k, j) = u(rng);
    }
  }
  g.weights /= g.weights.sum();
  return g;
}

RowMatrix gaussian_rows(Eigen::Index n, Eigen::Index d, std::mt19937_64& rng, double mean = 0.0, double sd = 1.0) {
  std::normal_distribution<double> g(mean, sd);
  RowMatrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  return x;
}

}  // namespace

TEST(LogLikelihood, AtOwnMean) {
  const int d = 5;
  gmm::DiagGmm g{Vector::Ones(1), RowMatrix::Constant(1, d, 1.5), RowMatrix::Ones(1, d)};
  EXPECT_NEAR(gmm::log_likelihood(g, RowMatrix::Constant(1, d, 1.5)), -0.5 * d * std::log(2 * std::numbers::pi),
              1e-12);
}

TEST(LogLikelihood, MatchesDirectProbability) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = random_model(4, 3, rng);
    const RowMatrix x = gaussian_rows(20, 3, rng);
    double total = 0.0;
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      double p = 0.0;
      for (int k = 0; k < 4; ++k) {
        double dens = g.weights[k];
        for (int j = 0; j < 3; ++j) {
          const double v = g.variances(k, j);
          const double z = x(t, j) - g.means(k, j);
          dens *= std::exp(-z * z / (2 * v)) / std::sqrt(2 * std::numbers::pi * v);
        }
        p += dens;
      }
      total += std::log(p);
    }
    EXPECT_NEAR(gmm::log_likelihood(g, x), total / x.rows(), 1e-9);
  }
}

TEST(LogLikelihood, UnitWeightEqualsComponent) {
  std::mt19937_64 rng(5);
  auto g = random_model(3, 4, rng);
  g.weights << 0.0, 1.0, 0.0;
  const RowMatrix x = gaussian_rows(7, 4, rng);
  const RowMatrix comp = gmm::component_log_likelihoods(g, x, false);
  EXPECT_NEAR(gmm::log_likelihood(g, x), comp.col(1).mean(), 1e-10);
}

TEST(Posteriors, RowsSumToOne) {
  std::mt19937_64 rng(6);
  const auto g = random_model(8, 3, rng);
  const RowMatrix p = gmm::posteriors(g, gaussian_rows(50, 3, rng, 0.0, 4.0));
  EXPECT_LE((p.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10);
}

TEST(TrainUbm, SingleComponentClosedForm) {
  std::mt19937_64 rng(7);
  const RowMatrix x = gaussian_rows(500, 3, rng, 2.0, 3.0);
  gmm::EmConfig cfg;
  cfg.components = 1;
  cfg.em_iters = 3;
  const auto g = gmm::train_ubm(x, cfg);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::RowVectorXd var = (x.rowwise() - mean).array().square().colwise().mean();
  EXPECT_LE((g.means.row(0) - mean).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((g.variances.row(0) - var).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_DOUBLE_EQ(g.weights[0], 1.0);
}

TEST(TrainUbm, RecoversTwoClusters) {
  std::mt19937_64 rng(8);
  const RowMatrix a = gaussian_rows(3000, 2, rng, -5.0);
  const RowMatrix b = gaussian_rows(1000, 2, rng, 5.0);
  RowMatrix x(4000, 2);
  x << a, b;
  gmm::EmConfig cfg;
  cfg.components = 2;
  cfg.em_iters = 20;
  const auto g = gmm::train_ubm(x, cfg);
  const int lo = g.means(0, 0) < g.means(1, 0) ? 0 : 1;
  EXPECT_LT((g.means.row(lo).array() + 5.0).abs().maxCoeff(), 0.1);
  EXPECT_LT((g.means.row(1 - lo).array() - 5.0).abs().maxCoeff(), 0.1);
  EXPECT_NEAR(g.weights[lo], 0.75, 0.05);
}

TEST(TrainUbm, LikelihoodNonDecreasing) {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    std::mt19937_64 rng(seed);
    RowMatrix x(2000, 3);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_int_distribution<int> which(0, 4);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const int c = which(rng);
      for (int j = 0; j < 3; ++j) x(i, j) = 3.0 * c * (j == c % 3) + n(rng);
    }
    gmm::EmConfig cfg;
    cfg.components = 6;
    cfg.em_iters = 15;
    cfg.seed = seed;
    gmm::EmReport rep;
    gmm::train_ubm(x, cfg, &rep);
    ASSERT_EQ(rep.avg_log_likelihood.size(), 16u);
    for (std::size_t i = 1; i < rep.avg_log_likelihood.size(); ++i)
      EXPECT_GE(rep.avg_log_likelihood[i], rep.avg_log_likelihood[i - 1] - 1e-8) << seed << " " << i;
  }
}

TEST(TrainUbm, SeedDeterminism) {
  std::mt19937_64 rng(9);
  const RowMatrix x = gaussian_rows(1000, 4, rng);
  gmm::EmConfig cfg;
  cfg.components = 4;
  const auto a = gmm::train_ubm(x, cfg);
  const auto b = gmm::train_ubm(x, cfg);
  EXPECT_EQ(a.means, b.means);
  EXPECT_EQ(a.variances, b.variances);
  EXPECT_EQ(a.weights, b.weights);
}

TEST(TrainUbm, TooFewFrames) {
  std::mt19937_64 rng(10);
  gmm::EmConfig cfg;
  cfg.components = 8;
  try {
    gmm::train_ubm(gaussian_rows(79, 2, rng), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::insufficient_data);
  }
}

TEST(MapAdapt, EmptyDataIsIdentity) {
  std::mt19937_64 rng(11);
  const auto ubm = random_model(5, 3, rng);
  const auto a = gmm::map_adapt(ubm, RowMatrix(0, 3));
  EXPECT_EQ(a.means, ubm.means);
  EXPECT_EQ(a.variances, ubm.variances);
  EXPECT_EQ(a.weights, ubm.weights);
}

TEST(MapAdapt, HugeRelevanceKeepsUbm) {
  std::mt19937_64 rng(12);
  const auto ubm = random_model(5, 3, rng);
  const auto a = gmm::map_adapt(ubm, gaussian_rows(500, 3, rng, 1.0, 3.0), {1e12});
  EXPECT_LE((a.means - ubm.means).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(MapAdapt, ZeroRelevanceSingleComponentGivesDataMean) {
  std::mt19937_64 rng(13);
  const auto ubm = random_model(1, 4, rng);
  const RowMatrix x = gaussian_rows(10000, 4, rng, -2.0, 1.5);
  const auto a = gmm::map_adapt(ubm, x, {0.0});
  EXPECT_LE((a.means.row(0) - x.colwise().mean()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(MapAdapt, ConvexCombinationOfUbmAndDataMean) {
  std::mt19937_64 rng(14);
  const auto ubm = random_model(6, 3, rng);
  const RowMatrix x = gaussian_rows(300, 3, rng, 0.5, 2.0);
  const auto a = gmm::map_adapt(ubm, x, {16.0});
  const RowMatrix gamma = gmm::posteriors(ubm, x);
  for (int k = 0; k < 6; ++k) {
    const double occ = gamma.col(k).sum();
    const Eigen::RowVectorXd e = (gamma.col(k).transpose() * x) / occ;
    const double alpha = occ / (occ + 16.0);
    for (int j = 0; j < 3; ++j) {
      EXPECT_NEAR(a.means(k, j), alpha * e[j] + (1 - alpha) * ubm.means(k, j), 1e-10);
      EXPECT_GE(a.means(k, j), std::min(e[j], ubm.means(k, j)) - 1e-12);
      EXPECT_LE(a.means(k, j), std::max(e[j], ubm.means(k, j)) + 1e-12);
    }
  }
}

TEST(MapAdapt, DimensionMismatch) {
  std::mt19937_64 rng(15);
  const auto ubm = random_model(2, 3, rng);
  try {
    gmm::map_adapt(ubm, RowMatrix::Zero(4, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::dimension_mismatch);
  }
}

TEST(Decode, SingleComponent) {
  std::mt19937_64 rng(16);
  const auto g = random_model(1, 2, rng);
  const auto seq = gmm::decode_symbols(g, gaussian_rows(30, 2, rng));
  EXPECT_EQ(seq.alphabet_size, 1);
  for (int s : seq.symbols) EXPECT_EQ(s, 0);
}

TEST(Decode, NearestMean) {
  gmm::DiagGmm g{Vector::Constant(2, 0.5), RowMatrix(2, 1), RowMatrix::Ones(2, 1)};
  g.means << -10, 10;
  RowMatrix x(6, 1);
  x << -10, 10, 10, -10, -9.5, 11;
  const auto seq = gmm::decode_symbols(g, x);
  EXPECT_EQ(seq.symbols, (std::vector<int>{0, 1, 1, 0, 0, 1}));
}

TEST(Decode, OneSymbolPerFrame) {
  std::mt19937_64 rng(17);
  const auto g = random_model(4, 3, rng);
  EXPECT_EQ(gmm::decode_symbols(g, gaussian_rows(5998, 3, rng)).symbols.size(), 5998u);
}

TEST(Decode, WeightScalingInvariant) {
  std::mt19937_64 rng(18);
  auto g = random_model(5, 2, rng);
  const RowMatrix x = gaussian_rows(200, 2, rng, 0.0, 3.0);
  const auto base = gmm::decode_symbols(g, x);
  g.weights *= 7.0;
  g.weights /= g.weights.sum();
  EXPECT_EQ(gmm::decode_symbols(g, x).symbols, base.symbols);
}
