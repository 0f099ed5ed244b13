#include <gtest/gtest.h>

#include <random>

#include "lidsvd/gmm.hpp"
#include "lidsvd/supervector.hpp"

using namespace lidsvd;

namespace {

gmm::DiagGmm random_model(int m, int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  gmm::DiagGmm g{Vector::Constant(m, 1.0 / m), RowMatrix(m, d), RowMatrix::Ones(m, d)};
  for (Eigen::Index i = 0; i < g.means.size(); ++i) g.means.data()[i] = n(rng);
  return g;
}

}  // namespace

TEST(Supervector, PaperLength) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(supervector::supervector(random_model(64, 39, rng)).size(), 2496);
}

TEST(Supervector, SingleComponentIsItsMean) {
  std::mt19937_64 rng(2);
  const auto g = random_model(1, 7, rng);
  EXPECT_EQ(supervector::supervector(g), g.means.row(0).transpose());
}

TEST(Supervector, ComponentMajorBlocks) {
  std::mt19937_64 rng(3);
  const auto ubm = random_model(6, 4, rng);
  auto model = ubm;
  model.means.row(3).array() += 0.5;
  const Vector diff = supervector::difference_vector(model, ubm);
  for (Eigen::Index i = 0; i < diff.size(); ++i) {
    if (i >= 12 && i < 16) EXPECT_DOUBLE_EQ(diff[i], 0.5);
    else EXPECT_EQ(diff[i], 0.0);
  }
}

TEST(DifferenceVector, SelfIsZero) {
  std::mt19937_64 rng(4);
  const auto ubm = random_model(8, 3, rng);
  EXPECT_EQ(supervector::difference_vector(ubm, ubm), Vector::Zero(24));
}

TEST(DifferenceVector, HugeRelevanceIsZero) {
  std::mt19937_64 rng(5);
  const auto ubm = random_model(8, 3, rng);
  RowMatrix x(100, 3);
  std::normal_distribution<double> n(0.0, 2.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  const auto adapted = gmm::map_adapt(ubm, x, {1e12});
  EXPECT_LE(supervector::difference_vector(adapted, ubm).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(DifferenceVector, ShapeMismatch) {
  std::mt19937_64 rng(6);
  try {
    supervector::difference_vector(random_model(4, 3, rng), random_model(5, 3, rng));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::shape_mismatch);
  }
}

TEST(DifferenceMatrix, MatchesSubtractionOracle) {
  std::mt19937_64 rng(7);
  const auto ubm = random_model(64, 39, rng);
  std::vector<std::pair<gmm::DiagGmm, int>> models;
  for (int u = 0; u < 960; ++u) models.emplace_back(u % 50 == 0 ? ubm : random_model(64, 39, rng), u % 10);
  const auto dm = supervector::build_difference_matrix(models, ubm);
  EXPECT_EQ(dm.rows.rows(), 960);
  EXPECT_EQ(dm.rows.cols(), 2496);
  EXPECT_EQ(dm.rows.row(0), Eigen::RowVectorXd::Zero(2496));
  for (int u : {1, 17, 959}) {
    for (int k = 0; k < 64; ++k)
      for (int j = 0; j < 39; ++j)
        ASSERT_EQ(dm.rows(u, 39 * k + j), models[u].first.means(k, j) - ubm.means(k, j));
    EXPECT_EQ(dm.labels[u], u % 10);
  }
}

TEST(DifferenceMatrix, ConvexBound) {
  std::mt19937_64 rng(8);
  const auto ubm = random_model(5, 2, rng);
  RowMatrix x(60, 2);
  std::normal_distribution<double> n(1.0, 2.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  const auto adapted = gmm::map_adapt(ubm, x, {16.0});
  const Vector diff = supervector::difference_vector(adapted, ubm);
  const RowMatrix gamma = gmm::posteriors(ubm, x);
  for (int k = 0; k < 5; ++k) {
    const double occ = gamma.col(k).sum();
    const Eigen::RowVectorXd e = (gamma.col(k).transpose() * x) / occ;
    const double alpha = occ / (occ + 16.0);
    for (int j = 0; j < 2; ++j)
      EXPECT_LE(std::abs(diff[2 * k + j]), alpha * std::abs(e[j] - ubm.means(k, j)) + 1e-12);
  }
}
