#pragma once

// Truncated SVD embedding. The retained rank L is the smallest k whose
// cumulative squared singular values reach the requested energy fraction.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "lidsvd/error.hpp"
#include "lidsvd/linalg.hpp"

namespace lidsvd::embedding {

struct EmbeddingSpace {
  Vector spectrum;        // all min(N, D) singular values, descending
  Eigen::Index rank = 0;  // singular values above the numerical tolerance
  RowMatrix basis;        // V_L, D x L
  double energy_fraction = 0.6;

  Eigen::Index ambient_dim() const { return basis.rows(); }
  Eigen::Index retained() const { return basis.cols(); }
  Vector singular_values() const { return spectrum.head(retained()); }
};

struct EmbeddedMatrix {
  RowMatrix rows;  // N x L
  std::vector<int> labels;
};

struct FitResult {
  EmbeddingSpace space;
  EmbeddedMatrix embedded;
};

/// Cumulative fraction of squared singular values, one entry per index
/// (1-based) of `spectrum`.
inline std::vector<std::pair<int, double>> energy_curve(const Vector& spectrum) {
  if (spectrum.size() == 0) throw Error(Errc::invalid_argument, "empty spectrum");
  const double total = spectrum.squaredNorm();
  if (!(total > 0.0)) throw Error(Errc::degenerate_data, "spectrum has no energy");
  std::vector<std::pair<int, double>> curve;
  curve.reserve(static_cast<std::size_t>(spectrum.size()));
  double running = 0.0;
  for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
    running += spectrum[i] * spectrum[i];
    curve.emplace_back(static_cast<int>(i + 1), std::min(1.0, running / total));
  }
  curve.back().second = 1.0;
  return curve;
}

/// Smallest L with energy(L) >= tau, never above `rank`.
inline Eigen::Index retained_rank(const Vector& spectrum, Eigen::Index rank, double tau) {
  const double total = spectrum.squaredNorm();
  double running = 0.0;
  for (Eigen::Index i = 0; i < rank; ++i) {
    running += spectrum[i] * spectrum[i];
    if (running / total >= tau) return i + 1;
  }
  return rank;
}

/// x^T V_L diag(s_L)^-1 for every row of `x`.
inline RowMatrix project(const EmbeddingSpace& space, const RowMatrix& x) {
  if (x.cols() != space.ambient_dim())
    throw Error(Errc::dimension_mismatch, "vector length " + std::to_string(x.cols()) +
                                              " does not match embedding dimension " +
                                              std::to_string(space.ambient_dim()));
  RowMatrix out = x * space.basis;
  out.array().rowwise() /= space.singular_values().transpose().array();
  return out;
}

inline Vector project(const EmbeddingSpace& space, const Vector& x) {
  return project(space, RowMatrix(x.transpose())).row(0).transpose();
}

/// Thin SVD through the eigendecomposition of the smaller Gram matrix, so a
/// fat N x D matrix never needs a D x D factorization.
inline FitResult fit(const RowMatrix& x, double tau, std::vector<int> labels = {}) {
  if (!(tau > 0.0 && tau <= 1.0)) throw Error(Errc::invalid_argument, "energy fraction must be in (0, 1]");
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n < 2) throw Error(Errc::insufficient_data, "SVD embedding needs at least two rows");
  if (d < 1) throw Error(Errc::invalid_argument, "SVD embedding needs at least one column");
  if (!x.allFinite()) throw Error(Errc::invalid_argument, "non-finite entries in matrix");
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != n)
    throw Error(Errc::dimension_mismatch, "label count differs from row count");

  const bool fat = n <= d;
  const Eigen::Index r = std::min(n, d);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(r, r);
  if (fat)
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
  else
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw Error(Errc::degenerate_data, "eigendecomposition failed");

  // Eigen returns ascending eigenvalues; flip to descending.
  const Vector lambda = eig.eigenvalues().reverse();
  const Eigen::MatrixXd vecs = eig.eigenvectors().rowwise().reverse();

  FitResult result;
  EmbeddingSpace& space = result.space;
  space.energy_fraction = tau;
  space.spectrum = lambda.cwiseMax(0.0).cwiseSqrt();
  if (!(lambda[0] > 0.0)) throw Error(Errc::degenerate_data, "matrix is identically zero");

  // Singular values below this level are not resolvable through a Gram matrix.
  const double tol = std::max<double>(n, d) * std::numeric_limits<double>::epsilon() * lambda[0];
  space.rank = 0;
  while (space.rank < r && lambda[space.rank] > tol &&
         space.spectrum[space.rank] > 1e-12 * space.spectrum[0])
    ++space.rank;

  const Eigen::Index keep = retained_rank(space.spectrum, space.rank, tau);
  const Vector s = space.spectrum.head(keep);
  Eigen::MatrixXd left;  // U_L, n x keep
  if (fat) {
    left = vecs.leftCols(keep);
    space.basis = (x.transpose() * left) * s.cwiseInverse().asDiagonal();
  } else {
    space.basis = vecs.leftCols(keep);
    left = (x * space.basis) * s.cwiseInverse().asDiagonal();
  }
  // Sign convention: the largest-magnitude entry of each U column is >= 0.
  for (Eigen::Index j = 0; j < keep; ++j) {
    Eigen::Index at = 0;
    left.col(j).cwiseAbs().maxCoeff(&at);
    if (left(at, j) < 0.0) space.basis.col(j) *= -1.0;
  }

  result.embedded.rows = project(space, x);
  result.embedded.labels = std::move(labels);
  return result;
}

}  // namespace lidsvd::embedding
