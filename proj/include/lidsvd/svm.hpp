#pragma once

// One-vs-rest linear soft-margin SVMs.
//
// Each binary problem is solved in the dual,
//   min 1/2 a'Qa - e'a   s.t. 0 <= a_i <= C, y'a = 0,   Q_ij = y_i y_j <x_i, x_j>,
// by SMO-style pairwise coordinate steps with second-order working-set
// selection. The bias is not regularized.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lidsvd/embedding.hpp"
#include "lidsvd/error.hpp"
#include "lidsvd/linalg.hpp"
#include "lidsvd/parallel.hpp"

namespace lidsvd::svm {

struct TrainConfig {
  double c = 1.0;
  double tolerance = 1e-4;  // on the maximal KKT violation
  int max_passes = 10000;   // iteration cap is max_passes * N
  std::uint64_t seed = 1;
  bool standardize = false;  // scale each input dimension to unit variance first
};

struct BinarySolution {
  Vector weights;
  double bias = 0.0;
  Vector alpha;
  double dual_objective = 0.0;  // sum(a) - 1/2 a'Qa, the quantity being maximized
  long iterations = 0;
  bool converged = false;
};

struct SvmModel {
  RowMatrix weights;  // k x L
  Vector bias;        // k
  Vector input_scale;  // L, multiplies inputs before scoring
  double c = 1.0;
  std::vector<int> class_ids;
  std::vector<std::string> class_names;

  Eigen::Index num_classes() const { return weights.rows(); }
  Eigen::Index input_dim() const { return weights.cols(); }
};

struct Prediction {
  Eigen::Index class_index = 0;
  int class_id = 0;
  std::string class_name;
  Vector scores;
};

namespace detail {

inline BinarySolution solve_dual(const Eigen::MatrixXd& kernel, std::span<const double> y,
                                 const std::vector<Eigen::Index>& order, double c, double tol,
                                 long max_iter) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Vector alpha = Vector::Zero(n);
  Vector grad = -Vector::Ones(n);  // Q a - e
  const auto yi = [&](Eigen::Index i) { return y[static_cast<std::size_t>(i)]; };
  const auto q = [&](Eigen::Index i, Eigen::Index j) { return yi(i) * yi(j) * kernel(i, j); };
  const auto in_up = [&](Eigen::Index t) { return (yi(t) > 0 && alpha[t] < c) || (yi(t) < 0 && alpha[t] > 0); };
  const auto in_low = [&](Eigen::Index t) { return (yi(t) > 0 && alpha[t] > 0) || (yi(t) < 0 && alpha[t] < c); };
  constexpr double kTau = 1e-12;

  BinarySolution sol;
  for (sol.iterations = 0; sol.iterations < max_iter; ++sol.iterations) {
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t : order) {
      if (in_up(t) && -yi(t) * grad[t] > g_max) {
        g_max = -yi(t) * grad[t];
        i = t;
      }
      if (in_low(t)) g_min = std::min(g_min, -yi(t) * grad[t]);
    }
    if (i < 0 || g_max - g_min < tol) {
      sol.converged = true;
      break;
    }
    Eigen::Index j = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index t : order) {
      if (!in_low(t)) continue;
      const double b = g_max + yi(t) * grad[t];
      if (b <= 0.0) continue;
      double a = kernel(i, i) + kernel(t, t) - 2.0 * kernel(i, t);
      if (a <= 0.0) a = kTau;
      if (-(b * b) / a < best) {
        best = -(b * b) / a;
        j = t;
      }
    }
    if (j < 0) {
      sol.converged = true;
      break;
    }

    const double old_i = alpha[i];
    const double old_j = alpha[j];
    if (yi(i) != yi(j)) {
      double quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0 && alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = diff;
      } else if (diff <= 0 && alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0 && alpha[i] > c) {
        alpha[i] = c;
        alpha[j] = c - diff;
      } else if (diff <= 0 && alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c && alpha[i] > c) {
        alpha[i] = c;
        alpha[j] = sum - c;
      } else if (sum <= c && alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > c && alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = sum - c;
      } else if (sum <= c && alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i;
    const double dj = alpha[j] - old_j;
    for (Eigen::Index t = 0; t < n; ++t) grad[t] += q(t, i) * di + q(t, j) * dj;
  }

  // Bias from free vectors, or the middle of the feasible interval.
  double free_sum = 0.0;
  long free_count = 0;
  double upper = std::numeric_limits<double>::infinity();
  double lower = -std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = yi(t) * grad[t];
    if (alpha[t] > 0.0 && alpha[t] < c) {
      free_sum += yg;
      ++free_count;
    } else if ((alpha[t] >= c && yi(t) < 0) || (alpha[t] <= 0.0 && yi(t) > 0)) {
      upper = std::min(upper, yg);
    } else {
      lower = std::max(lower, yg);
    }
  }
  double rho = 0.0;
  if (free_count > 0)
    rho = free_sum / static_cast<double>(free_count);
  else if (std::isfinite(upper) && std::isfinite(lower))
    rho = 0.5 * (upper + lower);
  else if (std::isfinite(upper))
    rho = upper;
  else if (std::isfinite(lower))
    rho = lower;
  sol.bias = -rho;
  sol.alpha = alpha;
  // grad = Qa - e, so a'Qa = a'(grad + e).
  sol.dual_objective = alpha.sum() - 0.5 * alpha.dot(grad + Vector::Ones(n));
  return sol;
}

}  // namespace detail

/// Binary soft-margin SVM on rows of `x` with labels +1 / -1.
inline BinarySolution train_binary(const RowMatrix& x, std::span<const double> y, double c,
                                   double tolerance = 1e-4, long max_iter = 10000000,
                                   std::uint64_t seed = 1) {
  if (static_cast<Eigen::Index>(y.size()) != x.rows())
    throw Error(Errc::dimension_mismatch, "label count differs from row count");
  if (!(c > 0.0) || !(tolerance > 0.0)) throw Error(Errc::invalid_argument, "C and tolerance must be positive");
  std::vector<Eigen::Index> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const Eigen::MatrixXd kernel = x * x.transpose();
  BinarySolution sol = detail::solve_dual(kernel, y, order, c, tolerance, max_iter);
  sol.weights = Vector::Zero(x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t)
    if (sol.alpha[t] != 0.0) sol.weights += sol.alpha[t] * y[static_cast<std::size_t>(t)] * x.row(t).transpose();
  return sol;
}

/// One binary problem per class (class vs rest). Classes are ordered by id.
inline SvmModel train(const embedding::EmbeddedMatrix& data, const TrainConfig& cfg,
                      std::vector<std::string> class_names = {}) {
  const RowMatrix& x = data.rows;
  if (static_cast<Eigen::Index>(data.labels.size()) != x.rows())
    throw Error(Errc::dimension_mismatch, "label count differs from row count");
  if (!x.allFinite()) throw Error(Errc::invalid_argument, "non-finite SVM features");
  if (!(cfg.c > 0.0) || !(cfg.tolerance > 0.0)) throw Error(Errc::invalid_argument, "C and tolerance must be positive");

  SvmModel model;
  model.c = cfg.c;
  model.class_ids = data.labels;
  std::sort(model.class_ids.begin(), model.class_ids.end());
  model.class_ids.erase(std::unique(model.class_ids.begin(), model.class_ids.end()), model.class_ids.end());
  if (model.class_ids.size() < 2) throw Error(Errc::insufficient_data, "SVM training needs at least two classes");
  if (class_names.empty())
    for (int id : model.class_ids) class_names.push_back(std::to_string(id));
  if (class_names.size() != model.class_ids.size())
    throw Error(Errc::invalid_argument, "one class name per class required");
  {
    auto sorted = class_names;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw Error(Errc::invalid_argument, "class names must be unique");
  }
  model.class_names = std::move(class_names);

  model.input_scale = Vector::Ones(x.cols());
  if (cfg.standardize) {
    const Eigen::RowVectorXd mean = x.colwise().mean();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double sd = std::sqrt((x.col(j).array() - mean[j]).square().mean());
      if (sd > 0.0) model.input_scale[j] = 1.0 / sd;
    }
  }
  const RowMatrix scaled = x * model.input_scale.asDiagonal();
  const Eigen::MatrixXd kernel = scaled * scaled.transpose();

  const auto k = static_cast<Eigen::Index>(model.class_ids.size());
  model.weights.resize(k, x.cols());
  model.bias.resize(k);
  std::vector<Eigen::Index> order(data.labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const long max_iter = static_cast<long>(cfg.max_passes) * std::max<long>(1, static_cast<long>(x.rows()));

  parallel_for(static_cast<std::size_t>(k), [&](std::size_t m) {
    std::vector<double> y(data.labels.size());
    for (std::size_t t = 0; t < y.size(); ++t) y[t] = data.labels[t] == model.class_ids[m] ? 1.0 : -1.0;
    const BinarySolution sol = detail::solve_dual(kernel, y, order, cfg.c, cfg.tolerance, max_iter);
    Vector w = Vector::Zero(x.cols());
    for (Eigen::Index t = 0; t < x.rows(); ++t)
      if (sol.alpha[t] != 0.0) w += sol.alpha[t] * y[static_cast<std::size_t>(t)] * scaled.row(t).transpose();
    model.weights.row(static_cast<Eigen::Index>(m)) = w.transpose();
    model.bias[static_cast<Eigen::Index>(m)] = sol.bias;
  });
  return model;
}

/// Highest decision value wins; ties go to the lowest class index.
inline Prediction predict(const SvmModel& model, const Vector& x) {
  if (x.size() != model.input_dim())
    throw Error(Errc::dimension_mismatch, "input has " + std::to_string(x.size()) + " dims, SVM expects " +
                                              std::to_string(model.input_dim()));
  Prediction p;
  p.scores = model.weights * x.cwiseProduct(model.input_scale) + model.bias;
  for (Eigen::Index m = 1; m < p.scores.size(); ++m)
    if (p.scores[m] > p.scores[p.class_index]) p.class_index = m;
  p.class_id = model.class_ids[static_cast<std::size_t>(p.class_index)];
  p.class_name = model.class_names[static_cast<std::size_t>(p.class_index)];
  return p;
}

}  // namespace lidsvd::svm
