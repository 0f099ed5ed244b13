#pragma once

// Diagonal-covariance GMM: EM training of the background model, mean-only
// MAP adaptation, scoring and frame-wise component decoding.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "lidsvd/error.hpp"
#include "lidsvd/features.hpp"
#include "lidsvd/linalg.hpp"
#include "lidsvd/parallel.hpp"

namespace lidsvd::gmm {

struct DiagGmm {
  Vector weights;       // M
  RowMatrix means;      // M x d
  RowMatrix variances;  // M x d

  Eigen::Index num_components() const { return weights.size(); }
  Eigen::Index dim() const { return means.cols(); }

  void validate() const {
    const Eigen::Index m = num_components();
    if (m < 1) throw Error(Errc::invalid_argument, "GMM has no components");
    if (means.rows() != m || variances.rows() != m || variances.cols() != means.cols())
      throw Error(Errc::shape_mismatch, "GMM weights/means/variances disagree in shape");
    if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-10)
      throw Error(Errc::inconsistent_model, "GMM weights must be non-negative and sum to 1");
    if (!(variances.array() > 0.0).all() || !means.allFinite())
      throw Error(Errc::inconsistent_model, "GMM variances must be positive and means finite");
  }
};

struct MapConfig {
  double relevance = 16.0;
};

struct SymbolSequence {
  std::vector<int> symbols;
  int alphabet_size = 0;
};

struct EmConfig {
  int components = 64;
  int em_iters = 10;
  std::uint64_t seed = 1;
  Eigen::Index kmeans_sample = 20000;
  int kmeans_iters = 5;
  double variance_floor_ratio = 1e-4;  // times the global per-dimension variance
};

struct EmReport {
  std::vector<double> avg_log_likelihood;  // one entry per E-step, last one after the final M-step
  int reseeded_components = 0;
};

namespace detail {

inline void check_dim(const DiagGmm& model, Eigen::Index d) {
  if (model.dim() != d)
    throw Error(Errc::dimension_mismatch, "features have dimension " + std::to_string(d) +
                                              ", model expects " + std::to_string(model.dim()));
}

inline double log_sum_exp(const auto& row) {
  const double mx = row.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((row.array() - mx).exp().sum());
}

}  // namespace detail

/// log N(x_t; mu_m, sigma2_m), plus log w_m when `with_weights`; T x M.
inline RowMatrix component_log_likelihoods(const DiagGmm& model, const RowMatrix& x,
                                           bool with_weights = true) {
  detail::check_dim(model, x.cols());
  const Eigen::Index m = model.num_components();
  const RowMatrix precision = model.variances.cwiseInverse();
  const RowMatrix scaled_means = model.means.cwiseProduct(precision);
  Vector offset(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    offset[k] = -0.5 * (model.dim() * std::log(2.0 * std::numbers::pi) +
                        model.variances.row(k).array().log().sum() +
                        model.means.row(k).dot(scaled_means.row(k)));
    if (with_weights) offset[k] += std::log(model.weights[k]);
  }
  RowMatrix ll = x * scaled_means.transpose();
  ll.noalias() -= 0.5 * (x.array().square().matrix() * precision.transpose());
  ll.rowwise() += offset.transpose();
  return ll;
}

/// Component responsibilities gamma_t(m); each row sums to one.
inline RowMatrix posteriors(const DiagGmm& model, const RowMatrix& x) {
  RowMatrix ll = component_log_likelihoods(model, x);
  for (Eigen::Index t = 0; t < ll.rows(); ++t) {
    const double lse = detail::log_sum_exp(ll.row(t));
    ll.row(t) = (ll.row(t).array() - lse).exp();
  }
  return ll;
}

/// Mean per-frame log p(x_t | model).
inline double log_likelihood(const DiagGmm& model, const RowMatrix& x) {
  const RowMatrix ll = component_log_likelihoods(model, x);
  if (ll.rows() == 0) throw Error(Errc::too_short, "no frames to score");
  double total = 0.0;
  for (Eigen::Index t = 0; t < ll.rows(); ++t) total += detail::log_sum_exp(ll.row(t));
  return total / static_cast<double>(ll.rows());
}

inline double log_likelihood(const DiagGmm& model, const features::FeatureMatrix& feats) {
  return log_likelihood(model, feats.frames);
}

namespace detail {

struct Accumulator {
  Vector occupancy;   // M
  RowMatrix first;    // M x d
  RowMatrix second;   // M x d
  double log_likelihood = 0.0;
};

constexpr Eigen::Index kBlockFrames = 4096;

/// Sufficient statistics accumulated per fixed-size block and reduced in
/// block order, so results do not depend on the thread count.
inline Accumulator accumulate(const DiagGmm& model, const RowMatrix& data) {
  const Eigen::Index n = data.rows();
  const Eigen::Index m = model.num_components();
  const Eigen::Index d = model.dim();
  const auto blocks = static_cast<std::size_t>((n + kBlockFrames - 1) / kBlockFrames);
  std::vector<Accumulator> partial(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    const Eigen::Index begin = static_cast<Eigen::Index>(b) * kBlockFrames;
    const Eigen::Index rows = std::min(kBlockFrames, n - begin);
    const RowMatrix x = data.middleRows(begin, rows);
    RowMatrix gamma = component_log_likelihoods(model, x);
    double ll = 0.0;
    for (Eigen::Index t = 0; t < rows; ++t) {
      const double lse = log_sum_exp(gamma.row(t));
      ll += lse;
      gamma.row(t) = (gamma.row(t).array() - lse).exp();
    }
    Accumulator& acc = partial[b];
    acc.occupancy = gamma.colwise().sum().transpose();
    acc.first = gamma.transpose() * x;
    acc.second = gamma.transpose() * x.array().square().matrix();
    acc.log_likelihood = ll;
  });
  Accumulator total{Vector::Zero(m), RowMatrix::Zero(m, d), RowMatrix::Zero(m, d), 0.0};
  for (const auto& p : partial) {
    total.occupancy += p.occupancy;
    total.first += p.first;
    total.second += p.second;
    total.log_likelihood += p.log_likelihood;
  }
  return total;
}

/// k-means++ seeding followed by a few Lloyd iterations on `sample`; the
/// clusters give the initial means, variances and weights.
inline DiagGmm kmeans_init(const RowMatrix& sample, int components, int lloyd_iters,
                           const Vector& global_var, const Vector& var_floor, std::mt19937_64& rng) {
  const Eigen::Index n = sample.rows();
  const Eigen::Index d = sample.cols();
  RowMatrix centers(components, d);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = sample.row(pick(rng));
  Vector nearest = (sample.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int k = 1; k < components; ++k) {
    const double total = nearest.sum();
    Eigen::Index chosen = pick(rng);
    if (total > 0.0) {
      double target = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (chosen = 0; chosen < n - 1; ++chosen) {
        target -= nearest[chosen];
        if (target <= 0.0) break;
      }
    }
    centers.row(k) = sample.row(chosen);
    nearest = nearest.cwiseMin((sample.rowwise() - centers.row(k)).rowwise().squaredNorm());
  }

  std::vector<Eigen::Index> assign(static_cast<std::size_t>(n), 0);
  Vector counts(components);
  RowMatrix sums(components, d);
  RowMatrix sq_sums(components, d);
  for (int it = 0; it <= lloyd_iters; ++it) {
    const Vector center_norms = centers.rowwise().squaredNorm();
    const RowMatrix cross = sample * centers.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (center_norms.transpose() - 2.0 * cross.row(i)).minCoeff(&best);
      assign[static_cast<std::size_t>(i)] = best;
    }
    counts.setZero();
    sums.setZero();
    sq_sums.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index k = assign[static_cast<std::size_t>(i)];
      counts[k] += 1.0;
      sums.row(k) += sample.row(i);
      sq_sums.row(k) += sample.row(i).array().square().matrix();
    }
    for (int k = 0; k < components; ++k)
      if (counts[k] > 0) centers.row(k) = sums.row(k) / counts[k];
  }

  DiagGmm model;
  model.means = centers;
  model.variances.resize(components, d);
  model.weights.resize(components);
  for (int k = 0; k < components; ++k) {
    const double c = std::max(counts[k], 1.0);
    Eigen::RowVectorXd var = sq_sums.row(k) / c - centers.row(k).array().square().matrix();
    if (counts[k] < 2) var = global_var.transpose();
    model.variances.row(k) = var.cwiseMax(var_floor.transpose());
    model.weights[k] = c;
  }
  model.weights /= model.weights.sum();
  return model;
}

}  // namespace detail

/// Trains the background model: seeded k-means++ on a strided subsample,
/// then `em_iters` EM iterations over all frames. Variances are floored at
/// variance_floor_ratio times the global variance after every M-step.
inline DiagGmm train_ubm(const RowMatrix& data, const EmConfig& cfg, EmReport* report = nullptr) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  const int m = cfg.components;
  if (m < 1) throw Error(Errc::invalid_argument, "component count must be positive");
  if (n < 10 * static_cast<Eigen::Index>(m))
    throw Error(Errc::insufficient_data, "UBM training needs at least 10 frames per component (" +
                                             std::to_string(n) + " frames for " + std::to_string(m) +
                                             " components)");
  if (!data.allFinite()) throw Error(Errc::invalid_argument, "non-finite training frames");

  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Vector global_var =
      ((data.array().square().colwise().sum() / static_cast<double>(n)) - mean.array().square()).transpose();
  const Vector var_floor = (global_var * cfg.variance_floor_ratio).cwiseMax(1e-12);

  std::mt19937_64 rng(cfg.seed);
  const Eigen::Index sample_size = std::min(n, std::max<Eigen::Index>(cfg.kmeans_sample, m));
  const Eigen::Index stride = n / sample_size;
  const Eigen::Index offset = std::uniform_int_distribution<Eigen::Index>(0, stride - 1)(rng);
  RowMatrix sample(sample_size, d);
  for (Eigen::Index i = 0; i < sample_size; ++i) sample.row(i) = data.row(offset + i * stride);
  DiagGmm model = detail::kmeans_init(sample, m, cfg.kmeans_iters, global_var, var_floor, rng);

  EmReport local;
  EmReport& rep = report ? *report : local;
  rep = EmReport{};
  std::uniform_int_distribution<Eigen::Index> any_frame(0, n - 1);
  for (int it = 0; it <= cfg.em_iters; ++it) {
    const detail::Accumulator acc = detail::accumulate(model, data);
    rep.avg_log_likelihood.push_back(acc.log_likelihood / static_cast<double>(n));
    if (it == cfg.em_iters) break;
    for (int k = 0; k < m; ++k) {
      const double occ = acc.occupancy[k];
      if (occ < 1e-10 * static_cast<double>(n)) {
        model.means.row(k) = data.row(any_frame(rng));
        model.variances.row(k) = global_var.transpose().cwiseMax(var_floor.transpose());
        model.weights[k] = 1.0 / static_cast<double>(n);
        ++rep.reseeded_components;
        continue;
      }
      model.weights[k] = occ / static_cast<double>(n);
      model.means.row(k) = acc.first.row(k) / occ;
      model.variances.row(k) = (acc.second.row(k) / occ - model.means.row(k).array().square().matrix())
                                   .cwiseMax(var_floor.transpose());
    }
    model.weights /= model.weights.sum();
  }
  return model;
}

/// Mean-only MAP adaptation: alpha_m = n_m / (n_m + r) blends the data mean
/// of each component with the UBM mean. Weights and variances are copied.
inline DiagGmm map_adapt(const DiagGmm& ubm, const RowMatrix& x, const MapConfig& cfg = {}) {
  detail::check_dim(ubm, x.cols());
  if (!(cfg.relevance >= 0.0) || !std::isfinite(cfg.relevance))
    throw Error(Errc::invalid_argument, "relevance factor must be finite and non-negative");
  DiagGmm adapted = ubm;
  if (x.rows() == 0) return adapted;
  const RowMatrix gamma = posteriors(ubm, x);
  const Vector occupancy = gamma.colwise().sum().transpose();
  const RowMatrix first = gamma.transpose() * x;
  for (Eigen::Index k = 0; k < ubm.num_components(); ++k) {
    const double occ = occupancy[k];
    if (!(occ > 0.0)) continue;
    const double alpha = occ / (occ + cfg.relevance);
    adapted.means.row(k) = alpha * (first.row(k) / occ) + (1.0 - alpha) * ubm.means.row(k);
  }
  return adapted;
}

inline DiagGmm map_adapt(const DiagGmm& ubm, const features::FeatureMatrix& feats,
                         const MapConfig& cfg = {}) {
  return map_adapt(ubm, feats.frames, cfg);
}

/// SS_t = argmax_m score(x_t, m); ties go to the smallest index.
inline SymbolSequence decode_symbols(const DiagGmm& model, const RowMatrix& x, bool with_weights = true) {
  const RowMatrix ll = component_log_likelihoods(model, x, with_weights);
  SymbolSequence seq;
  seq.alphabet_size = static_cast<int>(model.num_components());
  seq.symbols.resize(static_cast<std::size_t>(ll.rows()));
  for (Eigen::Index t = 0; t < ll.rows(); ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < ll.cols(); ++k)
      if (ll(t, k) > ll(t, best)) best = k;
    seq.symbols[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return seq;
}

inline SymbolSequence decode_symbols(const DiagGmm& model, const features::FeatureMatrix& feats,
                                     bool with_weights = true) {
  return decode_symbols(model, feats.frames, with_weights);
}

}  // namespace lidsvd::gmm
