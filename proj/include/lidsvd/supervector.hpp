#pragma once

// Mean supervectors of adapted models and the UBM-centred difference matrix.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lidsvd/error.hpp"
#include "lidsvd/gmm.hpp"
#include "lidsvd/linalg.hpp"

namespace lidsvd::supervector {

/// Component-major concatenation: mean m occupies [m*d, (m+1)*d).
inline Eigen::VectorXd supervector(const gmm::DiagGmm& model) {
  return Eigen::Map<const Eigen::VectorXd>(model.means.data(), model.means.size());
}

inline void check_compatible(const gmm::DiagGmm& model, const gmm::DiagGmm& ubm) {
  if (model.num_components() != ubm.num_components() || model.dim() != ubm.dim())
    throw Error(Errc::shape_mismatch,
                "model is " + std::to_string(model.num_components()) + "x" + std::to_string(model.dim()) +
                    ", UBM is " + std::to_string(ubm.num_components()) + "x" + std::to_string(ubm.dim()));
}

inline Eigen::VectorXd difference_vector(const gmm::DiagGmm& model, const gmm::DiagGmm& ubm) {
  check_compatible(model, ubm);
  return supervector(model) - supervector(ubm);
}

struct DifferenceMatrix {
  RowMatrix rows;  // N_tot x M*d
  std::vector<int> labels;
  Eigen::VectorXd ubm_mean;
};

inline DifferenceMatrix build_difference_matrix(std::span<const std::pair<gmm::DiagGmm, int>> models,
                                                const gmm::DiagGmm& ubm) {
  DifferenceMatrix out;
  out.ubm_mean = supervector(ubm);
  out.rows.resize(static_cast<Eigen::Index>(models.size()), out.ubm_mean.size());
  for (std::size_t u = 0; u < models.size(); ++u) {
    out.rows.row(static_cast<Eigen::Index>(u)) = difference_vector(models[u].first, ubm).transpose();
    out.labels.push_back(models[u].second);
  }
  return out;
}

}  // namespace lidsvd::supervector
