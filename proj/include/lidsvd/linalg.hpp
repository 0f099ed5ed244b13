#pragma once

#include <Eigen/Dense>

namespace lidsvd {

/// Frame-major storage: one observation per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace lidsvd
