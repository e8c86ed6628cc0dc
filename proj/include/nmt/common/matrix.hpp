#pragma once

#include <Eigen/Dense>

namespace nmt {

// Row-major so that a matrix of stacked row vectors reshapes for free.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace nmt
