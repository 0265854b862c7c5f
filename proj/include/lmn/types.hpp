#pragma once

#include <Eigen/Dense>

namespace lmn {

// All arithmetic is 64-bit; file formats may store 32-bit values.
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kNumAnswers = 5;

}  // namespace lmn
