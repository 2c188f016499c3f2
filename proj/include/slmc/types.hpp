#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

namespace slmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Array = Eigen::ArrayXd;
using Index = Eigen::Index;

// A chain history / training set: one state per entry.
using Samples = std::vector<Vector>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace slmc
