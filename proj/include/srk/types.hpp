#pragma once

#include <Eigen/Dense>

namespace srk {

// State vectors are dynamically sized but stack-allocated up to kMaxDim, so
// the per-step callback churn never touches the heap.
inline constexpr int kMaxDim = 8;

using State = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor | Eigen::AutoAlign, kMaxDim, 1>;
using StateMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor | Eigen::AutoAlign, kMaxDim, kMaxDim>;

}  // namespace srk
