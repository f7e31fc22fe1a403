#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cicmap/types.hpp"

namespace cicmap {

inline constexpr double kDefaultMatchThreshold = 325.0;

template <typename DerivedA, typename DerivedB>
auto squared_distance(const Eigen::MatrixBase<DerivedA>& a,
                      const Eigen::MatrixBase<DerivedB>& b) {
  return (a - b).squaredNorm();
}

// Euclidean distance between two descriptors.
template <typename DerivedA, typename DerivedB>
auto distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using std::sqrt;
  return sqrt(squared_distance(a, b));
}

// Two descriptors are equal when strictly closer than the threshold.
template <typename DerivedA, typename DerivedB>
bool matches(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
             double threshold) {
  return static_cast<double>(distance(a, b)) < threshold;
}

inline constexpr std::int32_t kNoLeader = -1;

// Index of the closest codebook column strictly within `threshold`, or
// kNoLeader. Equal distances resolve to the lowest index.
template <typename DerivedC, typename DerivedD>
std::int32_t nearest_leader(const Eigen::MatrixBase<DerivedC>& codebook,
                            const Eigen::MatrixBase<DerivedD>& d, double threshold) {
  using Scalar = typename DerivedC::Scalar;
  std::int32_t best = kNoLeader;
  Scalar best_d2 = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index j = 0; j < codebook.cols(); ++j) {
    const Scalar d2 = (codebook.col(j) - d).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<std::int32_t>(j);
    }
  }
  if (best == kNoLeader) return kNoLeader;
  // Compare on the distance itself so the strict bound holds exactly even
  // when threshold^2 is not representable.
  using std::sqrt;
  return static_cast<double>(sqrt(best_d2)) < threshold ? best : kNoLeader;
}

// Nearest leader for every column of `records`.
template <typename DerivedC, typename DerivedR>
std::vector<std::int32_t> assign_to_leaders(const Eigen::MatrixBase<DerivedC>& codebook,
                                            const Eigen::MatrixBase<DerivedR>& records,
                                            double threshold) {
  std::vector<std::int32_t> out(static_cast<std::size_t>(records.cols()));
  for (Eigen::Index i = 0; i < records.cols(); ++i) {
    out[static_cast<std::size_t>(i)] = nearest_leader(codebook, records.col(i), threshold);
  }
  return out;
}

}  // namespace cicmap
