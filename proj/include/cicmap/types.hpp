#pragma once

#include <compare>
#include <cstdint>

#include <Eigen/Core>

namespace cicmap {

inline constexpr int kDescriptorSize = 128;
inline constexpr double kDescriptorMax = 255.0;

template <typename Scalar>
using DescriptorT = Eigen::Matrix<Scalar, kDescriptorSize, 1>;

template <typename Scalar>
using DescriptorMatrixT = Eigen::Matrix<Scalar, kDescriptorSize, Eigen::Dynamic>;

// Storage precision. Integer-valued components up to 255 give squared
// distances below 2^24, so float arithmetic on them is exact.
using Descriptor = DescriptorT<float>;
using DescriptorMatrix = DescriptorMatrixT<float>;

// Patch grid coordinate. Ordered in raster order: row (Y) first, then column.
struct GridCoord {
  int x = 0;
  int y = 0;

  friend bool operator==(const GridCoord&, const GridCoord&) = default;
  friend std::strong_ordering operator<=>(const GridCoord& a, const GridCoord& b) {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

struct GridDims {
  int cols = 0;
  int rows = 0;

  friend bool operator==(const GridDims&, const GridDims&) = default;
  std::int64_t cells() const { return std::int64_t{cols} * rows; }
};

}  // namespace cicmap
