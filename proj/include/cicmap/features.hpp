#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cicmap/error.hpp"
#include "cicmap/types.hpp"

namespace cicmap {

inline constexpr int kDefaultPatchSize = 512;

GridCoord patch_index(std::int64_t x, std::int64_t y, int patch_size);
GridDims grid_dims(std::int64_t width, std::int64_t height, int patch_size);

// True when every component lies in [0, 255] and is finite.
template <typename Derived>
bool is_valid_descriptor(const Eigen::MatrixBase<Derived>& d) {
  static_assert(Derived::RowsAtCompileTime == kDescriptorSize ||
                Derived::RowsAtCompileTime == Eigen::Dynamic);
  if (d.size() != kDescriptorSize) return false;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double v = static_cast<double>(d(i));
    if (!(v >= 0.0 && v <= kDescriptorMax)) return false;
  }
  return true;
}

struct KeypointRecord {
  std::int64_t x = 0;
  std::int64_t y = 0;
  Descriptor descriptor = Descriptor::Zero();
};

// All keypoint descriptors of one slide, stored column-wise in canonical
// order: patches in raster order, input order within a patch. Immutable
// once constructed.
class SlideDescriptorSet {
 public:
  SlideDescriptorSet() = default;

  // Columns of `descriptors` pair with entries of `xs`/`ys`. Records are
  // validated and stably regrouped into canonical order.
  SlideDescriptorSet(std::string slide_id, std::int64_t width_px,
                     std::int64_t height_px, int patch_size_px,
                     std::vector<std::int64_t> xs, std::vector<std::int64_t> ys,
                     DescriptorMatrix descriptors);

  SlideDescriptorSet(std::string slide_id, std::int64_t width_px,
                     std::int64_t height_px, int patch_size_px,
                     std::span<const KeypointRecord> records);

  const std::string& slide_id() const { return slide_id_; }
  std::int64_t width_px() const { return width_; }
  std::int64_t height_px() const { return height_; }
  int patch_size_px() const { return patch_size_; }
  GridDims dims() const { return dims_; }

  std::int64_t size() const { return descriptors_.cols(); }
  bool empty() const { return size() == 0; }

  const DescriptorMatrix& descriptors() const { return descriptors_; }
  std::int64_t x(std::int64_t i) const { return xs_[static_cast<std::size_t>(i)]; }
  std::int64_t y(std::int64_t i) const { return ys_[static_cast<std::size_t>(i)]; }

  std::int64_t cell_index(GridCoord c) const {
    return std::int64_t{c.y} * dims_.cols + c.x;
  }
  bool contains(GridCoord c) const {
    return c.x >= 0 && c.y >= 0 && c.x < dims_.cols && c.y < dims_.rows;
  }

  // Record index range [first, last) of a patch bucket.
  std::pair<std::int64_t, std::int64_t> patch_range(GridCoord c) const;
  std::int64_t patch_count(GridCoord c) const {
    auto [a, b] = patch_range(c);
    return b - a;
  }
  // Descriptors of one patch as a column block view.
  auto patch_descriptors(GridCoord c) const {
    auto [a, b] = patch_range(c);
    return descriptors_.middleCols(a, b - a);
  }

 private:
  std::string slide_id_;
  std::int64_t width_ = 0;
  std::int64_t height_ = 0;
  int patch_size_ = kDefaultPatchSize;
  GridDims dims_;
  std::vector<std::int64_t> xs_;
  std::vector<std::int64_t> ys_;
  DescriptorMatrix descriptors_;
  std::vector<std::int64_t> offsets_;  // cells + 1 entries
};

struct IngestOptions {
  int patch_size_px = kDefaultPatchSize;
  // Slide extent. Inferred from the largest coordinates when absent.
  std::optional<std::int64_t> width_px;
  std::optional<std::int64_t> height_px;
  // Used when the file carries no rows.
  std::string default_slide_id = "slide";
};

// Descriptor CSV: header `slide_id,x,y,d0,...,d127`, one keypoint per row.
SlideDescriptorSet ingest_descriptors(std::istream& in, const IngestOptions& opts);
SlideDescriptorSet ingest_descriptors_file(const std::string& path,
                                           const IngestOptions& opts);

// Writes records in canonical order. Integral components are printed
// without a fractional part.
void write_descriptors(std::ostream& out, const SlideDescriptorSet& slide);
void write_descriptors_file(const std::string& path, const SlideDescriptorSet& slide);

// 8-bit grayscale raster, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
};

// Reads binary PGM (P5) or PPM (P6, converted by luminance). Anything else
// raises FormatError.
GrayImage read_pnm(std::istream& in);
GrayImage read_pnm_file(const std::string& path);

struct ExtractionConfig {
  int stride_px = 8;
  int cell_px = 4;
  int patch_size_px = kDefaultPatchSize;
  std::string slide_id = "slide";
  unsigned threads = 1;
};

// Dense-grid descriptor. A window of 4x4 cells (cell_px each) is placed at
// every stride; each cell contributes an 8-bin gradient orientation
// histogram. Keypoint coordinates are window centres.
SlideDescriptorSet extract_descriptors(const GrayImage& image, const ExtractionConfig& cfg);

}  // namespace cicmap
