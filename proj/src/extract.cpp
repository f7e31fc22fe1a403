#include <cmath>
#include <numbers>

#include "cicmap/features.hpp"
#include "cicmap/parallel.hpp"

namespace cicmap {

namespace {

constexpr int kCellsPerSide = 4;
constexpr int kOrientationBins = 8;

struct Gradients {
  int width = 0;
  int height = 0;
  std::vector<float> magnitude;
  std::vector<std::uint8_t> bin;
};

Gradients compute_gradients(const GrayImage& img) {
  Gradients g;
  g.width = img.width;
  g.height = img.height;
  const auto n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  g.magnitude.resize(n);
  g.bin.resize(n);
  for (int y = 0; y < img.height; ++y) {
    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, img.height - 1);
    for (int x = 0; x < img.width; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, img.width - 1);
      const double gx = static_cast<double>(img.at(xp, y)) - static_cast<double>(img.at(xm, y));
      const double gy = static_cast<double>(img.at(x, yp)) - static_cast<double>(img.at(x, ym));
      const auto i = static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width) +
                     static_cast<std::size_t>(x);
      g.magnitude[i] = static_cast<float>(std::hypot(gx, gy));
      double theta = std::atan2(gy, gx);
      if (theta < 0.0) theta += 2.0 * std::numbers::pi;
      int b = static_cast<int>(std::floor(theta * kOrientationBins / (2.0 * std::numbers::pi)));
      g.bin[i] = static_cast<std::uint8_t>(b % kOrientationBins);
    }
  }
  return g;
}

}  // namespace

SlideDescriptorSet extract_descriptors(const GrayImage& image, const ExtractionConfig& cfg) {
  if (image.width <= 0 || image.height <= 0 ||
      image.pixels.size() !=
          static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height)) {
    throw FormatError("extract_descriptors: empty or inconsistent raster");
  }
  if (cfg.stride_px <= 0 || cfg.cell_px <= 0) {
    throw InvalidArgument("extract_descriptors: stride_px and cell_px must be positive");
  }

  const Gradients grad = compute_gradients(image);
  const int window = kCellsPerSide * cfg.cell_px;
  const int rows = image.height >= window ? (image.height - window) / cfg.stride_px + 1 : 0;
  const int cols = image.width >= window ? (image.width - window) / cfg.stride_px + 1 : 0;

  struct Row {
    std::vector<KeypointRecord> records;
  };
  std::vector<Row> out(static_cast<std::size_t>(rows));

  parallel_for(rows, cfg.threads, [&](std::int64_t r0, std::int64_t r1) {
    for (std::int64_t r = r0; r < r1; ++r) {
      const int wy = static_cast<int>(r) * cfg.stride_px;
      for (int c = 0; c < cols; ++c) {
        const int wx = c * cfg.stride_px;
        Eigen::Matrix<double, kDescriptorSize, 1> hist =
            Eigen::Matrix<double, kDescriptorSize, 1>::Zero();
        for (int dy = 0; dy < window; ++dy) {
          const int cy = dy / cfg.cell_px;
          for (int dx = 0; dx < window; ++dx) {
            const int cx = dx / cfg.cell_px;
            const auto i = static_cast<std::size_t>(wy + dy) * static_cast<std::size_t>(grad.width) +
                           static_cast<std::size_t>(wx + dx);
            hist((cy * kCellsPerSide + cx) * kOrientationBins + grad.bin[i]) += grad.magnitude[i];
          }
        }
        const double norm = hist.norm();
        if (norm == 0.0) continue;
        KeypointRecord rec;
        rec.x = wx + window / 2;
        rec.y = wy + window / 2;
        rec.descriptor = (hist * (kDescriptorMax / norm)).cwiseMin(kDescriptorMax).cast<float>();
        out[static_cast<std::size_t>(r)].records.push_back(rec);
      }
    }
  });

  std::vector<KeypointRecord> all;
  for (auto& row : out) {
    all.insert(all.end(), row.records.begin(), row.records.end());
  }
  return SlideDescriptorSet(cfg.slide_id, image.width, image.height, cfg.patch_size_px, all);
}

}  // namespace cicmap
