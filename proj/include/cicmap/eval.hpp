#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cicmap/learner.hpp"
#include "cicmap/scoring.hpp"

namespace cicmap {

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::int64_t cancer = 0;
  std::int64_t normal = 0;
};

// Bins scores of non-skipped labeled patches into [i*w, (i+1)*w), so that 0
// is always a bin edge. Contiguous from the lowest to the highest occupied
// bin. Default width is (max - min) / 50.
std::vector<HistogramBin> histogram(const ScoreMap& map, const PatchLabels& labels,
                                    std::optional<double> bin_width = std::nullopt);

struct RocResult {
  std::vector<double> thresholds;  // descending; the first point uses +inf
  std::vector<double> tpr;
  std::vector<double> fpr;
  double auc = 0.0;
};

// Sweep over distinct scores, patch predicted cancer when score >= threshold.
// AUC by the trapezoidal rule.
RocResult roc_auc(const ScoreMap& map, const PatchLabels& labels);
RocResult roc_auc(const std::vector<double>& cancer_scores,
                  const std::vector<double>& normal_scores);

void write_histogram(std::ostream& out, const std::vector<HistogramBin>& bins);
void write_histogram_file(const std::string& path, const std::vector<HistogramBin>& bins);
void write_roc(std::ostream& out, const RocResult& roc);
void write_roc_file(const std::string& path, const RocResult& roc);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;
  const Rgb& at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
};

inline constexpr Rgb kSkippedGray{128, 128, 128};

// Patch colour: blue for positive scores, red for negative, white at zero,
// gray when skipped. Intensity is min(1, |score| / s95), s95 the 95th
// percentile of |score| over scored patches.
Rgb heatmap_color(const ScoreCell& cell, double s95);
double score_percentile95(const ScoreMap& map);
RgbImage heatmap_image(const ScoreMap& map, int block_px = 8);
void write_ppm(std::ostream& out, const RgbImage& img);
void render_heatmap(const ScoreMap& map, const std::string& path, int block_px = 8);

}  // namespace cicmap
