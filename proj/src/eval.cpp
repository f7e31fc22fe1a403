#include "cicmap/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

namespace cicmap {

namespace {

struct LabeledScores {
  std::vector<double> cancer;
  std::vector<double> normal;
};

LabeledScores collect(const ScoreMap& map, const PatchLabels& labels) {
  LabeledScores out;
  for (std::size_t i = 0; i < map.cells.size(); ++i) {
    const auto& cell = map.cells[i];
    if (cell.skipped) continue;
    switch (labels.get(map.coord(i))) {
      case PatchLabel::cancer: out.cancer.push_back(cell.score); break;
      case PatchLabel::normal: out.normal.push_back(cell.score); break;
      case PatchLabel::excluded: break;
    }
  }
  return out;
}

std::string fmt9(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<HistogramBin> histogram(const ScoreMap& map, const PatchLabels& labels,
                                    std::optional<double> bin_width) {
  const auto scores = collect(map, labels);
  if (scores.cancer.empty() && scores.normal.empty()) return {};

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* v : {&scores.cancer, &scores.normal}) {
    for (double s : *v) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  }
  double w = bin_width.value_or((hi - lo) / 50.0);
  if (bin_width && !(*bin_width > 0.0)) throw InvalidArgument("histogram: bin width must be > 0");
  if (!(w > 0.0)) w = 1.0;

  auto bin_of = [w](double s) {
    auto i = static_cast<std::int64_t>(std::floor(s / w));
    // Keep the bin consistent with the edges as they are reported.
    while (s < static_cast<double>(i) * w) --i;
    while (s >= static_cast<double>(i + 1) * w) ++i;
    return i;
  };
  const std::int64_t first = bin_of(lo), last = bin_of(hi);
  std::vector<HistogramBin> bins(static_cast<std::size_t>(last - first + 1));
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const auto i = first + static_cast<std::int64_t>(k);
    bins[k].lo = static_cast<double>(i) * w;
    bins[k].hi = static_cast<double>(i + 1) * w;
  }
  for (double s : scores.cancer) ++bins[static_cast<std::size_t>(bin_of(s) - first)].cancer;
  for (double s : scores.normal) ++bins[static_cast<std::size_t>(bin_of(s) - first)].normal;
  return bins;
}

RocResult roc_auc(const std::vector<double>& cancer_scores,
                  const std::vector<double>& normal_scores) {
  if (cancer_scores.empty() || normal_scores.empty()) {
    throw EvaluationError("roc_auc: needs at least one cancer and one normal patch");
  }
  std::vector<std::pair<double, bool>> all;
  all.reserve(cancer_scores.size() + normal_scores.size());
  for (double s : cancer_scores) all.emplace_back(s, true);
  for (double s : normal_scores) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  const auto np = static_cast<double>(cancer_scores.size());
  const auto nn = static_cast<double>(normal_scores.size());
  RocResult roc;
  roc.thresholds.push_back(std::numeric_limits<double>::infinity());
  roc.tpr.push_back(0.0);
  roc.fpr.push_back(0.0);

  // Integer counts keep the trapezoid sum exact up to one final division.
  std::int64_t tp = 0, fp = 0;
  double area2 = 0.0;  // twice the area in units of 1/(np*nn)
  for (std::size_t i = 0; i < all.size();) {
    const double t = all[i].first;
    const std::int64_t tp0 = tp, fp0 = fp;
    for (; i < all.size() && all[i].first == t; ++i) (all[i].second ? tp : fp)++;
    area2 += static_cast<double>((fp - fp0) * (tp + tp0));
    roc.thresholds.push_back(t);
    roc.tpr.push_back(static_cast<double>(tp) / np);
    roc.fpr.push_back(static_cast<double>(fp) / nn);
  }
  roc.auc = area2 / (2.0 * np * nn);
  return roc;
}

RocResult roc_auc(const ScoreMap& map, const PatchLabels& labels) {
  const auto scores = collect(map, labels);
  return roc_auc(scores.cancer, scores.normal);
}

void write_histogram(std::ostream& out, const std::vector<HistogramBin>& bins) {
  out << "bin_lo,bin_hi,cancer,normal\n";
  for (const auto& b : bins) {
    out << fmt17(b.lo) << ',' << fmt17(b.hi) << ',' << b.cancer << ',' << b.normal << '\n';
  }
}

void write_histogram_file(const std::string& path, const std::vector<HistogramBin>& bins) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_histogram(out, bins);
  if (!out) throw IoError("write failure on " + path);
}

void write_roc(std::ostream& out, const RocResult& roc) {
  out << "threshold,fpr,tpr\n";
  for (std::size_t i = 0; i < roc.thresholds.size(); ++i) {
    out << fmt9(roc.thresholds[i]) << ',' << fmt17(roc.fpr[i]) << ',' << fmt17(roc.tpr[i]) << '\n';
  }
  out << "auc," << fmt17(roc.auc) << '\n';
}

void write_roc_file(const std::string& path, const RocResult& roc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_roc(out, roc);
  if (!out) throw IoError("write failure on " + path);
}

double score_percentile95(const ScoreMap& map) {
  std::vector<double> mags;
  for (const auto& c : map.cells) {
    if (!c.skipped) mags.push_back(std::abs(c.score));
  }
  if (mags.empty()) return 0.0;
  std::sort(mags.begin(), mags.end());
  // Nearest-rank percentile.
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(mags.size())));
  return mags[std::max<std::size_t>(rank, 1) - 1];
}

Rgb heatmap_color(const ScoreCell& cell, double s95) {
  if (cell.skipped) return kSkippedGray;
  if (cell.score == 0.0) return {255, 255, 255};
  const double t = s95 > 0.0 ? std::min(1.0, std::abs(cell.score) / s95) : 1.0;
  // Capped at 254 so the faintest tint still differs from white.
  const auto fade = static_cast<std::uint8_t>(std::lround(254.0 * (1.0 - t)));
  return cell.score > 0.0 ? Rgb{fade, fade, 255} : Rgb{255, fade, fade};
}

RgbImage heatmap_image(const ScoreMap& map, int block_px) {
  if (map.cells.empty()) throw InvalidArgument("render_heatmap: empty score map");
  if (block_px <= 0) throw InvalidArgument("render_heatmap: block size must be > 0");
  const double s95 = score_percentile95(map);
  RgbImage img;
  img.width = map.dims.cols * block_px;
  img.height = map.dims.rows * block_px;
  img.pixels.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
  for (std::size_t i = 0; i < map.cells.size(); ++i) {
    const Rgb color = heatmap_color(map.cells[i], s95);
    const auto c = map.coord(i);
    for (int dy = 0; dy < block_px; ++dy) {
      const auto row = static_cast<std::size_t>(c.y * block_px + dy) * static_cast<std::size_t>(img.width);
      for (int dx = 0; dx < block_px; ++dx) {
        img.pixels[row + static_cast<std::size_t>(c.x * block_px + dx)] = color;
      }
    }
  }
  return img;
}

void write_ppm(std::ostream& out, const RgbImage& img) {
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  for (const auto& p : img.pixels) {
    const char px[3] = {static_cast<char>(p.r), static_cast<char>(p.g), static_cast<char>(p.b)};
    out.write(px, 3);
  }
}

void render_heatmap(const ScoreMap& map, const std::string& path, int block_px) {
  const auto img = heatmap_image(map, block_px);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_ppm(out, img);
  if (!out) throw IoError("write failure on " + path);
}

}  // namespace cicmap
