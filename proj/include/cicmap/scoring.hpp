#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cicmap/evidence.hpp"

namespace cicmap {

struct PatchScore {
  double score = 0.0;
  std::int64_t pos_hits = 0;
  std::int64_t neg_hits = 0;
};

struct ScoreCell {
  double score = 0.0;  // meaningless when skipped
  std::int64_t n_descriptors = 0;
  bool skipped = true;
  std::int64_t pos_hits = 0;
  std::int64_t neg_hits = 0;
};

// Per-patch classification information content over a slide grid, cells in
// raster order.
struct ScoreMap {
  std::string slide_id;
  GridDims dims;
  std::vector<ScoreCell> cells;

  const ScoreCell& at(GridCoord c) const {
    return cells[static_cast<std::size_t>(std::int64_t{c.y} * dims.cols + c.x)];
  }
  GridCoord coord(std::size_t i) const {
    return {static_cast<int>(i % static_cast<std::size_t>(dims.cols)),
            static_cast<int>(i / static_cast<std::size_t>(dims.cols))};
  }
};

// Weighted evidence sum of one patch:
//   (1 - alpha) * sum_i C(f_i^p) N(f_i^p) + alpha * sum_j C(f_j^n) N(f_j^n)
// with counts from nearest assignment against positives followed by
// negatives.
PatchScore score_patch(const EvidenceModel& model,
                       const Eigen::Ref<const DescriptorMatrix>& patch_records);

// Same, against a precomputed combined codebook (model.combined_codebook()).
PatchScore score_patch(const EvidenceModel& model, const DescriptorMatrix& codebook,
                       const Eigen::Ref<const DescriptorMatrix>& patch_records);

ScoreMap score_slide(const EvidenceModel& model, const SlideDescriptorSet& slide,
                     unsigned threads = 1);

enum class Diagnosis { cancer, not_cancer };

inline Diagnosis classify(double score) {
  return score > 0.0 ? Diagnosis::cancer : Diagnosis::not_cancer;
}

// ScoreMap CSV: `X,Y,n_descriptors,skipped,score,pos_hits,neg_hits`. Scores
// use 9 significant digits; skipped cells leave the score empty.
void write_score_map(std::ostream& out, const ScoreMap& map);
void write_score_map_file(const std::string& path, const ScoreMap& map);
ScoreMap read_score_map(std::istream& in, std::string slide_id = "slide");
ScoreMap read_score_map_file(const std::string& path);

}  // namespace cicmap
