#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cicmap/features.hpp"
#include "cicmap/information.hpp"
#include "cicmap/matching.hpp"

namespace cicmap {

struct MatchParams {
  double match_threshold = kDefaultMatchThreshold;
  std::int64_t min_occurrences = 10;
  double acceptance_ratio = 2.0;

  void validate() const;
};

// Parameters carried by a fitted model.
struct ModelParams {
  MatchParams match;
  std::int64_t patch_skip_threshold = 3000;
  int patch_size_px = kDefaultPatchSize;
  LogBase log_base = LogBase::natural;

  void validate() const;
};

enum class Polarity { positive, negative };

struct EvidenceFeature {
  Descriptor leader = Descriptor::Zero();
  std::int64_t count_p = 0;
  std::int64_t count_n = 0;
  double rho_p = 0.5;
  double cic = 0.0;
  Polarity polarity = Polarity::positive;
};

// Training patches drawn from one slide.
struct PatchSelection {
  std::reference_wrapper<const SlideDescriptorSet> slide;
  std::vector<GridCoord> cancer;
  std::vector<GridCoord> normal;
};

struct ProvenanceEntry {
  std::string slide_id;
  std::vector<GridCoord> cancer;
  std::vector<GridCoord> normal;
};

struct EvidenceModel {
  std::vector<EvidenceFeature> positives;
  std::vector<EvidenceFeature> negatives;
  double alpha = 0.0;
  ModelParams params;
  std::vector<ProvenanceEntry> provenance;
  // Free-form JSON text (the effective run configuration), kept verbatim.
  std::string config_json = "{}";

  std::int64_t n_p() const { return static_cast<std::int64_t>(positives.size()); }
  std::int64_t n_n() const { return static_cast<std::int64_t>(negatives.size()); }
  bool empty() const { return positives.empty() && negatives.empty(); }

  // Positive leaders followed by negative leaders.
  DescriptorMatrix combined_codebook() const;
};

// Greedy leader clustering over `records` in column order. A record joins
// its nearest leader within the threshold, otherwise it opens a new one.
// Leaders are returned in creation order.
template <typename Derived>
DescriptorMatrix build_codebook(const Eigen::MatrixBase<Derived>& records,
                                const MatchParams& params) {
  std::vector<Eigen::Index> leaders;
  DescriptorMatrix book(kDescriptorSize, 0);
  Eigen::Index used = 0;
  for (Eigen::Index i = 0; i < records.cols(); ++i) {
    if (nearest_leader(book.leftCols(used), records.col(i).template cast<float>(),
                       params.match_threshold) != kNoLeader) {
      continue;
    }
    if (used == book.cols()) book.conservativeResize(Eigen::NoChange, std::max<Eigen::Index>(16, 2 * used));
    book.col(used++) = records.col(i).template cast<float>();
  }
  book.conservativeResize(Eigen::NoChange, used);
  return book;
}

// Nearest-assignment token counts for every leader of `codebook`.
std::vector<std::int64_t> count_all_occurrences(const DescriptorMatrix& codebook,
                                                const Eigen::Ref<const DescriptorMatrix>& records,
                                                const MatchParams& params,
                                                unsigned threads = 1);

// Count for a single leader of the codebook.
std::int64_t count_occurrences(Eigen::Index leader, const Eigen::Ref<const DescriptorMatrix>& records,
                               const DescriptorMatrix& codebook, const MatchParams& params);

double estimate_rho(std::int64_t count_p, std::int64_t count_n);

std::optional<Polarity> accept_evidence(double rho_p, std::int64_t count_p,
                                        std::int64_t count_n, const MatchParams& params);

// Fits an evidence model from labeled patches (possibly spanning several
// slides). Training descriptors are concatenated slide by slide, patches in
// raster order within each slide.
EvidenceModel fit_model(std::span<const PatchSelection> training, const ModelParams& params,
                        unsigned threads = 1);

EvidenceModel fit_model(const SlideDescriptorSet& slide, std::span<const GridCoord> cancer,
                        std::span<const GridCoord> normal, const ModelParams& params,
                        unsigned threads = 1);

// Model file (JSON).
std::string model_to_json(const EvidenceModel& model);
EvidenceModel model_from_json(const std::string& text);
void save_model(const std::string& path, const EvidenceModel& model);
EvidenceModel load_model(const std::string& path);

inline constexpr int kModelFormatVersion = 1;

}  // namespace cicmap
