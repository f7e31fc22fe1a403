#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cicmap/scoring.hpp"

namespace cicmap {

enum class PatchLabel { cancer, normal, excluded };

// Patch-level annotation. Unlisted patches are excluded.
class PatchLabels {
 public:
  void set(GridCoord c, PatchLabel label);
  PatchLabel get(GridCoord c) const;
  const std::map<GridCoord, PatchLabel>& entries() const { return labels_; }
  std::int64_t count(PatchLabel label) const;

 private:
  std::map<GridCoord, PatchLabel> labels_;
};

// Labels CSV: header `X,Y,label`, label in {cancer, normal, excluded}.
PatchLabels read_labels(std::istream& in);
PatchLabels read_labels_file(const std::string& path);
void write_labels(std::ostream& out, const PatchLabels& labels);
void write_labels_file(const std::string& path, const PatchLabels& labels);

enum class SelectionCriterion { high_density, worst, deterioration, no_information };

std::string_view to_string(SelectionCriterion c);
SelectionCriterion parse_criterion(std::string_view token);

struct TrainState {
  std::vector<GridCoord> selected_p;
  std::vector<GridCoord> selected_n;
  std::vector<ScoreMap> round_scores;
  std::vector<SelectionCriterion> round_criteria;
  std::int64_t budget_per_class = 20;
  std::int64_t per_round_k = 2;

  bool is_selected(GridCoord c) const;
};

struct Selection {
  std::vector<GridCoord> cancer;
  std::vector<GridCoord> normal;
};

// Picks up to k unselected, labeled, non-skipped patches per class.
// Criteria needing scores read state.round_scores (the latest map, and for
// deterioration the one before it).
Selection select_patches(SelectionCriterion criterion, const TrainState& state,
                         const PatchLabels& labels, const SlideDescriptorSet& slide,
                         std::int64_t k, std::int64_t patch_skip_threshold);

// Ordered blocks of criteria. repeat == 0 runs the block until the budget
// is spent.
struct ScheduleBlock {
  std::vector<SelectionCriterion> steps;
  int repeat = 1;
};

struct Schedule {
  std::vector<ScheduleBlock> blocks;

  // Text form: blocks separated by ',', steps by '+', optional `*N`
  // repeat suffix; a bare `*` repeats until the budget is spent.
  static Schedule parse(std::string_view text);
  std::string to_string() const;
};

// Three high_density -> worst -> deterioration sets, then worst only.
inline constexpr std::string_view kDefaultSchedule = "high_density+worst+deterioration*3,worst*";

struct TrainConfig {
  std::int64_t budget_per_class = 20;
  std::int64_t per_round_k = 2;
  Schedule schedule = Schedule::parse(kDefaultSchedule);
  unsigned threads = 1;
};

struct TrainResult {
  EvidenceModel model;
  TrainState state;
};

TrainResult train(const SlideDescriptorSet& slide, const PatchLabels& labels,
                  const ModelParams& params, const TrainConfig& config);

}  // namespace cicmap
