#include "cicmap/learner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace cicmap {

void PatchLabels::set(GridCoord c, PatchLabel label) {
  if (c.x < 0 || c.y < 0) throw InvalidArgument("label for a negative grid coordinate");
  labels_[c] = label;
}

PatchLabel PatchLabels::get(GridCoord c) const {
  auto it = labels_.find(c);
  return it == labels_.end() ? PatchLabel::excluded : it->second;
}

std::int64_t PatchLabels::count(PatchLabel label) const {
  return std::count_if(labels_.begin(), labels_.end(),
                       [label](const auto& kv) { return kv.second == label; });
}

namespace {

std::string_view label_name(PatchLabel l) {
  switch (l) {
    case PatchLabel::cancer: return "cancer";
    case PatchLabel::normal: return "normal";
    case PatchLabel::excluded: return "excluded";
  }
  return "excluded";
}

int parse_int(std::string_view s, std::size_t line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError(line, "bad integer '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

PatchLabels read_labels(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "X,Y,label") throw ParseError(1, "header must be X,Y,label");
  PatchLabels labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto a = line.find(','), b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos ||
        line.find(',', b + 1) != std::string::npos) {
      throw ParseError(line_no, "expected 3 fields");
    }
    const std::string_view view(line);
    const GridCoord c{parse_int(view.substr(0, a), line_no),
                      parse_int(view.substr(a + 1, b - a - 1), line_no)};
    if (c.x < 0 || c.y < 0) throw ParseError(line_no, "negative grid coordinate");
    const auto name = view.substr(b + 1);
    PatchLabel l;
    if (name == "cancer") {
      l = PatchLabel::cancer;
    } else if (name == "normal") {
      l = PatchLabel::normal;
    } else if (name == "excluded") {
      l = PatchLabel::excluded;
    } else {
      throw ParseError(line_no, "unknown label '" + std::string(name) + "'");
    }
    labels.set(c, l);
  }
  return labels;
}

PatchLabels read_labels_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_labels(in);
}

void write_labels(std::ostream& out, const PatchLabels& labels) {
  out << "X,Y,label\n";
  for (const auto& [c, l] : labels.entries()) {
    out << c.x << ',' << c.y << ',' << label_name(l) << '\n';
  }
}

void write_labels_file(const std::string& path, const PatchLabels& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_labels(out, labels);
  if (!out) throw IoError("write failure on " + path);
}

std::string_view to_string(SelectionCriterion c) {
  switch (c) {
    case SelectionCriterion::high_density: return "high_density";
    case SelectionCriterion::worst: return "worst";
    case SelectionCriterion::deterioration: return "deterioration";
    case SelectionCriterion::no_information: return "no_information";
  }
  return "high_density";
}

SelectionCriterion parse_criterion(std::string_view token) {
  for (auto c : {SelectionCriterion::high_density, SelectionCriterion::worst,
                 SelectionCriterion::deterioration, SelectionCriterion::no_information}) {
    if (token == to_string(c)) return c;
  }
  throw ConfigError("unknown selection criterion '" + std::string(token) + "'");
}

bool TrainState::is_selected(GridCoord c) const {
  return std::find(selected_p.begin(), selected_p.end(), c) != selected_p.end() ||
         std::find(selected_n.begin(), selected_n.end(), c) != selected_n.end();
}

namespace {

// Eligible patches of one class in raster order.
std::vector<GridCoord> eligible(PatchLabel label, const TrainState& state,
                                const PatchLabels& labels, const SlideDescriptorSet& slide,
                                std::int64_t skip_threshold) {
  std::vector<GridCoord> out;
  for (const auto& [c, l] : labels.entries()) {
    if (l != label || !slide.contains(c)) continue;
    if (slide.patch_count(c) < skip_threshold || state.is_selected(c)) continue;
    out.push_back(c);
  }
  return out;
}

const ScoreMap& checked_map(const ScoreMap& map, const SlideDescriptorSet& slide) {
  if (map.dims != slide.dims()) throw StateError("score history does not match the slide grid");
  return map;
}

// Stable top-k by key (ascending); candidates arrive in raster order so
// equal keys keep raster order.
template <typename Key>
std::vector<GridCoord> take_smallest(std::vector<GridCoord> candidates, std::int64_t k, Key key) {
  std::vector<std::pair<double, GridCoord>> keyed;
  keyed.reserve(candidates.size());
  for (const auto& c : candidates) keyed.emplace_back(key(c), c);
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<GridCoord> out;
  for (std::size_t i = 0; i < keyed.size() && static_cast<std::int64_t>(i) < k; ++i) {
    out.push_back(keyed[i].second);
  }
  return out;
}

}  // namespace

Selection select_patches(SelectionCriterion criterion, const TrainState& state,
                         const PatchLabels& labels, const SlideDescriptorSet& slide,
                         std::int64_t k, std::int64_t patch_skip_threshold) {
  if (k < 0) throw InvalidArgument("select_patches: k must be >= 0");
  const auto cancer = eligible(PatchLabel::cancer, state, labels, slide, patch_skip_threshold);
  const auto normal = eligible(PatchLabel::normal, state, labels, slide, patch_skip_threshold);
  if (k > 0 && (cancer.empty() || normal.empty())) {
    throw StateError("select_patches: no eligible patches left for one class");
  }

  Selection sel;
  switch (criterion) {
    case SelectionCriterion::high_density: {
      auto density = [&](GridCoord c) { return -static_cast<double>(slide.patch_count(c)); };
      sel.cancer = take_smallest(cancer, k, density);
      sel.normal = take_smallest(normal, k, density);
      break;
    }
    case SelectionCriterion::worst: {
      if (state.round_scores.empty()) throw StateError("worst selection needs a scored round");
      const auto& now = checked_map(state.round_scores.back(), slide);
      sel.cancer = take_smallest(cancer, k, [&](GridCoord c) { return now.at(c).score; });
      sel.normal = take_smallest(normal, k, [&](GridCoord c) { return -now.at(c).score; });
      break;
    }
    case SelectionCriterion::deterioration: {
      if (state.round_scores.size() < 2) {
        throw StateError("deterioration selection needs two scored rounds");
      }
      const auto& now = checked_map(state.round_scores.back(), slide);
      const auto& prev = checked_map(state.round_scores[state.round_scores.size() - 2], slide);
      auto delta = [&](GridCoord c) { return now.at(c).score - prev.at(c).score; };
      sel.cancer = take_smallest(cancer, k, delta);
      sel.normal = take_smallest(normal, k, [&](GridCoord c) { return -delta(c); });
      break;
    }
    case SelectionCriterion::no_information: {
      if (state.round_scores.empty()) {
        throw StateError("no_information selection needs a scored round");
      }
      const auto& now = checked_map(state.round_scores.back(), slide);
      auto magnitude = [&](GridCoord c) { return std::abs(now.at(c).score); };
      sel.cancer = take_smallest(cancer, k, magnitude);
      sel.normal = take_smallest(normal, k, magnitude);
      break;
    }
  }
  return sel;
}

Schedule Schedule::parse(std::string_view text) {
  Schedule s;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view block = text.substr(start, end - start);
    if (block.empty()) throw ConfigError("schedule: empty block");

    ScheduleBlock b;
    if (auto star = block.find('*'); star != std::string_view::npos) {
      const auto count = block.substr(star + 1);
      if (count.empty()) {
        b.repeat = 0;
      } else {
        auto [ptr, ec] = std::from_chars(count.data(), count.data() + count.size(), b.repeat);
        if (ec != std::errc{} || ptr != count.data() + count.size() || b.repeat < 1) {
          throw ConfigError("schedule: bad repeat count '" + std::string(count) + "'");
        }
      }
      block = block.substr(0, star);
    }
    std::size_t t = 0;
    while (t <= block.size()) {
      auto plus = block.find('+', t);
      if (plus == std::string_view::npos) plus = block.size();
      b.steps.push_back(parse_criterion(block.substr(t, plus - t)));
      t = plus + 1;
    }
    s.blocks.push_back(std::move(b));
    start = end + 1;
  }
  return s;
}

std::string Schedule::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) out += ',';
    for (std::size_t j = 0; j < blocks[i].steps.size(); ++j) {
      if (j) out += '+';
      out += cicmap::to_string(blocks[i].steps[j]);
    }
    if (blocks[i].repeat == 0) {
      out += '*';
    } else if (blocks[i].repeat != 1) {
      out += '*' + std::to_string(blocks[i].repeat);
    }
  }
  return out;
}

TrainResult train(const SlideDescriptorSet& slide, const PatchLabels& labels,
                  const ModelParams& params, const TrainConfig& config) {
  params.validate();
  if (config.budget_per_class < 1 || config.per_round_k < 1) {
    throw ConfigError("train: budget_per_class and per_round_k must be >= 1");
  }
  if (config.schedule.blocks.empty()) throw ConfigError("train: empty schedule");

  TrainState state;
  state.budget_per_class = config.budget_per_class;
  state.per_round_k = config.per_round_k;

  for (auto label : {PatchLabel::cancer, PatchLabel::normal}) {
    const auto n = static_cast<std::int64_t>(
        eligible(label, state, labels, slide, params.patch_skip_threshold).size());
    const std::string name(label == PatchLabel::cancer ? "cancer" : "normal");
    if (n == 0) {
      throw ValidationError("train: labels contain no eligible " + name +
                            " patches (training needs both classes)");
    }
    if (n < config.budget_per_class) {
      throw ValidationError("train: only " + std::to_string(n) + " eligible " + name +
                            " patches for a budget of " + std::to_string(config.budget_per_class));
    }
  }

  TrainResult result;
  int round = 0;
  auto remaining = [&] {
    return config.budget_per_class - static_cast<std::int64_t>(state.selected_p.size());
  };
  auto run_step = [&](SelectionCriterion criterion) {
    const auto k = std::min(config.per_round_k, remaining());
    const auto sel = select_patches(criterion, state, labels, slide, k, params.patch_skip_threshold);
    state.selected_p.insert(state.selected_p.end(), sel.cancer.begin(), sel.cancer.end());
    state.selected_n.insert(state.selected_n.end(), sel.normal.begin(), sel.normal.end());
    try {
      result.model = fit_model(slide, state.selected_p, state.selected_n, params, config.threads);
    } catch (const EmptyModelError& e) {
      throw EmptyModelError(std::string(e.what()) + " (round " + std::to_string(round) + ")", round);
    }
    state.round_scores.push_back(score_slide(result.model, slide, config.threads));
    state.round_criteria.push_back(criterion);
    ++round;
  };

  for (const auto& block : config.schedule.blocks) {
    if (block.steps.empty()) throw ConfigError("train: schedule block without steps");
    for (int rep = 0; block.repeat == 0 || rep < block.repeat; ++rep) {
      for (auto criterion : block.steps) {
        if (remaining() <= 0) break;
        run_step(criterion);
      }
      if (remaining() <= 0) break;
    }
    if (remaining() <= 0) break;
  }
  if (round == 0) throw ConfigError("train: schedule ran no steps");

  result.state = std::move(state);
  return result;
}

}  // namespace cicmap
