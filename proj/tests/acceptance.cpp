// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "cicmap/eval.hpp"
#include "cicmap/learner.hpp"
#include "cicmap/synthetic.hpp"
#include "cli.hpp"
#include "oracles.hpp"

using namespace cicmap;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::pair<std::vector<GridCoord>, std::vector<GridCoord>> split(const PatchLabels& labels) {
  std::vector<GridCoord> cancer, normal;
  for (const auto& [c, l] : labels.entries()) {
    if (l == PatchLabel::cancer) cancer.push_back(c);
    if (l == PatchLabel::normal) normal.push_back(c);
  }
  return {cancer, normal};
}

// Slide used by the end-to-end criteria.
SyntheticSpec e2e_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.slide_id = "e2e_" + std::to_string(seed);
  s.planted_rho = {0.9, 0.8, 0.2, 0.1};
  s.purity_min = 0.6;
  s.purity_max = 1.0;
  s.cluster_seed = 7;
  s.seed = seed;
  return s;
}

Outcome information_identities() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double r = u(rng);
    while (r == 0.0) r = u(rng);
    const double c = classification_information(r), d = kl_divergence(r);
    worst = std::max({worst, std::abs(d + c - 2.0 * r * std::log(2.0 * r)),
                      std::abs(c + classification_information(1.0 - r))});
  }
  if (!(worst < 1e-12)) o.fail("identity residual " + num(worst));
  if (classification_information(0.5) != 0.0) o.fail("C(0.5) != 0");
  if (!(std::abs(classification_information(1.0) - std::log(2.0)) < 1e-12)) o.fail("C(1) != ln 2");
  const double t = seconds_since(t0);
  if (!(t < 1.0)) o.fail("runtime " + num(t) + " s");
  if (o.pass) o.detail = "max residual " + num(worst, 3) + ", " + num(t, 3) + " s";
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> rho(0.0, 1.0);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    // first instance at the size limits
    const int n_features = inst == 0 ? 200 : std::uniform_int_distribution<int>(1, 200)(rng);
    const int n_desc = inst == 0 ? 10000 : std::uniform_int_distribution<int>(1, 10000)(rng);
    EvidenceModel m;
    std::vector<oracle::Vec> centers;
    for (int f = 0; f < n_features; ++f) {
      centers.push_back(oracle::random_descriptor(rng));
      double r = rho(rng);
      while (r == 0.5) r = rho(rng);
      EvidenceFeature ef;
      ef.leader = oracle::from_vec(centers.back());
      ef.rho_p = r;
      ef.cic = classification_information(r);
      ef.polarity = ef.cic > 0.0 ? Polarity::positive : Polarity::negative;
      (ef.cic > 0.0 ? m.positives : m.negatives).push_back(ef);
    }
    if (m.n_p() + m.n_n() == 0) continue;
    m.alpha = static_cast<double>(m.n_p()) / static_cast<double>(m.n_p() + m.n_n());
    std::vector<oracle::Feature> of;
    for (const auto& f : m.positives) of.push_back({oracle::to_vec(f.leader), f.cic, true});
    for (const auto& f : m.negatives) of.push_back({oracle::to_vec(f.leader), f.cic, false});

    std::vector<oracle::Vec> patch;
    DescriptorMatrix pm(128, n_desc);
    std::uniform_int_distribution<int> pick(0, n_features - 1);
    for (int i = 0; i < n_desc; ++i) {
      patch.push_back(i % 7 == 0 ? oracle::random_descriptor(rng)
                                 : oracle::jitter(rng, centers[static_cast<std::size_t>(pick(rng))], 30));
      pm.col(i) = oracle::from_vec(patch.back());
    }
    const double expected = oracle::score(of, patch, 325.0);
    const double got = score_patch(m, pm).score;
    const double rel = expected == 0.0 ? std::abs(got) : std::abs(got - expected) / std::abs(expected);
    worst = std::max(worst, rel);
  }
  if (!(worst <= 1e-9)) o.fail("relative error " + num(worst));
  const double t = seconds_since(t0);
  if (!(t < 30.0)) o.fail("runtime " + num(t) + " s");
  if (o.pass) o.detail = "max relative error " + num(worst, 3) + ", " + num(t, 3) + " s";
  return o;
}

Outcome rho_recovery() {
  Outcome o;
  SyntheticSpec s;
  s.slide_id = "rho";
  s.planted_rho = {0.9, 0.7, 0.3, 0.1};
  s.patch_size_px = 64;
  s.descriptors_min = s.descriptors_max = 300;
  s.cancer_fraction = 0.5;
  s.seed = 5;
  const auto syn = synth_slide(s);
  // Balanced token totals make the fitted ratio an estimate of the planted one.
  const auto [cancer, normal] = split(syn.labels);
  if (cancer.size() != normal.size()) {
    o.fail("unbalanced labels");
    return o;
  }
  ModelParams p;
  p.patch_size_px = 64;
  const auto m = fit_model(syn.slide, cancer, normal, p);

  const auto counts = count_all_occurrences(syn.centers, syn.slide.descriptors(), p.match, 1);
  std::int64_t min_tokens = counts[0];
  for (int c = 0; c < 4; ++c) min_tokens = std::min(min_tokens, counts[static_cast<std::size_t>(c)]);
  if (min_tokens < 200) o.fail("only " + std::to_string(min_tokens) + " tokens in a cluster");

  double worst = 0.0;
  int accepted = 0;
  for (const auto* side : {&m.positives, &m.negatives}) {
    for (const auto& f : *side) {
      ++accepted;
      int cluster = -1;
      for (int c = 0; c < 4; ++c) {
        if (distance(f.leader, Descriptor(syn.centers.col(c))) < p.match.match_threshold) cluster = c;
      }
      if (cluster < 0) {
        o.fail("accepted feature outside every planted cluster");
        continue;
      }
      const double planted = s.planted_rho[static_cast<std::size_t>(cluster)];
      worst = std::max(worst, std::abs(f.rho_p - planted));
      const bool positive = f.polarity == Polarity::positive;
      if (positive != (planted > 0.5)) o.fail("polarity mismatch at planted rho " + num(planted));
    }
  }
  if (accepted != 4) o.fail(std::to_string(accepted) + " accepted features, expected 4");
  if (!(worst <= 0.05)) o.fail("rho error " + num(worst));
  if (o.pass) {
    o.detail = std::to_string(accepted) + " features, max |rho - planted| " + num(worst, 3) +
               ", min tokens per cluster " + std::to_string(min_tokens);
  }
  return o;
}

Outcome end_to_end_auc(std::optional<ScoreMap>& held_scores, PatchLabels& held_labels) {
  Outcome o;
  const auto t0 = Clock::now();
  double auc = 0.0;
  {
    const auto train_slide = synth_slide(e2e_spec(11));
    const auto result = train(train_slide.slide, train_slide.labels, ModelParams{}, TrainConfig{});
    const auto held = synth_slide(e2e_spec(12));
    if (held.labels.count(PatchLabel::cancer) + held.labels.count(PatchLabel::normal) < 400) {
      o.fail("fewer than 400 labelled patches");
    }
    held_scores = score_slide(result.model, held.slide);
    held_labels = held.labels;
    auc = roc_auc(*held_scores, held_labels).auc;
    if (result.state.selected_p.size() != 20 || result.state.selected_n.size() != 20) {
      o.fail("budget not reached");
    }
  }
  if (!(auc >= 0.95)) o.fail("held-out AUC " + num(auc));
  const double t = seconds_since(t0);
  if (!(t < 120.0)) o.fail("runtime " + num(t) + " s");
  if (o.pass) o.detail = "held-out AUC " + num(auc) + ", " + num(t, 3) + " s";
  return o;
}

Outcome covariate_shift() {
  Outcome o;
  const auto base = synth_slide(e2e_spec(11));
  const auto trained = train(base.slide, base.labels, ModelParams{}, TrainConfig{});

  auto shift_spec = e2e_spec(13);
  shift_spec.slide_id = "shifted";
  shift_spec.purity_min = 0.2;
  shift_spec.shift_normal_fraction = 0.9;
  const auto shifted = synth_slide(shift_spec);
  const auto pre_map = score_slide(trained.model, shifted.slide);
  const double pre = roc_auc(pre_map, shifted.labels).auc;

  // One no_information round on the shifted slide, then refit on both slides.
  TrainState st;
  st.round_scores.push_back(pre_map);
  const auto sel = select_patches(SelectionCriterion::no_information, st, shifted.labels,
                                  shifted.slide, 2, trained.model.params.patch_skip_threshold);
  const std::vector<PatchSelection> training{
      {std::cref(base.slide), trained.state.selected_p, trained.state.selected_n},
      {std::cref(shifted.slide), sel.cancer, sel.normal}};
  const auto remedied = fit_model(training, ModelParams{});
  const double post = roc_auc(score_slide(remedied, shifted.slide), shifted.labels).auc;

  if (!(post - pre >= 0.05)) o.fail("AUC " + num(pre) + " -> " + num(post));
  if (o.pass) o.detail = "AUC " + num(pre) + " -> " + num(post);
  return o;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  Outcome o;
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / ("cicmap_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);

  SyntheticSpec s = e2e_spec(21);
  s.grid_cols = s.grid_rows = 12;
  s.patch_size_px = 128;
  s.descriptors_min = 300;
  s.descriptors_max = 400;
  std::ofstream(dir / "spec.json") << synthetic_spec_to_json(s);
  std::ofstream(dir / "run.json") << R"({"patch_size_px": 128, "patch_skip_threshold": 300})";

  std::ostringstream err;
  auto run = [&](std::vector<std::string> args) {
    if (cli::run(args, err) != 0) o.fail("command failed: " + args[0] + " (" + err.str() + ")");
  };
  const std::string threads[2] = {"1", "3"};
  for (int r = 0; r < 2; ++r) {
    const auto tag = std::to_string(r);
    const auto p = [&](const std::string& name) { return (dir / (name + tag)).string(); };
    run({"synth", "--spec", (dir / "spec.json").string(), "--threads", threads[r], "--out-slide",
         p("slide"), "--out-labels", p("labels")});
    run({"train", "--config", (dir / "run.json").string(), "--threads", threads[r], "--slide",
         p("slide"), "--labels", p("labels"), "--out", p("model")});
    run({"score", "--threads", threads[r], "--model", p("model"), "--slide", p("slide"), "--out",
         p("scores"), "--heatmap", p("map")});
    run({"eval", "--scores", p("scores"), "--labels", p("labels"), "--roc", p("roc"), "--hist",
         p("hist")});
  }
  if (o.pass) {
    for (const std::string name : {"slide", "model", "scores", "map", "roc", "hist"}) {
      const auto a = slurp(dir / (name + "0")), b = slurp(dir / (name + "1"));
      if (a.empty() || a != b) o.fail(name + " differs between thread counts");
    }
  }
  fs::remove_all(dir);
  if (o.pass) o.detail = "model, scores, PPM, ROC and histogram identical for 1 and 3 threads";
  return o;
}

Outcome sign_consistency(const ScoreMap& map, const PatchLabels& labels) {
  Outcome o;
  const double s95 = score_percentile95(map);
  std::int64_t checked = 0;
  bool any_pos = false, any_neg = false;
  for (const auto& cell : map.cells) {
    if (cell.skipped) {
      if (!(heatmap_color(cell, s95) == kSkippedGray)) o.fail("skipped patch not gray");
      continue;
    }
    ++checked;
    const bool cancer = classify(cell.score) == Diagnosis::cancer;
    if (cancer != (cell.score > 0.0)) o.fail("classify disagrees with score > 0");
    const Rgb c = heatmap_color(cell, s95);
    if (cell.score > 0.0) {
      any_pos = true;
      if (!(c.b == 255 && c.r == c.g && c.r < 255)) o.fail("positive patch not blue");
    } else if (cell.score < 0.0) {
      any_neg = true;
      if (!(c.r == 255 && c.g == c.b && c.b < 255)) o.fail("negative patch not red");
    } else if (!(c == Rgb{255, 255, 255})) {
      o.fail("zero-score patch not white");
    }
  }
  if (!any_pos || !any_neg) o.fail("score map lacks one sign");

  const auto bins = histogram(map, labels);
  bool zero_edge = false;
  for (const auto& b : bins) {
    if (b.lo < 0.0 && b.hi > 0.0) o.fail("a histogram bin straddles zero");
    zero_edge |= b.lo == 0.0 || b.hi == 0.0;
  }
  if (!zero_edge) o.fail("no histogram edge at exactly zero");
  if (o.pass) o.detail = std::to_string(checked) + " scored patches consistent";
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << ": " << o.detail
              << std::endl;
  };

  std::optional<ScoreMap> held_scores;
  PatchLabels held_labels;
  report(1, "information identities", information_identities);
  report(2, "oracle equivalence", oracle_equivalence);
  report(3, "rho recovery", rho_recovery);
  report(4, "end-to-end AUC", [&] { return end_to_end_auc(held_scores, held_labels); });
  report(5, "covariate-shift remedy", covariate_shift);
  report(6, "CLI determinism", cli_determinism);
  report(7, "sign consistency", [&] {
    if (!held_scores) {
      Outcome o;
      o.fail("no score map from criterion 4");
      return o;
    }
    return sign_consistency(*held_scores, held_labels);
  });
  return failures == 0 ? 0 : 1;
}
