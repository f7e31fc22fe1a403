#include "cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cicmap/eval.hpp"
#include "cicmap/learner.hpp"
#include "cicmap/synthetic.hpp"

namespace cicmap::cli {

namespace {

using Json = nlohmann::ordered_json;

// Everything that shapes outputs. Paths and thread count are left out of the
// echoed form because neither may change output bytes.
struct RunConfig {
  ModelParams model;
  std::int64_t budget_per_class = 20;
  std::int64_t per_round_k = 2;
  std::string schedule{kDefaultSchedule};
  std::uint64_t seed = 1;
  unsigned threads = 1;

  Json to_json() const {
    return Json{{"match_threshold", model.match.match_threshold},
                {"min_occurrences", model.match.min_occurrences},
                {"acceptance_ratio", model.match.acceptance_ratio},
                {"patch_skip_threshold", model.patch_skip_threshold},
                {"patch_size_px", model.patch_size_px},
                {"log_base", std::string(to_string(model.log_base))},
                {"budget_per_class", budget_per_class},
                {"per_round_k", per_round_k},
                {"schedule", Schedule::parse(schedule).to_string()},
                {"seed", seed}};
  }
};

// Flags bound to optionals so that only the ones actually given override
// the config file.
struct Overrides {
  std::string config_path;
  std::optional<double> threshold;
  std::optional<std::int64_t> min_occurrences;
  std::optional<double> acceptance_ratio;
  std::optional<std::int64_t> skip_threshold;
  std::optional<int> patch_size;
  std::optional<std::int64_t> budget;
  std::optional<std::int64_t> k;
  std::optional<std::string> schedule;
  std::optional<std::string> log_base;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;

  void add_to(CLI::App& app, bool training) {
    app.add_option("--config", config_path, "JSON run configuration (flags override it)");
    app.add_option("--threads", threads, "Worker threads, 0 = auto");
    app.add_option("--patch-size", patch_size, "Patch edge in pixels");
    if (!training) return;
    app.add_option("--threshold", threshold, "Descriptor matching threshold");
    app.add_option("--min-occurrences", min_occurrences, "Lower limit of feature occurrences");
    app.add_option("--acceptance-ratio", acceptance_ratio, "Evidence acceptance ratio");
    app.add_option("--skip-threshold", skip_threshold, "Minimum descriptors for a scored patch");
    app.add_option("--budget", budget, "Training patches per class");
    app.add_option("--k", k, "Patches per class added per round");
    app.add_option("--schedule", schedule, "Selection schedule, e.g. high_density+worst*2,worst*");
    app.add_option("--log-base", log_base, "Logarithm base: e or 2");
    app.add_option("--seed", seed, "Random seed");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path, std::ios::binary);
      if (!in) throw IoError("cannot open " + config_path);
      Json j;
      try {
        j = Json::parse(in);
        auto& m = cfg.model;
        m.match.match_threshold = j.value("match_threshold", m.match.match_threshold);
        m.match.min_occurrences = j.value("min_occurrences", m.match.min_occurrences);
        m.match.acceptance_ratio = j.value("acceptance_ratio", m.match.acceptance_ratio);
        m.patch_skip_threshold = j.value("patch_skip_threshold", m.patch_skip_threshold);
        m.patch_size_px = j.value("patch_size_px", m.patch_size_px);
        if (j.contains("log_base")) m.log_base = parse_log_base(j.at("log_base").get<std::string>());
        cfg.budget_per_class = j.value("budget_per_class", cfg.budget_per_class);
        cfg.per_round_k = j.value("per_round_k", cfg.per_round_k);
        cfg.schedule = j.value("schedule", cfg.schedule);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.threads = j.value("threads", cfg.threads);
      } catch (const Json::exception& e) {
        throw ConfigError(config_path + ": " + e.what());
      }
    }
    auto& m = cfg.model;
    if (threshold) m.match.match_threshold = *threshold;
    if (min_occurrences) m.match.min_occurrences = *min_occurrences;
    if (acceptance_ratio) m.match.acceptance_ratio = *acceptance_ratio;
    if (skip_threshold) m.patch_skip_threshold = *skip_threshold;
    if (patch_size) m.patch_size_px = *patch_size;
    if (log_base) m.log_base = parse_log_base(*log_base);
    if (budget) cfg.budget_per_class = *budget;
    if (k) cfg.per_round_k = *k;
    if (schedule) cfg.schedule = *schedule;
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    m.validate();
    return cfg;
  }
};

struct SlideExtent {
  std::optional<std::int64_t> width;
  std::optional<std::int64_t> height;

  void add_to(CLI::App& app) {
    app.add_option("--width", width, "Slide width in pixels (default: inferred)");
    app.add_option("--height", height, "Slide height in pixels (default: inferred)");
  }
  IngestOptions options(int patch_size) const {
    IngestOptions o;
    o.patch_size_px = patch_size;
    o.width_px = width;
    o.height_px = height;
    return o;
  }
};

void write_patch_counts(const std::string& path, const SlideDescriptorSet& slide) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "X,Y,n_descriptors\n";
  for (int y = 0; y < slide.dims().rows; ++y) {
    for (int x = 0; x < slide.dims().cols; ++x) {
      out << x << ',' << y << ',' << slide.patch_count({x, y}) << '\n';
    }
  }
  if (!out) throw IoError("write failure on " + path);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& err) {
  CLI::App app{"Patch-level classification information content for slide images", "cicmap"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // extract
  auto* extract = app.add_subcommand("extract", "Dense gradient-histogram descriptors from a PGM/PPM raster");
  std::string image_path, out_path, slide_id = "slide";
  ExtractionConfig ecfg;
  Overrides ex_over;
  extract->add_option("--image", image_path, "Input raster (P5/P6)")->required();
  extract->add_option("--out", out_path, "Descriptor CSV")->required();
  extract->add_option("--slide-id", slide_id, "Slide identifier");
  extract->add_option("--stride", ecfg.stride_px, "Keypoint stride (stride_px)");
  extract->add_option("--cell", ecfg.cell_px, "Cell edge (cell_px)");
  ex_over.add_to(*extract, false);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a descriptor CSV and report per-patch counts");
  std::string slide_path, canonical_path;
  SlideExtent extent;
  Overrides in_over;
  ingest->add_option("--slide", slide_path, "Descriptor CSV")->required();
  ingest->add_option("--out", out_path, "Per-patch count CSV (X,Y,n_descriptors)")->required();
  ingest->add_option("--canonical", canonical_path, "Rewrite descriptors in canonical order");
  extent.add_to(*ingest);
  in_over.add_to(*ingest, false);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic slide with planted evidence");
  std::string spec_path, labels_out;
  std::optional<std::uint64_t> synth_seed;
  std::optional<unsigned> synth_threads;
  synth->add_option("--spec", spec_path, "Synthetic spec JSON")->required();
  synth->add_option("--out-slide", out_path, "Descriptor CSV")->required();
  synth->add_option("--out-labels", labels_out, "Labels CSV")->required();
  synth->add_option("--seed", synth_seed, "Override the sampling seed");
  synth->add_option("--threads", synth_threads, "Worker threads, 0 = auto");

  // train
  auto* trn = app.add_subcommand("train", "Fit an evidence model with the rapid learning schedule");
  std::string labels_path;
  Overrides tr_over;
  SlideExtent tr_extent;
  trn->add_option("--slide", slide_path, "Descriptor CSV")->required();
  trn->add_option("--labels", labels_path, "Labels CSV")->required();
  trn->add_option("--out", out_path, "Model JSON")->required();
  tr_extent.add_to(*trn);
  tr_over.add_to(*trn, true);

  // score
  auto* scr = app.add_subcommand("score", "Score every patch of a slide");
  std::string model_path, heatmap_path;
  int block_px = 8;
  Overrides sc_over;
  SlideExtent sc_extent;
  scr->add_option("--model", model_path, "Model JSON")->required();
  scr->add_option("--slide", slide_path, "Descriptor CSV")->required();
  scr->add_option("--out", out_path, "Score map CSV")->required();
  scr->add_option("--heatmap", heatmap_path, "PPM heatmap output");
  scr->add_option("--block", block_px, "Heatmap pixels per patch");
  sc_extent.add_to(*scr);
  sc_over.add_to(*scr, false);

  // eval
  auto* evl = app.add_subcommand("eval", "Histogram and ROC/AUC of a score map");
  std::string scores_path, roc_path, hist_path;
  std::optional<double> bin_width;
  evl->add_option("--scores", scores_path, "Score map CSV")->required();
  evl->add_option("--labels", labels_path, "Labels CSV")->required();
  evl->add_option("--roc", roc_path, "ROC CSV output");
  evl->add_option("--hist", hist_path, "Histogram CSV output");
  evl->add_option("--bin-width", bin_width, "Histogram bin width");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    err << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    err << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidation;
  }

  try {
    if (*extract) {
      const auto cfg = ex_over.resolve();
      ecfg.patch_size_px = cfg.model.patch_size_px;
      ecfg.threads = cfg.threads;
      ecfg.slide_id = slide_id;
      const auto slide = extract_descriptors(read_pnm_file(image_path), ecfg);
      write_descriptors_file(out_path, slide);
      err << "extract: " << slide.size() << " descriptors\n";
    } else if (*ingest) {
      const auto cfg = in_over.resolve();
      const auto slide = ingest_descriptors_file(slide_path, extent.options(cfg.model.patch_size_px));
      write_patch_counts(out_path, slide);
      if (!canonical_path.empty()) write_descriptors_file(canonical_path, slide);
      err << "ingest: " << slide.size() << " descriptors in " << slide.dims().cols << "x"
          << slide.dims().rows << " patches\n";
    } else if (*synth) {
      auto spec = load_synthetic_spec(spec_path);
      if (synth_seed) spec.seed = *synth_seed;
      const auto s = synth_slide(spec, synth_threads.value_or(1));
      write_descriptors_file(out_path, s.slide);
      write_labels_file(labels_out, s.labels);
      err << "synth: " << s.slide.size() << " descriptors\n";
    } else if (*trn) {
      const auto cfg = tr_over.resolve();
      const auto slide = ingest_descriptors_file(slide_path, tr_extent.options(cfg.model.patch_size_px));
      const auto labels = read_labels_file(labels_path);
      TrainConfig tc;
      tc.budget_per_class = cfg.budget_per_class;
      tc.per_round_k = cfg.per_round_k;
      tc.schedule = Schedule::parse(cfg.schedule);
      tc.threads = cfg.threads;
      auto result = train(slide, labels, cfg.model, tc);
      Json config = cfg.to_json();
      Json rounds = Json::array();
      for (auto c : result.state.round_criteria) rounds.push_back(std::string(to_string(c)));
      config["rounds"] = std::move(rounds);
      result.model.config_json = config.dump();
      save_model(out_path, result.model);
      err << "train: " << result.model.n_p() << " positive, " << result.model.n_n()
          << " negative evidence features after " << result.state.round_scores.size()
          << " rounds\n";
    } else if (*scr) {
      const auto cfg = sc_over.resolve();
      const auto model = load_model(model_path);
      const auto slide = ingest_descriptors_file(slide_path, sc_extent.options(model.params.patch_size_px));
      const auto map = score_slide(model, slide, cfg.threads);
      write_score_map_file(out_path, map);
      if (!heatmap_path.empty()) render_heatmap(map, heatmap_path, block_px);
    } else if (*evl) {
      const auto map = read_score_map_file(scores_path);
      const auto labels = read_labels_file(labels_path);
      if (!hist_path.empty()) write_histogram_file(hist_path, histogram(map, labels, bin_width));
      const auto roc = roc_auc(map, labels);
      if (!roc_path.empty()) write_roc_file(roc_path, roc);
      err << "eval: auc " << roc.auc << "\n";
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cerr);
}

}  // namespace cicmap::cli
