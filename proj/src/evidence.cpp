#include "cicmap/evidence.hpp"

#include <algorithm>
#include <cmath>

#include "cicmap/parallel.hpp"

namespace cicmap {

void MatchParams::validate() const {
  if (!(match_threshold > 0.0)) throw InvalidArgument("match_threshold must be > 0");
  if (min_occurrences < 1) throw InvalidArgument("min_occurrences must be >= 1");
  if (!(acceptance_ratio > 1.0)) throw InvalidArgument("acceptance_ratio must be > 1");
}

void ModelParams::validate() const {
  match.validate();
  if (patch_skip_threshold < 0) throw InvalidArgument("patch_skip_threshold must be >= 0");
  if (patch_size_px <= 0) throw InvalidArgument("patch_size_px must be > 0");
}

DescriptorMatrix EvidenceModel::combined_codebook() const {
  DescriptorMatrix book(kDescriptorSize, static_cast<Eigen::Index>(positives.size() + negatives.size()));
  Eigen::Index j = 0;
  for (const auto& f : positives) book.col(j++) = f.leader;
  for (const auto& f : negatives) book.col(j++) = f.leader;
  return book;
}

std::vector<std::int64_t> count_all_occurrences(const DescriptorMatrix& codebook,
                                                const Eigen::Ref<const DescriptorMatrix>& records,
                                                const MatchParams& params, unsigned threads) {
  std::vector<std::int32_t> assignment(static_cast<std::size_t>(records.cols()));
  parallel_for(records.cols(), threads, [&](std::int64_t a, std::int64_t b) {
    for (std::int64_t i = a; i < b; ++i) {
      assignment[static_cast<std::size_t>(i)] =
          nearest_leader(codebook, records.col(static_cast<Eigen::Index>(i)), params.match_threshold);
    }
  });
  std::vector<std::int64_t> counts(static_cast<std::size_t>(codebook.cols()), 0);
  for (auto a : assignment) {
    if (a != kNoLeader) ++counts[static_cast<std::size_t>(a)];
  }
  return counts;
}

std::int64_t count_occurrences(Eigen::Index leader, const Eigen::Ref<const DescriptorMatrix>& records,
                               const DescriptorMatrix& codebook, const MatchParams& params) {
  if (leader < 0 || leader >= codebook.cols()) {
    throw InvalidArgument("count_occurrences: leader not in codebook");
  }
  std::int64_t n = 0;
  for (Eigen::Index i = 0; i < records.cols(); ++i) {
    if (nearest_leader(codebook, records.col(i), params.match_threshold) == leader) ++n;
  }
  return n;
}

double estimate_rho(std::int64_t count_p, std::int64_t count_n) {
  if (count_p < 0 || count_n < 0) throw InvalidArgument("estimate_rho: negative count");
  if (count_p + count_n == 0) {
    throw UndefinedProbability("estimate_rho: feature never observed");
  }
  return static_cast<double>(count_p) / static_cast<double>(count_p + count_n);
}

std::optional<Polarity> accept_evidence(double rho_p, std::int64_t count_p,
                                        std::int64_t count_n, const MatchParams& params) {
  if (count_p + count_n < params.min_occurrences) return std::nullopt;
  const double rho_n = 1.0 - rho_p;
  if (rho_p > params.acceptance_ratio * rho_n) return Polarity::positive;
  if (rho_n > params.acceptance_ratio * rho_p) return Polarity::negative;
  return std::nullopt;
}

namespace {

void check_selection(const PatchSelection& sel) {
  const auto& slide = sel.slide.get();
  std::vector<GridCoord> all(sel.cancer);
  all.insert(all.end(), sel.normal.begin(), sel.normal.end());
  for (const auto& c : all) {
    if (!slide.contains(c)) {
      throw InvalidArgument("fit_model: patch (" + std::to_string(c.x) + ", " +
                            std::to_string(c.y) + ") outside slide " + slide.slide_id());
    }
  }
}

}  // namespace

EvidenceModel fit_model(std::span<const PatchSelection> training, const ModelParams& params,
                        unsigned threads) {
  params.validate();
  bool any_cancer = false, any_normal = false;
  for (const auto& sel : training) {
    check_selection(sel);
    if (sel.slide.get().patch_size_px() != params.patch_size_px) {
      throw ConfigError("fit_model: slide " + sel.slide.get().slide_id() +
                        " patch size differs from the model patch size");
    }
    any_cancer = any_cancer || !sel.cancer.empty();
    any_normal = any_normal || !sel.normal.empty();
  }
  if (!any_cancer || !any_normal) {
    throw InvalidArgument("fit_model: both cancer and normal patch sets must be non-empty");
  }

  // Canonical training order per slide: selected patches in raster order
  // regardless of label, input order within a patch.
  struct Source {
    const SlideDescriptorSet* slide;
    GridCoord coord;
    bool cancer;
  };
  std::vector<Source> sources;
  Eigen::Index total = 0;
  for (const auto& sel : training) {
    std::vector<Source> local;
    for (const auto& c : sel.cancer) local.push_back({&sel.slide.get(), c, true});
    for (const auto& c : sel.normal) local.push_back({&sel.slide.get(), c, false});
    std::stable_sort(local.begin(), local.end(),
              [](const Source& a, const Source& b) { return a.coord < b.coord; });
    for (const auto& s : local) total += s.slide->patch_count(s.coord);
    sources.insert(sources.end(), local.begin(), local.end());
  }

  DescriptorMatrix all(kDescriptorSize, total);
  std::vector<bool> is_cancer(static_cast<std::size_t>(total));
  Eigen::Index at = 0;
  for (const auto& s : sources) {
    auto block = s.slide->patch_descriptors(s.coord);
    all.middleCols(at, block.cols()) = block;
    std::fill_n(is_cancer.begin() + at, block.cols(), s.cancer);
    at += block.cols();
  }

  const DescriptorMatrix codebook = build_codebook(all, params.match);
  std::vector<std::int32_t> assignment(static_cast<std::size_t>(total));
  parallel_for(total, threads, [&](std::int64_t a, std::int64_t b) {
    for (std::int64_t i = a; i < b; ++i) {
      assignment[static_cast<std::size_t>(i)] = nearest_leader(
          codebook, all.col(static_cast<Eigen::Index>(i)), params.match.match_threshold);
    }
  });
  std::vector<std::int64_t> count_p(static_cast<std::size_t>(codebook.cols()), 0);
  std::vector<std::int64_t> count_n(count_p.size(), 0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == kNoLeader) continue;
    ++(is_cancer[i] ? count_p : count_n)[static_cast<std::size_t>(assignment[i])];
  }

  EvidenceModel model;
  model.params = params;
  for (std::size_t j = 0; j < count_p.size(); ++j) {
    if (count_p[j] + count_n[j] == 0) continue;
    const double rho = estimate_rho(count_p[j], count_n[j]);
    const auto polarity = accept_evidence(rho, count_p[j], count_n[j], params.match);
    if (!polarity) continue;
    EvidenceFeature f;
    f.leader = codebook.col(static_cast<Eigen::Index>(j));
    f.count_p = count_p[j];
    f.count_n = count_n[j];
    f.rho_p = rho;
    f.cic = classification_information(rho, params.log_base);
    f.polarity = *polarity;
    (*polarity == Polarity::positive ? model.positives : model.negatives).push_back(f);
  }
  if (model.empty()) {
    throw EmptyModelError("fit_model: no feature passed the evidence acceptance test");
  }
  model.alpha = static_cast<double>(model.n_p()) / static_cast<double>(model.n_p() + model.n_n());

  for (const auto& sel : training) {
    ProvenanceEntry e{sel.slide.get().slide_id(), sel.cancer, sel.normal};
    std::sort(e.cancer.begin(), e.cancer.end());
    std::sort(e.normal.begin(), e.normal.end());
    model.provenance.push_back(std::move(e));
  }
  return model;
}

EvidenceModel fit_model(const SlideDescriptorSet& slide, std::span<const GridCoord> cancer,
                        std::span<const GridCoord> normal, const ModelParams& params,
                        unsigned threads) {
  const PatchSelection sel{std::cref(slide), {cancer.begin(), cancer.end()},
                           {normal.begin(), normal.end()}};
  return fit_model(std::span<const PatchSelection>(&sel, 1), params, threads);
}

}  // namespace cicmap
