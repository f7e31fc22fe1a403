#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cicmap/learner.hpp"

namespace cicmap {

// Planted-distribution slide generator. Every cluster has a centre in
// [0,255]^128; tokens are scattered around their centre within a radius
// that keeps same-cluster pairs matching and cross-cluster pairs apart.
struct SyntheticSpec {
  std::string slide_id = "synthetic";
  int n_clusters_p = 2;
  int n_clusters_n = 2;
  // Positive clusters first. A cancer token picks cluster c with weight
  // rho_c, a normal token with weight 1 - rho_c, so planted rho is what a
  // class-balanced sample recovers when sum(rho) == sum(1 - rho).
  std::vector<double> planted_rho{0.9, 0.7, 0.3, 0.1};
  double cluster_separation = 650.0;
  double match_threshold = 325.0;
  int grid_cols = 20;
  int grid_rows = 20;
  int patch_size_px = 512;
  std::int64_t descriptors_min = 3000;
  std::int64_t descriptors_max = 3400;
  // Share of patches labeled cancer: those closest to the grid centre.
  double cancer_fraction = 0.4;
  // Per cancer patch, the share of tokens drawn from the cancer mixture is
  // uniform in [purity_min, purity_max]; the rest follow the normal mixture.
  double purity_min = 1.0;
  double purity_max = 1.0;
  // Probability that a normal token comes from a cluster absent from every
  // other slide of the same cluster_seed.
  double shift_normal_fraction = 0.0;
  std::uint64_t cluster_seed = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

SyntheticSpec synthetic_spec_from_json(const std::string& text);
std::string synthetic_spec_to_json(const SyntheticSpec& spec);
SyntheticSpec load_synthetic_spec(const std::string& path);

struct SyntheticSlide {
  SlideDescriptorSet slide;
  PatchLabels labels;
  DescriptorMatrix centers;  // planted clusters, then the unseen one
  double scatter_radius = 0.0;
};

SyntheticSlide synth_slide(const SyntheticSpec& spec, unsigned threads = 1);

}  // namespace cicmap
