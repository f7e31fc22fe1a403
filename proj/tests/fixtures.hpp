#pragma once

// Small synthetic slides for tests that need a realistic model but not the
// full-size defaults.

#include "cicmap/synthetic.hpp"

namespace fixture {

inline cicmap::SyntheticSpec small_spec(std::uint64_t seed = 3) {
  cicmap::SyntheticSpec s;
  s.slide_id = "small";
  s.grid_cols = 10;
  s.grid_rows = 10;
  s.patch_size_px = 64;
  s.descriptors_min = 40;
  s.descriptors_max = 60;
  s.purity_min = 0.6;
  s.purity_max = 1.0;
  s.planted_rho = {0.9, 0.8, 0.2, 0.1};
  s.cluster_seed = 7;
  s.seed = seed;
  return s;
}

inline cicmap::ModelParams small_params() {
  cicmap::ModelParams p;
  p.patch_size_px = 64;
  p.patch_skip_threshold = 40;
  return p;
}

}  // namespace fixture
