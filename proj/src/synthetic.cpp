#include "cicmap/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cicmap/parallel.hpp"

namespace cicmap {

namespace {

// Portable RNG plumbing: the stdlib distributions are implementation
// defined, these are not.
std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() { return splitmix64(state_); }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next() % span);
  }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b * 0xD1B54A32D192ED03ULL);
  return splitmix64(s);
}

// Cluster index for weight table `cdf` (cumulative, last entry 1).
int draw(Rng& rng, const std::vector<double>& cdf) {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
}

std::vector<double> cumulative(std::vector<double> w) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  double acc = 0.0;
  for (auto& x : w) {
    acc += x / total;
    x = acc;
  }
  w.back() = 1.0;
  return w;
}

double rounding_slack() { return std::sqrt(static_cast<double>(kDescriptorSize)) / 2.0; }

}  // namespace

void SyntheticSpec::validate() const {
  if (n_clusters_p < 0 || n_clusters_n < 0 || n_clusters_p + n_clusters_n == 0) {
    throw SpecError("synthetic: need at least one planted cluster");
  }
  if (planted_rho.size() != static_cast<std::size_t>(n_clusters_p + n_clusters_n)) {
    throw SpecError("synthetic: planted_rho must list n_clusters_p + n_clusters_n values");
  }
  for (std::size_t i = 0; i < planted_rho.size(); ++i) {
    const double r = planted_rho[i];
    if (!(r >= 0.0 && r <= 1.0)) throw SpecError("synthetic: planted rho outside [0, 1]");
    const bool positive = static_cast<int>(i) < n_clusters_p;
    if (positive ? r < 0.5 : r > 0.5) {
      throw SpecError("synthetic: positive clusters need rho >= 0.5, negative rho <= 0.5");
    }
  }
  if (!(match_threshold > 0.0)) throw SpecError("synthetic: match_threshold must be > 0");
  if (!(cluster_separation > match_threshold)) {
    throw SpecError("synthetic: cluster_separation must exceed match_threshold");
  }
  if (cluster_separation > kDescriptorMax * std::sqrt(double{kDescriptorSize})) {
    throw SpecError("synthetic: cluster_separation exceeds the diameter of [0,255]^128");
  }
  if (grid_cols <= 0 || grid_rows <= 0 || patch_size_px <= 0) {
    throw SpecError("synthetic: grid and patch size must be positive");
  }
  if (descriptors_min < 0 || descriptors_max < descriptors_min) {
    throw SpecError("synthetic: bad descriptors_per_patch range");
  }
  if (!(cancer_fraction >= 0.0 && cancer_fraction <= 1.0)) {
    throw SpecError("synthetic: cancer_fraction outside [0, 1]");
  }
  if (!(purity_min >= 0.0 && purity_min <= purity_max && purity_max <= 1.0)) {
    throw SpecError("synthetic: bad purity range");
  }
  if (!(shift_normal_fraction >= 0.0 && shift_normal_fraction <= 1.0)) {
    throw SpecError("synthetic: shift_normal_fraction outside [0, 1]");
  }
  const double sum_p = std::accumulate(planted_rho.begin(), planted_rho.end(), 0.0);
  const double sum_n = static_cast<double>(planted_rho.size()) - sum_p;
  if (sum_p <= 0.0 || sum_n <= 0.0) {
    throw SpecError("synthetic: every rho is 0 or every rho is 1; one class has no tokens");
  }
  const double radius = std::min(match_threshold / 4.0, (cluster_separation - match_threshold) / 2.0);
  if (radius <= rounding_slack()) {
    throw SpecError("synthetic: separation too close to the threshold for integer descriptors");
  }
}

using Json = nlohmann::ordered_json;

std::string synthetic_spec_to_json(const SyntheticSpec& s) {
  Json j{{"slide_id", s.slide_id},
         {"n_clusters_p", s.n_clusters_p},
         {"n_clusters_n", s.n_clusters_n},
         {"planted_rho", s.planted_rho},
         {"cluster_separation", s.cluster_separation},
         {"match_threshold", s.match_threshold},
         {"grid", {{"cols", s.grid_cols}, {"rows", s.grid_rows}}},
         {"patch_size_px", s.patch_size_px},
         {"descriptors_per_patch", {{"min", s.descriptors_min}, {"max", s.descriptors_max}}},
         {"cancer_fraction", s.cancer_fraction},
         {"purity", {{"min", s.purity_min}, {"max", s.purity_max}}},
         {"shift_normal_fraction", s.shift_normal_fraction},
         {"cluster_seed", s.cluster_seed},
         {"seed", s.seed}};
  return j.dump(2) + "\n";
}

SyntheticSpec synthetic_spec_from_json(const std::string& text) {
  SyntheticSpec s;
  try {
    const auto j = Json::parse(text);
    s.slide_id = j.value("slide_id", s.slide_id);
    s.n_clusters_p = j.value("n_clusters_p", s.n_clusters_p);
    s.n_clusters_n = j.value("n_clusters_n", s.n_clusters_n);
    if (j.contains("planted_rho")) s.planted_rho = j.at("planted_rho").get<std::vector<double>>();
    s.cluster_separation = j.value("cluster_separation", s.cluster_separation);
    s.match_threshold = j.value("match_threshold", s.match_threshold);
    if (j.contains("grid")) {
      s.grid_cols = j.at("grid").at("cols").get<int>();
      s.grid_rows = j.at("grid").at("rows").get<int>();
    }
    s.patch_size_px = j.value("patch_size_px", s.patch_size_px);
    if (j.contains("descriptors_per_patch")) {
      s.descriptors_min = j.at("descriptors_per_patch").at("min").get<std::int64_t>();
      s.descriptors_max = j.at("descriptors_per_patch").at("max").get<std::int64_t>();
    }
    s.cancer_fraction = j.value("cancer_fraction", s.cancer_fraction);
    if (j.contains("purity")) {
      s.purity_min = j.at("purity").at("min").get<double>();
      s.purity_max = j.at("purity").at("max").get<double>();
    }
    s.shift_normal_fraction = j.value("shift_normal_fraction", s.shift_normal_fraction);
    s.cluster_seed = j.value("cluster_seed", s.cluster_seed);
    s.seed = j.value("seed", s.seed);
  } catch (const Json::exception& e) {
    throw FormatError(std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return synthetic_spec_from_json(ss.str());
}

SyntheticSlide synth_slide(const SyntheticSpec& spec, unsigned threads) {
  spec.validate();
  const int n_planted = spec.n_clusters_p + spec.n_clusters_n;
  const int n_centers = n_planted + 1;  // + the shift cluster

  SyntheticSlide out;
  out.scatter_radius =
      std::min(spec.match_threshold / 4.0, (spec.cluster_separation - spec.match_threshold) / 2.0);
  const double radius = out.scatter_radius - rounding_slack();

  // Centres depend on cluster_seed only, so slides sharing it share clusters.
  Eigen::Matrix<double, kDescriptorSize, Eigen::Dynamic> centers(kDescriptorSize, n_centers);
  {
    Rng rng(mix(spec.cluster_seed, 0xC1057E5ULL));
    constexpr int kAttempts = 10000;
    for (int c = 0; c < n_centers; ++c) {
      bool placed = false;
      for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
        for (int k = 0; k < kDescriptorSize; ++k) centers(k, c) = kDescriptorMax * rng.uniform();
        placed = true;
        for (int o = 0; o < c && placed; ++o) {
          placed = (centers.col(c) - centers.col(o)).norm() >= spec.cluster_separation;
        }
      }
      if (!placed) {
        throw SpecError("synthetic: cannot place " + std::to_string(n_centers) +
                        " clusters at the requested separation");
      }
    }
  }
  out.centers = centers.cast<float>();

  std::vector<double> w_cancer, w_normal;
  for (double r : spec.planted_rho) {
    w_cancer.push_back(r);
    w_normal.push_back(1.0 - r);
  }
  const auto cdf_cancer = cumulative(w_cancer);
  const auto cdf_normal = cumulative(w_normal);

  // Labels: the cancer_fraction of patches nearest the grid centre.
  const GridDims dims{spec.grid_cols, spec.grid_rows};
  const auto cells = static_cast<std::size_t>(dims.cells());
  std::vector<std::size_t> order(cells);
  std::iota(order.begin(), order.end(), 0);
  auto dist2 = [&](std::size_t i) {
    const double dx = static_cast<double>(i % static_cast<std::size_t>(dims.cols)) + 0.5 - dims.cols / 2.0;
    const double dy = static_cast<double>(i / static_cast<std::size_t>(dims.cols)) + 0.5 - dims.rows / 2.0;
    return dx * dx + dy * dy;
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist2(a) < dist2(b); });
  const auto n_cancer = static_cast<std::size_t>(std::llround(spec.cancer_fraction * static_cast<double>(cells)));
  std::vector<bool> is_cancer(cells, false);
  for (std::size_t i = 0; i < n_cancer; ++i) is_cancer[order[i]] = true;
  for (std::size_t i = 0; i < cells; ++i) {
    const GridCoord c{static_cast<int>(i % static_cast<std::size_t>(dims.cols)),
                      static_cast<int>(i / static_cast<std::size_t>(dims.cols))};
    out.labels.set(c, is_cancer[i] ? PatchLabel::cancer : PatchLabel::normal);
  }

  // Per-patch token counts and purity, drawn up front.
  std::vector<std::int64_t> counts(cells), offsets(cells + 1, 0);
  std::vector<double> purity(cells, 1.0);
  {
    Rng rng(mix(spec.seed, 0x5EEDULL));
    for (std::size_t i = 0; i < cells; ++i) {
      counts[i] = rng.uniform_int(spec.descriptors_min, spec.descriptors_max);
      purity[i] = spec.purity_min + (spec.purity_max - spec.purity_min) * rng.uniform();
      offsets[i + 1] = offsets[i] + counts[i];
    }
  }

  const std::int64_t total = offsets.back();
  DescriptorMatrix desc(kDescriptorSize, total);
  std::vector<std::int64_t> xs(static_cast<std::size_t>(total)), ys(static_cast<std::size_t>(total));
  const int ps = spec.patch_size_px;

  parallel_for(static_cast<std::int64_t>(cells), threads, [&](std::int64_t a, std::int64_t b) {
    Eigen::Matrix<double, kDescriptorSize, 1> dir;
    for (std::int64_t i = a; i < b; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      Rng rng(mix(spec.seed, static_cast<std::uint64_t>(i) + 1));
      const int px = static_cast<int>(ui % static_cast<std::size_t>(dims.cols));
      const int py = static_cast<int>(ui / static_cast<std::size_t>(dims.cols));
      for (std::int64_t t = offsets[ui]; t < offsets[ui + 1]; ++t) {
        int cluster;
        if (is_cancer[ui]) {
          cluster = rng.uniform() < purity[ui] ? draw(rng, cdf_cancer) : draw(rng, cdf_normal);
        } else {
          cluster = rng.uniform() < spec.shift_normal_fraction ? n_planted : draw(rng, cdf_normal);
        }
        for (int k = 0; k < kDescriptorSize; ++k) dir(k) = rng.normal();
        const double n = dir.norm();
        const double r = radius * rng.uniform();
        auto col = desc.col(static_cast<Eigen::Index>(t));
        for (int k = 0; k < kDescriptorSize; ++k) {
          const double v = centers(k, cluster) + (n > 0.0 ? dir(k) * r / n : 0.0);
          col(k) = static_cast<float>(std::round(std::clamp(v, 0.0, kDescriptorMax)));
        }
        xs[static_cast<std::size_t>(t)] = std::int64_t{px} * ps + rng.uniform_int(0, ps - 1);
        ys[static_cast<std::size_t>(t)] = std::int64_t{py} * ps + rng.uniform_int(0, ps - 1);
      }
    }
  });

  out.slide = SlideDescriptorSet(spec.slide_id, std::int64_t{dims.cols} * ps,
                                 std::int64_t{dims.rows} * ps, ps, std::move(xs), std::move(ys),
                                 std::move(desc));
  return out;
}

}  // namespace cicmap
