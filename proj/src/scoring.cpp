#include "cicmap/scoring.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cicmap/parallel.hpp"

namespace cicmap {

PatchScore score_patch(const EvidenceModel& model, const DescriptorMatrix& codebook,
                       const Eigen::Ref<const DescriptorMatrix>& patch_records) {
  if (model.empty()) throw ModelError("score_patch: empty model");
  const auto np = static_cast<std::size_t>(model.n_p());
  std::vector<std::int64_t> hits(static_cast<std::size_t>(codebook.cols()), 0);
  for (Eigen::Index i = 0; i < patch_records.cols(); ++i) {
    const auto j = nearest_leader(codebook, patch_records.col(i), model.params.match.match_threshold);
    if (j != kNoLeader) ++hits[static_cast<std::size_t>(j)];
  }

  PatchScore out;
  double pos_sum = 0.0, neg_sum = 0.0;
  for (std::size_t j = 0; j < hits.size(); ++j) {
    if (j < np) {
      pos_sum += model.positives[j].cic * static_cast<double>(hits[j]);
      out.pos_hits += hits[j];
    } else {
      neg_sum += model.negatives[j - np].cic * static_cast<double>(hits[j]);
      out.neg_hits += hits[j];
    }
  }
  out.score = (1.0 - model.alpha) * pos_sum + model.alpha * neg_sum;
  return out;
}

PatchScore score_patch(const EvidenceModel& model,
                       const Eigen::Ref<const DescriptorMatrix>& patch_records) {
  return score_patch(model, model.combined_codebook(), patch_records);
}

ScoreMap score_slide(const EvidenceModel& model, const SlideDescriptorSet& slide,
                     unsigned threads) {
  if (model.empty()) throw ModelError("score_slide: empty model");
  if (slide.patch_size_px() != model.params.patch_size_px) {
    throw ConfigError("score_slide: slide patch size " + std::to_string(slide.patch_size_px()) +
                      " differs from model patch size " +
                      std::to_string(model.params.patch_size_px));
  }
  ScoreMap map;
  map.slide_id = slide.slide_id();
  map.dims = slide.dims();
  map.cells.resize(static_cast<std::size_t>(map.dims.cells()));
  const DescriptorMatrix codebook = model.combined_codebook();

  parallel_for(map.dims.cells(), threads, [&](std::int64_t a, std::int64_t b) {
    for (std::int64_t i = a; i < b; ++i) {
      auto& cell = map.cells[static_cast<std::size_t>(i)];
      const GridCoord c = map.coord(static_cast<std::size_t>(i));
      cell.n_descriptors = slide.patch_count(c);
      cell.skipped = cell.n_descriptors < model.params.patch_skip_threshold;
      if (cell.skipped) continue;
      const auto s = score_patch(model, codebook, slide.patch_descriptors(c));
      cell.score = s.score;
      cell.pos_hits = s.pos_hits;
      cell.neg_hits = s.neg_hits;
    }
  });
  return map;
}

void write_score_map(std::ostream& out, const ScoreMap& map) {
  out << "X,Y,n_descriptors,skipped,score,pos_hits,neg_hits\n";
  char buf[64];
  for (std::size_t i = 0; i < map.cells.size(); ++i) {
    const auto& cell = map.cells[i];
    const auto c = map.coord(i);
    out << c.x << ',' << c.y << ',' << cell.n_descriptors << ',' << (cell.skipped ? 1 : 0) << ',';
    if (!cell.skipped) {
      std::snprintf(buf, sizeof buf, "%.9g", cell.score);
      out << buf;
    }
    out << ',' << cell.pos_hits << ',' << cell.neg_hits << '\n';
  }
}

void write_score_map_file(const std::string& path, const ScoreMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_score_map(out, map);
  if (!out) throw IoError("write failure on " + path);
}

namespace {

template <typename T>
T field_number(const std::string& s, std::size_t line, const char* name) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError(line, std::string("bad ") + name + " '" + s + "'");
  }
  return v;
}

}  // namespace

ScoreMap read_score_map(std::istream& in, std::string slide_id) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "X,Y,n_descriptors,skipped,score,pos_hits,neg_hits") {
    throw ParseError(1, "unexpected score map header");
  }
  struct Row {
    GridCoord c;
    ScoreCell cell;
  };
  std::vector<Row> rows;
  std::size_t line_no = 1;
  GridDims dims{0, 0};
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 7) throw ParseError(line_no, "expected 7 fields");
    Row r;
    r.c = {field_number<int>(f[0], line_no, "X"), field_number<int>(f[1], line_no, "Y")};
    r.cell.n_descriptors = field_number<std::int64_t>(f[2], line_no, "n_descriptors");
    const int skipped = field_number<int>(f[3], line_no, "skipped");
    if (skipped != 0 && skipped != 1) throw ParseError(line_no, "skipped must be 0 or 1");
    r.cell.skipped = skipped == 1;
    if (!r.cell.skipped) r.cell.score = field_number<double>(f[4], line_no, "score");
    r.cell.pos_hits = field_number<std::int64_t>(f[5], line_no, "pos_hits");
    r.cell.neg_hits = field_number<std::int64_t>(f[6], line_no, "neg_hits");
    if (r.c.x < 0 || r.c.y < 0) throw ParseError(line_no, "negative grid coordinate");
    dims.cols = std::max(dims.cols, r.c.x + 1);
    dims.rows = std::max(dims.rows, r.c.y + 1);
    rows.push_back(r);
  }
  ScoreMap map;
  map.slide_id = std::move(slide_id);
  map.dims = dims;
  map.cells.resize(static_cast<std::size_t>(dims.cells()));
  std::vector<bool> seen(map.cells.size(), false);
  for (const auto& r : rows) {
    const auto i = static_cast<std::size_t>(std::int64_t{r.c.y} * dims.cols + r.c.x);
    if (seen[i]) throw ValidationError("score map lists a cell twice");
    seen[i] = true;
    map.cells[i] = r.cell;
  }
  return map;
}

ScoreMap read_score_map_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_score_map(in);
}

}  // namespace cicmap
