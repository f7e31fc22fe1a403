#include "cicmap/features.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string_view>

namespace cicmap {

GridCoord patch_index(std::int64_t x, std::int64_t y, int patch_size) {
  if (x < 0 || y < 0) {
    throw InvalidArgument("patch_index: negative pixel coordinate");
  }
  if (patch_size <= 0) {
    throw InvalidArgument("patch_index: patch size must be positive");
  }
  return {static_cast<int>(x / patch_size), static_cast<int>(y / patch_size)};
}

GridDims grid_dims(std::int64_t width, std::int64_t height, int patch_size) {
  if (width <= 0 || height <= 0 || patch_size <= 0) {
    throw InvalidArgument("grid_dims: width, height and patch size must be positive");
  }
  return {static_cast<int>((width + patch_size - 1) / patch_size),
          static_cast<int>((height + patch_size - 1) / patch_size)};
}

SlideDescriptorSet::SlideDescriptorSet(std::string slide_id, std::int64_t width_px,
                                       std::int64_t height_px, int patch_size_px,
                                       std::vector<std::int64_t> xs,
                                       std::vector<std::int64_t> ys,
                                       DescriptorMatrix descriptors)
    : slide_id_(std::move(slide_id)),
      width_(width_px),
      height_(height_px),
      patch_size_(patch_size_px),
      dims_(grid_dims(width_px, height_px, patch_size_px)) {
  const auto n = static_cast<std::size_t>(descriptors.cols());
  if (xs.size() != n || ys.size() != n) {
    throw InvalidArgument("SlideDescriptorSet: coordinate and descriptor counts differ");
  }

  std::vector<std::int64_t> cell(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (xs[i] < 0 || ys[i] < 0 || xs[i] >= width_ || ys[i] >= height_) {
      throw ValidationError("record " + std::to_string(i) + ": keypoint (" +
                            std::to_string(xs[i]) + ", " + std::to_string(ys[i]) +
                            ") outside the slide");
    }
    if (!is_valid_descriptor(descriptors.col(static_cast<Eigen::Index>(i)))) {
      throw ValidationError("record " + std::to_string(i) +
                            ": descriptor component outside [0, 255]");
    }
    cell[i] = cell_index(patch_index(xs[i], ys[i], patch_size_));
  }

  offsets_.assign(static_cast<std::size_t>(dims_.cells()) + 1, 0);
  for (auto c : cell) ++offsets_[static_cast<std::size_t>(c) + 1];
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());

  const bool canonical = std::is_sorted(cell.begin(), cell.end());
  if (canonical) {
    xs_ = std::move(xs);
    ys_ = std::move(ys);
    descriptors_ = std::move(descriptors);
    return;
  }

  // Counting sort keeps input order within each bucket.
  std::vector<std::int64_t> cursor(offsets_.begin(), offsets_.end() - 1);
  std::vector<std::int64_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    order[static_cast<std::size_t>(cursor[static_cast<std::size_t>(cell[i])]++)] =
        static_cast<std::int64_t>(i);
  }
  xs_.resize(n);
  ys_.resize(n);
  descriptors_.resize(kDescriptorSize, static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const auto src = static_cast<std::size_t>(order[j]);
    xs_[j] = xs[src];
    ys_[j] = ys[src];
    descriptors_.col(static_cast<Eigen::Index>(j)) =
        descriptors.col(static_cast<Eigen::Index>(src));
  }
}

namespace {

DescriptorMatrix pack(std::span<const KeypointRecord> records) {
  DescriptorMatrix m(kDescriptorSize, static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    m.col(static_cast<Eigen::Index>(i)) = records[i].descriptor;
  }
  return m;
}

std::vector<std::int64_t> xs_of(std::span<const KeypointRecord> records) {
  std::vector<std::int64_t> v;
  v.reserve(records.size());
  for (const auto& r : records) v.push_back(r.x);
  return v;
}

std::vector<std::int64_t> ys_of(std::span<const KeypointRecord> records) {
  std::vector<std::int64_t> v;
  v.reserve(records.size());
  for (const auto& r : records) v.push_back(r.y);
  return v;
}

}  // namespace

SlideDescriptorSet::SlideDescriptorSet(std::string slide_id, std::int64_t width_px,
                                       std::int64_t height_px, int patch_size_px,
                                       std::span<const KeypointRecord> records)
    : SlideDescriptorSet(std::move(slide_id), width_px, height_px, patch_size_px,
                         xs_of(records), ys_of(records), pack(records)) {}

std::pair<std::int64_t, std::int64_t> SlideDescriptorSet::patch_range(GridCoord c) const {
  if (!contains(c)) {
    throw InvalidArgument("patch (" + std::to_string(c.x) + ", " + std::to_string(c.y) +
                          ") outside the grid");
  }
  const auto i = static_cast<std::size_t>(cell_index(c));
  return {offsets_[i], offsets_[i + 1]};
}

// --- Descriptor CSV --------------------------------------------------------

namespace {

constexpr std::size_t kCsvFields = 3 + kDescriptorSize;

std::string expected_header() {
  std::string h = "slide_id,x,y";
  for (int i = 0; i < kDescriptorSize; ++i) h += ",d" + std::to_string(i);
  return h;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

}  // namespace

SlideDescriptorSet ingest_descriptors(std::istream& in, const IngestOptions& opts) {
  if (opts.patch_size_px <= 0) throw InvalidArgument("patch size must be positive");

  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  strip_cr(line);
  if (line != expected_header()) {
    throw ParseError(1, "header must be slide_id,x,y,d0,...,d127");
  }

  std::string slide_id;
  std::vector<std::int64_t> xs, ys;
  std::vector<float> values;
  std::int64_t max_x = -1, max_y = -1;
  std::vector<std::string_view> fields(kCsvFields);

  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;

    std::size_t nf = 0, start = 0;
    const std::string_view view(line);
    while (true) {
      const auto comma = view.find(',', start);
      if (nf == kCsvFields) throw ParseError(line_no, "too many fields");
      fields[nf++] = view.substr(start, comma == std::string_view::npos
                                            ? std::string_view::npos
                                            : comma - start);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (nf != kCsvFields) {
      throw ParseError(line_no, "expected " + std::to_string(kCsvFields) + " fields, got " +
                                    std::to_string(nf));
    }

    if (slide_id.empty()) {
      slide_id = std::string(fields[0]);
    } else if (fields[0] != slide_id) {
      throw ParseError(line_no, "mixed slide ids in one file");
    }

    std::int64_t x = 0, y = 0;
    if (!parse_number(fields[1], x) || !parse_number(fields[2], y)) {
      throw ParseError(line_no, "coordinates must be integers");
    }
    if (x < 0 || y < 0) throw ValidationError("line " + std::to_string(line_no) +
                                              ": negative coordinate");
    for (std::size_t k = 0; k < kDescriptorSize; ++k) {
      double v = 0.0;
      if (!parse_number(fields[3 + k], v)) {
        throw ParseError(line_no, "component d" + std::to_string(k) + " is not a number");
      }
      if (!(v >= 0.0 && v <= kDescriptorMax)) {
        throw ValidationError("line " + std::to_string(line_no) + ": component d" +
                              std::to_string(k) + " = " + std::string(fields[3 + k]) +
                              " outside [0, 255]");
      }
      values.push_back(static_cast<float>(v));
    }
    xs.push_back(x);
    ys.push_back(y);
    max_x = std::max(max_x, x);
    max_y = std::max(max_y, y);
  }
  if (in.bad()) throw IoError("read failure on descriptor stream");

  const std::int64_t width = opts.width_px.value_or(std::max<std::int64_t>(max_x + 1, 1));
  const std::int64_t height = opts.height_px.value_or(std::max<std::int64_t>(max_y + 1, 1));
  if (max_x >= width || max_y >= height) {
    throw ValidationError("keypoint outside the declared slide extent");
  }

  DescriptorMatrix m = Eigen::Map<const DescriptorMatrix>(
      values.data(), kDescriptorSize, static_cast<Eigen::Index>(xs.size()));
  return SlideDescriptorSet(slide_id.empty() ? opts.default_slide_id : slide_id, width,
                            height, opts.patch_size_px, std::move(xs), std::move(ys),
                            std::move(m));
}

SlideDescriptorSet ingest_descriptors_file(const std::string& path,
                                           const IngestOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return ingest_descriptors(in, opts);
}

void write_descriptors(std::ostream& out, const SlideDescriptorSet& slide) {
  out << expected_header() << '\n';
  const auto& d = slide.descriptors();
  char buf[32];
  std::string row;
  for (std::int64_t i = 0; i < slide.size(); ++i) {
    row.clear();
    row += slide.slide_id();
    row += ',';
    row += std::to_string(slide.x(i));
    row += ',';
    row += std::to_string(slide.y(i));
    for (int k = 0; k < kDescriptorSize; ++k) {
      const float v = d(k, static_cast<Eigen::Index>(i));
      row += ',';
      if (v == std::floor(v)) {
        row += std::to_string(static_cast<int>(v));
      } else {
        std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
        row += buf;
      }
    }
    row += '\n';
    out << row;
  }
}

void write_descriptors_file(const std::string& path, const SlideDescriptorSet& slide) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_descriptors(out, slide);
  if (!out) throw IoError("write failure on " + path);
}

// --- PNM --------------------------------------------------------------------

namespace {

int read_header_int(std::istream& in) {
  int c = in.peek();
  while (c != EOF) {
    if (std::isspace(c)) {
      in.get();
    } else if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else {
      break;
    }
    c = in.peek();
  }
  int v = -1;
  if (!(in >> v)) throw FormatError("truncated PNM header");
  return v;
}

}  // namespace

GrayImage read_pnm(std::istream& in) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw FormatError("unsupported raster: expected binary PGM (P5) or PPM (P6)");
  }
  const bool color = magic[1] == '6';
  GrayImage img;
  img.width = read_header_int(in);
  img.height = read_header_int(in);
  const int maxval = read_header_int(in);
  if (img.width <= 0 || img.height <= 0) throw FormatError("empty raster");
  if (maxval != 255) throw FormatError("unsupported raster: only 8-bit maxval 255");
  in.get();  // single whitespace after maxval

  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  img.pixels.resize(n);
  if (!color) {
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(n));
    if (!in) throw FormatError("truncated PGM data");
    return img;
  }
  std::vector<std::uint8_t> rgb(3 * n);
  in.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!in) throw FormatError("truncated PPM data");
  for (std::size_t i = 0; i < n; ++i) {
    const double lum = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(lum, 0.0, 255.0)));
  }
  return img;
}

GrayImage read_pnm_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_pnm(in);
}

}  // namespace cicmap
