#include <doctest.h>

#include <random>
#include <sstream>

#include "cicmap/features.hpp"

using namespace cicmap;

namespace {

std::string header() {
  std::string h = "slide_id,x,y";
  for (int i = 0; i < 128; ++i) h += ",d" + std::to_string(i);
  return h + "\n";
}

std::string row(const std::string& id, int x, int y, double fill, int bad_index = -1,
                const std::string& bad = "") {
  std::ostringstream os;
  os << id << ',' << x << ',' << y;
  for (int i = 0; i < 128; ++i) {
    os << ',';
    if (i == bad_index) {
      os << bad;
    } else {
      os << fill;
    }
  }
  os << '\n';
  return os.str();
}

}  // namespace

TEST_CASE("patch_index floors pixel coordinates") {
  CHECK(patch_index(0, 0, 512) == GridCoord{0, 0});
  CHECK(patch_index(511, 511, 512) == GridCoord{0, 0});
  CHECK(patch_index(512, 600, 512) == GridCoord{1, 1});
  CHECK_THROWS_AS(patch_index(-1, 0, 512), InvalidArgument);
  CHECK_THROWS_AS(patch_index(0, 0, 0), InvalidArgument);
}

TEST_CASE("grid_dims rounds up") {
  CHECK(grid_dims(1024, 1536, 512) == GridDims{2, 3});
  CHECK(grid_dims(1025, 512, 512) == GridDims{3, 1});
  CHECK(grid_dims(97792, 221184, 512) == GridDims{191, 432});
  CHECK_THROWS_AS(grid_dims(0, 10, 512), InvalidArgument);
}

TEST_CASE("slide buckets form a partition in canonical order") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> ux(0, 2999), uy(0, 1999);
  std::vector<KeypointRecord> recs(500);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    recs[i].x = ux(rng);
    recs[i].y = uy(rng);
    recs[i].descriptor(0) = static_cast<float>(i / 256);
    recs[i].descriptor(1) = static_cast<float>(i % 256);
  }
  const SlideDescriptorSet slide("s", 3000, 2000, 512, recs);
  CHECK(slide.dims() == GridDims{6, 4});

  std::int64_t total = 0;
  std::int64_t prev_end = 0;
  for (int y = 0; y < slide.dims().rows; ++y) {
    for (int x = 0; x < slide.dims().cols; ++x) {
      auto [a, b] = slide.patch_range({x, y});
      CHECK(a == prev_end);
      prev_end = b;
      total += b - a;
      for (auto i = a; i < b; ++i) {
        CHECK(patch_index(slide.x(i), slide.y(i), 512) == GridCoord{x, y});
      }
      // components 0 and 1 encode the input index
      auto input_index = [&](std::int64_t i) {
        return 256 * slide.descriptors()(0, i) + slide.descriptors()(1, i);
      };
      for (auto i = a + 1; i < b; ++i) CHECK(input_index(i - 1) < input_index(i));
    }
  }
  CHECK(total == slide.size());

  // Re-bucketing with the same patch size reproduces the same layout.
  std::vector<KeypointRecord> again;
  for (std::int64_t i = 0; i < slide.size(); ++i) {
    again.push_back({slide.x(i), slide.y(i), slide.descriptors().col(i)});
  }
  const SlideDescriptorSet rebucketed("s", 3000, 2000, 512, again);
  CHECK(rebucketed.descriptors() == slide.descriptors());
}

TEST_CASE("bucket keeps input order") {
  std::vector<KeypointRecord> recs;
  for (int i = 0; i < 6; ++i) {
    KeypointRecord r;
    r.x = (i % 2) * 600;  // alternate between two patches
    r.y = 5;
    r.descriptor.setConstant(static_cast<float>(i));
    recs.push_back(r);
  }
  const SlideDescriptorSet slide("s", 1200, 10, 512, recs);
  auto left = slide.patch_descriptors({0, 0});
  auto right = slide.patch_descriptors({1, 0});
  REQUIRE(left.cols() == 3);
  REQUIRE(right.cols() == 3);
  CHECK(left(0, 0) == 0.0f);
  CHECK(left(0, 1) == 2.0f);
  CHECK(left(0, 2) == 4.0f);
  CHECK(right(0, 0) == 1.0f);
  CHECK(right(0, 2) == 5.0f);
}

TEST_CASE("slide construction validates records") {
  KeypointRecord r;
  r.x = 10;
  r.y = 10;
  r.descriptor(3) = 256.0f;
  CHECK_THROWS_AS(SlideDescriptorSet("s", 100, 100, 512, std::vector{r}), ValidationError);
  r.descriptor(3) = 0.0f;
  r.x = 100;
  CHECK_THROWS_AS(SlideDescriptorSet("s", 100, 100, 512, std::vector{r}), ValidationError);
}

TEST_CASE("ingest: empty file with header") {
  std::istringstream in(header());
  const auto slide = ingest_descriptors(in, {});
  CHECK(slide.size() == 0);
}

TEST_CASE("ingest: one row lands in bucket (0,0)") {
  std::istringstream in(header() + row("a", 10, 20, 7));
  const auto slide = ingest_descriptors(in, {});
  REQUIRE(slide.size() == 1);
  CHECK(slide.slide_id() == "a");
  CHECK(slide.patch_count({0, 0}) == 1);
  CHECK(slide.descriptors()(127, 0) == 7.0f);
}

TEST_CASE("ingest: decimals are accepted") {
  std::istringstream in(header() + row("a", 1, 1, 12.5));
  const auto slide = ingest_descriptors(in, {});
  CHECK(slide.descriptors()(0, 0) == 12.5f);
}

TEST_CASE("ingest: out-of-range component is a validation error") {
  std::istringstream in(header() + row("a", 1, 1, 3, 5, "256"));
  CHECK_THROWS_AS(ingest_descriptors(in, {}), ValidationError);
}

TEST_CASE("ingest: malformed row reports its line") {
  std::istringstream in(header() + row("a", 1, 1, 3) + row("a", 1, 1, 3, 9, "abc"));
  try {
    ingest_descriptors(in, {});
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::istringstream short_row(header() + "a,1,2,3\n");
  CHECK_THROWS_AS(ingest_descriptors(short_row, {}), ParseError);
  std::istringstream bad_header("slide,x,y\n");
  CHECK_THROWS_AS(ingest_descriptors(bad_header, {}), ParseError);
}

TEST_CASE("ingest: explicit extent bounds coordinates") {
  IngestOptions opts;
  opts.width_px = 5;
  opts.height_px = 5;
  std::istringstream in(header() + row("a", 10, 1, 3));
  CHECK_THROWS_AS(ingest_descriptors(in, opts), ValidationError);
}

TEST_CASE("write then ingest reproduces the slide") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> u(0, 255), ux(0, 1500);
  std::vector<KeypointRecord> recs(40);
  for (auto& r : recs) {
    r.x = ux(rng);
    r.y = ux(rng);
    for (int k = 0; k < 128; ++k) r.descriptor(k) = static_cast<float>(u(rng));
  }
  recs[0].descriptor(0) = 0.25f;
  const SlideDescriptorSet slide("rt", 1501, 1501, 512, recs);
  std::stringstream buf;
  write_descriptors(buf, slide);
  IngestOptions opts;
  opts.width_px = 1501;
  opts.height_px = 1501;
  const auto back = ingest_descriptors(buf, opts);
  CHECK(back.descriptors() == slide.descriptors());
  for (std::int64_t i = 0; i < slide.size(); ++i) {
    CHECK(back.x(i) == slide.x(i));
    CHECK(back.y(i) == slide.y(i));
  }
}

TEST_CASE("read_pnm rejects unsupported rasters") {
  std::istringstream p2("P2\n2 2\n255\n0 0 0 0\n");
  CHECK_THROWS_AS(read_pnm(p2), FormatError);
  std::istringstream p5("P5\n2 1\n255\n\x01\x02");
  const auto img = read_pnm(p5);
  CHECK(img.width == 2);
  CHECK(img.at(1, 0) == 2);
  std::string rgb = "P6\n1 1\n255\n";
  rgb += static_cast<char>(255);
  rgb += static_cast<char>(0);
  rgb += static_cast<char>(0);
  std::istringstream p6(rgb);
  CHECK(read_pnm(p6).at(0, 0) == 76);  // 0.299 * 255
}
