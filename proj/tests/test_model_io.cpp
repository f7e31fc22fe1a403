#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "cicmap/evidence.hpp"
#include "fixtures.hpp"

using namespace cicmap;

namespace {

EvidenceModel trained_model() {
  const auto syn = synth_slide(fixture::small_spec());
  std::vector<GridCoord> cancer, normal;
  for (const auto& [c, l] : syn.labels.entries()) {
    (l == PatchLabel::cancer ? cancer : normal).push_back(c);
  }
  auto m = fit_model(syn.slide, cancer, normal, fixture::small_params());
  m.config_json = R"({"budget":20,"schedule":"worst*"})";
  return m;
}

}  // namespace

TEST_CASE("model JSON round trip is exact") {
  const auto m = trained_model();
  REQUIRE(m.n_p() > 0);
  REQUIRE(m.n_n() > 0);
  const auto text = model_to_json(m);
  const auto back = model_from_json(text);
  CHECK(back.alpha == m.alpha);
  CHECK(back.params.match.match_threshold == m.params.match.match_threshold);
  CHECK(back.params.patch_skip_threshold == m.params.patch_skip_threshold);
  CHECK(back.params.patch_size_px == 64);
  REQUIRE(back.positives.size() == m.positives.size());
  REQUIRE(back.negatives.size() == m.negatives.size());
  for (std::size_t i = 0; i < m.positives.size(); ++i) {
    CHECK(back.positives[i].cic == m.positives[i].cic);
    CHECK(back.positives[i].rho_p == m.positives[i].rho_p);
    CHECK(back.positives[i].count_p == m.positives[i].count_p);
    CHECK(back.positives[i].leader == m.positives[i].leader);
  }
  for (std::size_t i = 0; i < m.negatives.size(); ++i) {
    CHECK(back.negatives[i].cic == m.negatives[i].cic);
    CHECK(back.negatives[i].leader == m.negatives[i].leader);
  }
  REQUIRE(back.provenance.size() == 1);
  CHECK(back.provenance[0].slide_id == "small");
  CHECK(back.provenance[0].cancer == m.provenance[0].cancer);
  CHECK(model_to_json(back) == text);
}

TEST_CASE("model file round trip") {
  const auto m = trained_model();
  const auto path = (std::filesystem::temp_directory_path() / "cicmap_model_io.json").string();
  save_model(path, m);
  CHECK(model_to_json(load_model(path)) == model_to_json(m));
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_model(path), IoError);
}

TEST_CASE("model validation") {
  const auto text = model_to_json(trained_model());
  CHECK_THROWS_AS(model_from_json("{not json"), FormatError);
  CHECK_THROWS_AS(model_from_json("{}"), FormatError);

  auto edit = [&](const std::string& from, const std::string& to) {
    auto t = text;
    const auto pos = t.find(from);
    REQUIRE(pos != std::string::npos);
    t.replace(pos, from.size(), to);
    return t;
  };
  CHECK_THROWS_AS(model_from_json(edit("\"format_version\": 1", "\"format_version\": 9")),
                  FormatError);
  CHECK_THROWS_AS(model_from_json(edit("\"polarity\": \"positive\"", "\"polarity\": \"up\"")),
                  ValidationError);
  CHECK_THROWS_AS(model_from_json(edit("\"polarity\": \"positive\"", "\"polarity\": \"negative\"")),
                  ValidationError);
}
