#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cicmap/evidence.hpp"

namespace cicmap {

using Json = nlohmann::ordered_json;

namespace {

Json coords_to_json(const std::vector<GridCoord>& coords) {
  Json a = Json::array();
  for (const auto& c : coords) a.push_back({c.x, c.y});
  return a;
}

std::vector<GridCoord> coords_from_json(const Json& a) {
  std::vector<GridCoord> out;
  for (const auto& c : a) out.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
  return out;
}

Json feature_to_json(const EvidenceFeature& f) {
  Json leader = Json::array();
  for (int k = 0; k < kDescriptorSize; ++k) leader.push_back(static_cast<double>(f.leader(k)));
  return Json{{"polarity", f.polarity == Polarity::positive ? "positive" : "negative"},
              {"rho_p", f.rho_p},
              {"cic", f.cic},
              {"count_p", f.count_p},
              {"count_n", f.count_n},
              {"leader", std::move(leader)}};
}

EvidenceFeature feature_from_json(const Json& j) {
  EvidenceFeature f;
  const auto pol = j.at("polarity").get<std::string>();
  if (pol == "positive") {
    f.polarity = Polarity::positive;
  } else if (pol == "negative") {
    f.polarity = Polarity::negative;
  } else {
    throw ValidationError("model: unknown polarity '" + pol + "'");
  }
  f.rho_p = j.at("rho_p").get<double>();
  f.cic = j.at("cic").get<double>();
  f.count_p = j.at("count_p").get<std::int64_t>();
  f.count_n = j.at("count_n").get<std::int64_t>();
  const auto& leader = j.at("leader");
  if (!leader.is_array() || leader.size() != kDescriptorSize) {
    throw ValidationError("model: leader must hold 128 numbers");
  }
  for (int k = 0; k < kDescriptorSize; ++k) {
    f.leader(k) = static_cast<float>(leader.at(static_cast<std::size_t>(k)).get<double>());
  }
  if (!is_valid_descriptor(f.leader)) throw ValidationError("model: leader outside [0, 255]");
  const bool positive_sign = f.cic > 0.0;
  if (f.cic == 0.0 || positive_sign != (f.polarity == Polarity::positive)) {
    throw ValidationError("model: feature polarity disagrees with the sign of cic");
  }
  return f;
}

}  // namespace

std::string model_to_json(const EvidenceModel& model) {
  Json features = Json::array();
  for (const auto& f : model.positives) features.push_back(feature_to_json(f));
  for (const auto& f : model.negatives) features.push_back(feature_to_json(f));

  Json training = Json::array();
  for (const auto& e : model.provenance) {
    training.push_back({{"slide_id", e.slide_id},
                        {"cancer", coords_to_json(e.cancer)},
                        {"normal", coords_to_json(e.normal)}});
  }

  const auto& p = model.params;
  Json doc{{"format_version", kModelFormatVersion},
           {"log_base", std::string(to_string(p.log_base))},
           {"params",
            {{"threshold", p.match.match_threshold},
             {"min_occurrences", p.match.min_occurrences},
             {"acceptance_ratio", p.match.acceptance_ratio},
             {"patch_skip_threshold", p.patch_skip_threshold},
             {"patch_size_px", p.patch_size_px}}},
           {"alpha", model.alpha},
           {"n_p", model.n_p()},
           {"n_n", model.n_n()},
           {"features", std::move(features)},
           {"provenance",
            {{"training", std::move(training)}, {"config", Json::parse(model.config_json)}}}};
  return doc.dump(2) + "\n";
}

EvidenceModel model_from_json(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
  try {
    if (doc.at("format_version").get<int>() != kModelFormatVersion) {
      throw FormatError("model: unsupported format_version");
    }
    EvidenceModel m;
    m.params.log_base = parse_log_base(doc.at("log_base").get<std::string>());
    const auto& p = doc.at("params");
    m.params.match.match_threshold = p.at("threshold").get<double>();
    m.params.match.min_occurrences = p.at("min_occurrences").get<std::int64_t>();
    m.params.match.acceptance_ratio = p.at("acceptance_ratio").get<double>();
    m.params.patch_skip_threshold = p.at("patch_skip_threshold").get<std::int64_t>();
    m.params.patch_size_px = p.at("patch_size_px").get<int>();
    m.params.validate();
    m.alpha = doc.at("alpha").get<double>();
    for (const auto& fj : doc.at("features")) {
      auto f = feature_from_json(fj);
      (f.polarity == Polarity::positive ? m.positives : m.negatives).push_back(f);
    }
    if (m.n_p() != doc.at("n_p").get<std::int64_t>() ||
        m.n_n() != doc.at("n_n").get<std::int64_t>()) {
      throw ValidationError("model: n_p/n_n disagree with the feature list");
    }
    if (const auto& prov = doc.at("provenance"); prov.contains("training")) {
      for (const auto& e : prov.at("training")) {
        m.provenance.push_back({e.at("slide_id").get<std::string>(),
                                coords_from_json(e.at("cancer")),
                                coords_from_json(e.at("normal"))});
      }
      if (prov.contains("config")) m.config_json = prov.at("config").dump();
    }
    return m;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
}

void save_model(const std::string& path, const EvidenceModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << model_to_json(model);
  if (!out) throw IoError("write failure on " + path);
}

EvidenceModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace cicmap
