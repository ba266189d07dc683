#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "asvgp/model.hpp"
#include "json.hpp"

namespace asvgp {

inline constexpr int kModelFileVersion = 1;

/// Serializes everything needed to re-finalize without the training data.
inline nlohmann::json to_json(const FitResult& fit) {
  using nlohmann::json;
  json j;
  j["format"] = "asvgp-model";
  j["version"] = kModelFileVersion;
  j["structure"] = to_string(fit.features.space.structure());
  j["family"] = to_string(fit.features.family);
  json bases = json::array();
  for (const auto& b : fit.features.space.bases()) {
    bases.push_back({{"lower", b.lower()}, {"upper", b.upper()}, {"num_basis", b.num_basis()}, {"order", b.order()}});
  }
  j["bases"] = bases;
  j["transform"] = {{"offset", fit.transform.offset}, {"scale", fit.transform.scale}, {"upper", fit.transform.upper}};
  j["hyper"] = {{"log_lengthscale", fit.hyper.log_lengthscale},
                {"log_variance", fit.hyper.log_variance},
                {"log_noise", fit.hyper.log_noise}};
  j["jitter"] = fit.jitter;
  const auto raw = fit.stats.a.raw();
  j["stats"] = {{"n", fit.stats.n},
                {"c", fit.stats.c},
                {"b", fit.stats.b},
                {"a", {{"dim", fit.stats.a.dim()}, {"width", fit.stats.a.width()},
                       {"values", std::vector<double>(raw.begin(), raw.end())}}}};
  return j;
}

inline std::string to_model_text(const FitResult& fit) { return to_json(fit).dump(2) + "\n"; }

/// Rebuilds a FitResult, re-running finalize and checking its invariants.
inline FitResult from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("format", std::string()) != "asvgp-model") {
      throw InvalidData("not an asvgp model file");
    }
    const int version = j.at("version").get<int>();
    if (version != kModelFileVersion) throw InvalidData("unsupported model file version " + std::to_string(version));
    const Structure structure = structure_from_string(j.at("structure").get<std::string>());
    const Family family = family_from_string(j.at("family").get<std::string>());
    std::vector<SplineBasis> bases;
    for (const auto& b : j.at("bases")) {
      bases.emplace_back(b.at("lower").get<double>(), b.at("upper").get<double>(), b.at("num_basis").get<std::size_t>(),
                         b.at("order").get<int>());
    }
    Features features(FeatureSpace(structure, std::move(bases)), family);

    InputTransform t;
    t.offset = j.at("transform").at("offset").get<std::vector<double>>();
    t.scale = j.at("transform").at("scale").get<std::vector<double>>();
    t.upper = j.at("transform").at("upper").get<std::vector<double>>();
    const std::size_t dims = features.space.input_dims();
    if (t.offset.size() != dims || t.scale.size() != dims || t.upper.size() != dims) {
      throw InvalidData("transform does not match the number of input dimensions");
    }

    MaternHyper h;
    h.family = family;
    h.log_lengthscale = j.at("hyper").at("log_lengthscale").get<std::vector<double>>();
    h.log_variance = j.at("hyper").at("log_variance").get<std::vector<double>>();
    h.log_noise = j.at("hyper").at("log_noise").get<double>();

    const auto& js = j.at("stats");
    Stats stats = Stats::zeros(features.space);
    stats.n = js.at("n").get<std::size_t>();
    stats.c = js.at("c").get<double>();
    stats.b = js.at("b").get<std::vector<double>>();
    const auto& ja = js.at("a");
    const auto values = ja.at("values").get<std::vector<double>>();
    if (ja.at("dim").get<std::size_t>() != stats.a.dim() || ja.at("width").get<std::size_t>() != stats.a.width() ||
        values.size() != stats.a.raw().size() || stats.b.size() != stats.a.dim()) {
      throw InvalidData("statistics do not match the feature space");
    }
    std::copy(values.begin(), values.end(), stats.a.raw().begin());

    FitResult fit = finalize(features, stats, h, t);
    const double stored_jitter = j.at("jitter").get<double>();
    if (fit.jitter != stored_jitter) {
      throw InvalidData("re-finalization used jitter " + std::to_string(fit.jitter) + ", file records " +
                        std::to_string(stored_jitter));
    }
    const InvariantReport inv = check_invariants(fit);
    if (!(inv.reconstruction_error <= 1e-10) || !(inv.residual <= 1e-8)) {
      throw InvalidData("re-finalized model violates its factor invariants");
    }
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidData(std::string("malformed model file: ") + e.what());
  }
}

inline FitResult from_model_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidData(std::string("model file is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

inline void save_model(const FitResult& fit, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidConfiguration("cannot open '" + path + "' for writing");
  out << to_model_text(fit);
  if (!out) throw InvalidConfiguration("failed writing '" + path + "'");
}

inline FitResult load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidConfiguration("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_model_text(ss.str());
}

}  // namespace asvgp
