#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "fairsurv/cox.hpp"

namespace fairsurv {

// {beta: [...], baseline: [[t, H0], ...], scaler: {center, scale}};
// round-trip stable (nlohmann emits shortest round-trip doubles).
inline nlohmann::json model_to_json(const CoxModel& model) {
  nlohmann::json j;
  j["beta"] = std::vector<double>(model.beta.data(), model.beta.data() + model.beta.size());
  nlohmann::json baseline = nlohmann::json::array();
  for (std::size_t i = 0; i < model.baseline.times.size(); ++i) {
    baseline.push_back({model.baseline.times[i], model.baseline.values[i]});
  }
  j["baseline"] = baseline;
  if (model.has_scaler) {
    j["scaler"] = {
        {"center", std::vector<double>(model.scaler.center.data(), model.scaler.center.data() + model.scaler.center.size())},
        {"scale", std::vector<double>(model.scaler.scale.data(), model.scaler.scale.data() + model.scaler.scale.size())}};
  } else {
    j["scaler"] = nullptr;
  }
  return j;
}

inline CoxModel model_from_json(const nlohmann::json& j) {
  CoxModel model;
  const auto beta = j.at("beta").get<std::vector<double>>();
  model.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  model.baseline.initial = 0.0;
  for (const auto& pair : j.at("baseline")) {
    model.baseline.times.push_back(pair.at(0).get<double>());
    model.baseline.values.push_back(pair.at(1).get<double>());
  }
  if (j.contains("scaler") && !j.at("scaler").is_null()) {
    const auto center = j.at("scaler").at("center").get<std::vector<double>>();
    const auto scale = j.at("scaler").at("scale").get<std::vector<double>>();
    model.scaler.center = Eigen::Map<const Eigen::VectorXd>(center.data(), static_cast<Eigen::Index>(center.size()));
    model.scaler.scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    model.has_scaler = true;
  }
  return model;
}

inline void save_model(const std::string& path, const CoxModel& model) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  out << model_to_json(model).dump(2) << "\n";
}

inline CoxModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": invalid model JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace fairsurv
