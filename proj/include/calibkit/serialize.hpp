#pragma once

// JSON encoding of calibration models:
//   {"method": "none"|"ts"|"cts"|"vs", "alpha": ..., "alpha0": ..., "alphas": [...],
//    "gamma": <number>|"inf", "a": [...], "b": [...], "num_classes": K}
// Only the fields of the given method are written.

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "json.hpp"

#include "calibkit/model.hpp"

namespace calibkit {

using json = nlohmann::json;

inline json gamma_to_json(double gamma) {
  if (std::isinf(gamma)) return "inf";
  return gamma;
}

inline double gamma_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    throw Error(ErrorKind::format, "gamma must be a number or \"inf\"");
  }
  if (!j.is_number()) throw Error(ErrorKind::format, "gamma must be a number or \"inf\"");
  return j.get<double>();
}

inline json model_to_json(const CalibrationModel& model, int num_classes) {
  json j;
  j["method"] = method_name(model);
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, TemperatureModel>) {
          j["alpha"] = m.alpha;
        } else if constexpr (std::is_same_v<M, ClassWiseTemperatureModel>) {
          j["alpha0"] = m.alpha0;
          j["alphas"] = m.alphas;
          j["gamma"] = gamma_to_json(m.gamma);
        } else if constexpr (std::is_same_v<M, VectorScalingModel>) {
          j["a"] = m.scale;
          j["b"] = m.bias;
        }
      },
      model);
  j["num_classes"] = num_classes;
  return j;
}

/// Parses and validates a model document. Returns the model and its K.
inline std::pair<CalibrationModel, int> model_from_json(const json& j) {
  try {
    const auto method = j.at("method").get<std::string>();
    const int k = j.at("num_classes").get<int>();
    if (k < 2) throw Error(ErrorKind::invalid_model, "num_classes must be at least 2");
    CalibrationModel model;
    if (method == "none") {
      model = IdentityModel{};
    } else if (method == "ts") {
      model = TemperatureModel{j.at("alpha").get<double>()};
    } else if (method == "cts") {
      model = ClassWiseTemperatureModel{j.at("alpha0").get<double>(), j.at("alphas").get<std::vector<double>>(),
                                        gamma_from_json(j.at("gamma"))};
    } else if (method == "vs") {
      model = VectorScalingModel{j.at("a").get<std::vector<double>>(), j.at("b").get<std::vector<double>>()};
    } else {
      throw Error(ErrorKind::format, "unknown method '" + method + "'");
    }
    validate(model, k);
    return {model, k};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("malformed model JSON: ") + e.what());
  }
}

inline std::pair<CalibrationModel, int> read_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::format, "cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace calibkit
