#pragma once

// Calibration models and their application to logits.
//
// Temperatures MULTIPLY logits: softmax(alpha * z). alpha < 1 softens the
// distribution, alpha > 1 sharpens it (alpha = 1/T in divide-by-T notation).

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "calibkit/core.hpp"

namespace calibkit {

struct IdentityModel {
  friend bool operator==(const IdentityModel&, const IdentityModel&) = default;
};

struct TemperatureModel {
  double alpha = 1.0;
  friend bool operator==(const TemperatureModel&, const TemperatureModel&) = default;
};

/// One temperature per predicted class, tied to a shared alpha0 within radius gamma.
struct ClassWiseTemperatureModel {
  double alpha0 = 1.0;
  std::vector<double> alphas;
  double gamma = std::numeric_limits<double>::infinity();
  friend bool operator==(const ClassWiseTemperatureModel&, const ClassWiseTemperatureModel&) = default;
};

/// softmax(scale ⊙ z + bias). May change the argmax.
struct VectorScalingModel {
  std::vector<double> scale;
  std::vector<double> bias;
  friend bool operator==(const VectorScalingModel&, const VectorScalingModel&) = default;
};

using CalibrationModel = std::variant<IdentityModel, TemperatureModel, ClassWiseTemperatureModel, VectorScalingModel>;

inline const char* method_name(const CalibrationModel& model) {
  switch (model.index()) {
    case 0: return "none";
    case 1: return "ts";
    case 2: return "cts";
    default: return "vs";
  }
}

/// True when |alpha_k - alpha0| <= gamma, evaluated as alpha0 - gamma <= alpha_k <= alpha0 + gamma.
inline bool within_radius(double alpha_k, double alpha0, double gamma) {
  if (std::isinf(gamma)) return true;
  return alpha_k >= alpha0 - gamma && alpha_k <= alpha0 + gamma;
}

/// Throws when the model's parameters are invalid or do not fit `num_classes`.
inline void validate(const CalibrationModel& model, int num_classes) {
  const auto k = static_cast<std::size_t>(num_classes);
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, TemperatureModel>) {
          if (!positive(m.alpha)) throw Error(ErrorKind::invalid_model, "temperature must be positive");
        } else if constexpr (std::is_same_v<M, ClassWiseTemperatureModel>) {
          if (!positive(m.alpha0)) throw Error(ErrorKind::invalid_model, "alpha0 must be positive");
          if (!(m.gamma >= 0.0)) throw Error(ErrorKind::invalid_model, "gamma must be non-negative");
          if (m.alphas.size() != k) throw Error(ErrorKind::config, "class-wise temperature count does not match K");
          for (double a : m.alphas) {
            if (!positive(a)) throw Error(ErrorKind::invalid_model, "class temperatures must be positive");
            if (!within_radius(a, m.alpha0, m.gamma)) {
              throw Error(ErrorKind::invalid_model, "class temperature outside the gamma radius");
            }
          }
        } else if constexpr (std::is_same_v<M, VectorScalingModel>) {
          if (m.scale.size() != k || m.bias.size() != k) {
            throw Error(ErrorKind::config, "vector scaling dimension does not match K");
          }
          detail::require_finite(m.scale, "vector scale");
          detail::require_finite(m.bias, "vector bias");
        }
      },
      model);
}

/// Writes the calibrated logits for one record. `predicted` is the uncalibrated Ŷ.
inline void transform_logits(const CalibrationModel& model, std::span<const double> logits, int predicted,
                             std::span<double> out) {
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, IdentityModel>) {
          for (std::size_t k = 0; k < logits.size(); ++k) out[k] = logits[k];
        } else if constexpr (std::is_same_v<M, TemperatureModel>) {
          for (std::size_t k = 0; k < logits.size(); ++k) out[k] = m.alpha * logits[k];
        } else if constexpr (std::is_same_v<M, ClassWiseTemperatureModel>) {
          const double alpha = m.alphas.at(static_cast<std::size_t>(predicted));
          for (std::size_t k = 0; k < logits.size(); ++k) out[k] = alpha * logits[k];
        } else {
          for (std::size_t k = 0; k < logits.size(); ++k) out[k] = m.scale[k] * logits[k] + m.bias[k];
        }
      },
      model);
}

/// Calibrated probability vector for one record.
inline std::vector<double> apply(const CalibrationModel& model, std::span<const double> logits, int predicted) {
  if (const auto* t = std::get_if<TemperatureModel>(&model); t && !(t->alpha > 0.0)) {
    throw Error(ErrorKind::invalid_model, "temperature must be positive");
  }
  if (const auto* c = std::get_if<ClassWiseTemperatureModel>(&model)) {
    if (predicted < 0 || static_cast<std::size_t>(predicted) >= c->alphas.size()) {
      throw Error(ErrorKind::config, "predicted class outside the class-wise model");
    }
    if (!(c->alphas[static_cast<std::size_t>(predicted)] > 0.0)) {
      throw Error(ErrorKind::invalid_model, "temperature must be positive");
    }
  }
  if (const auto* v = std::get_if<VectorScalingModel>(&model)) {
    if (v->scale.size() != logits.size() || v->bias.size() != logits.size()) {
      throw Error(ErrorKind::config, "vector scaling dimension does not match K");
    }
  }
  std::vector<double> z(logits.size());
  transform_logits(model, logits, predicted, z);
  return softmax(z);
}

/// Applies `model` to every record. Class-wise models route by the uncalibrated prediction.
inline PredictionSet predict(const LogitDataset& data, const CalibrationModel& model) {
  validate(model, data.num_classes());
  const auto k = static_cast<std::size_t>(data.num_classes());
  std::vector<double> probs(data.size() * k);
  std::vector<double> logp(data.size() * k);
  std::vector<double> z(k);
  const bool routed = std::holds_alternative<ClassWiseTemperatureModel>(model);
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto row = data.logits(i);
    const int yhat = routed ? predicted_class(row) : 0;
    transform_logits(model, row, yhat, z);
    auto p = softmax(z);
    auto lp = log_softmax(z);
    std::copy(p.begin(), p.end(), probs.begin() + static_cast<std::ptrdiff_t>(i * k));
    std::copy(lp.begin(), lp.end(), logp.begin() + static_cast<std::ptrdiff_t>(i * k));
  }
  return PredictionSet(data.num_classes(), std::move(probs), std::move(logp),
                       std::vector<int>(data.labels().begin(), data.labels().end()));
}

}  // namespace calibkit
