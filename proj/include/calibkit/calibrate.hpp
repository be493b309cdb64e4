#pragma once

// Fitting temperature scaling (TS), class-wise temperature scaling (CTS) and
// vector scaling (VS) on a validation set by minimizing NLL.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <limits>
#include <string>
#include <vector>

#include "calibkit/core.hpp"
#include "calibkit/metrics.hpp"
#include "calibkit/model.hpp"
#include "calibkit/optim.hpp"

namespace calibkit {

struct FitConfig {
  double alpha_lo = 0.01;
  double alpha_hi = 100.0;
  double gamma = 0.0;  // +inf decouples classes entirely
  std::size_t min_class_samples = 10;
  double tolerance = 1e-6;
  GradientSettings descent{.step = 0.1, .max_iterations = 2000, .min_improvement = 1e-10, .max_halvings = 40,
                            .step_growth = 2.0};
  // Sees every accepted iterate of the gradient-based fits: (alpha0, alpha_1..K) for
  // finite-gamma CTS, (a, b) for VS.
  std::function<void(std::span<const double>, double)> observer;

  void validate() const {
    if (!(alpha_lo > 0.0) || !std::isfinite(alpha_hi) || !(alpha_lo <= alpha_hi)) {
      throw Error(ErrorKind::config, "temperature bounds must satisfy 0 < alpha_lo <= alpha_hi < inf");
    }
    if (!(gamma >= 0.0)) throw Error(ErrorKind::config, "gamma must be non-negative");
    if (!(tolerance > 0.0)) throw Error(ErrorKind::config, "tolerance must be positive");
  }
};

struct FitResult {
  CalibrationModel model;
  double validation_nll = 0.0;
  int iterations = 0;
  std::vector<bool> fallback;  // per class, CTS only
  double accuracy_before = 0.0;
  double accuracy_after = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

inline void require_nonempty(const LogitDataset& val) {
  if (val.empty()) throw Error(ErrorKind::empty_dataset, "validation set is empty");
}

inline void warn_on_boundary(double alpha, const FitConfig& cfg, const std::string& who, std::vector<std::string>& out) {
  const double slack = 10.0 * cfg.tolerance;
  if (alpha - cfg.alpha_lo <= slack || cfg.alpha_hi - alpha <= slack) {
    out.push_back(who + " temperature " + std::to_string(alpha) + " sits on the search boundary");
  }
}

inline void finish(FitResult& result, const LogitDataset& val) {
  result.accuracy_before = predict(val, IdentityModel{}).accuracy();
  const auto after = predict(val, result.model);
  result.accuracy_after = after.accuracy();
  result.validation_nll = nll(after);
}

inline ScalarResult minimize_temperature(const LogitDataset& val, const FitConfig& cfg,
                                         const RecordSelection& selection = std::nullopt) {
  return minimize_scalar(ScalarProblem{[&](double a) { return nll_temperature(val, a, selection); }, cfg.alpha_lo,
                                       cfg.alpha_hi, cfg.tolerance, 64});
}

}  // namespace detail

/// Single temperature minimizing validation NLL over [alpha_lo, alpha_hi].
inline FitResult fit_ts(const LogitDataset& val, const FitConfig& cfg = {}) {
  cfg.validate();
  detail::require_nonempty(val);
  const auto best = detail::minimize_temperature(val, cfg);
  FitResult result;
  result.model = TemperatureModel{best.x};
  result.iterations = best.evaluations;
  detail::warn_on_boundary(best.x, cfg, "global", result.warnings);
  detail::finish(result, val);
  return result;
}

/// Class-wise temperatures routed by the uncalibrated prediction.
///  gamma = 0   : identical to fit_ts.
///  gamma = inf : independent search per predicted-class slice; slices smaller
///                than min_class_samples fall back to the global temperature.
///  otherwise   : projected gradient descent over (alpha0, alpha_1..alpha_K),
///                started from the TS solution.
inline FitResult fit_cts(const LogitDataset& val, const FitConfig& cfg = {}) {
  cfg.validate();
  detail::require_nonempty(val);
  const int num_classes = val.num_classes();
  const auto k = static_cast<std::size_t>(num_classes);

  FitResult ts = fit_ts(val, cfg);
  const double alpha0 = std::get<TemperatureModel>(ts.model).alpha;

  FitResult result;
  result.warnings = ts.warnings;
  result.fallback.assign(k, false);
  ClassWiseTemperatureModel model{alpha0, std::vector<double>(k, alpha0), cfg.gamma};

  if (cfg.gamma == 0.0) {
    result.iterations = ts.iterations;
    result.model = model;
    detail::finish(result, val);
    return result;
  }

  const auto slices = split_by_predicted(predicted_classes(val), num_classes);

  if (std::isinf(cfg.gamma)) {
    for (const auto& slice : slices) {
      const auto c = static_cast<std::size_t>(slice.cls);
      if (slice.indices.size() < cfg.min_class_samples) {
        result.fallback[c] = true;
        result.warnings.push_back("class " + std::to_string(slice.cls) + " has " + std::to_string(slice.indices.size()) +
                                  " validation records; using the global temperature");
        continue;
      }
      const auto best = detail::minimize_temperature(val, cfg, std::span<const std::size_t>(slice.indices));
      model.alphas[c] = best.x;
      result.iterations += best.evaluations;
      detail::warn_on_boundary(best.x, cfg, "class " + std::to_string(slice.cls), result.warnings);
    }
    result.model = model;
    detail::finish(result, val);
    return result;
  }

  // Finite gamma. Descent runs in the centred coordinates (beta0 = alpha0,
  // beta_k = alpha_k - alpha0), where the feasible set is a box; iterates are
  // stored in alpha coordinates.
  const double n = static_cast<double>(val.size());
  std::vector<double> weight(k, 0.0);
  for (const auto& slice : slices) weight[static_cast<std::size_t>(slice.cls)] = slice.indices.size() / n;

  auto loss = [&](std::span<const double> x) {
    long double total = 0.0L;
    for (const auto& slice : slices) {
      if (slice.indices.empty()) continue;
      const auto c = static_cast<std::size_t>(slice.cls);
      total += weight[c] * nll_temperature(val, x[c + 1], std::span<const std::size_t>(slice.indices));
    }
    return static_cast<double>(total);
  };
  auto gradient = [&](std::span<const double> x, std::span<double> out) {
    double shared = 0.0;
    std::vector<double> g(k, 0.0);
    for (const auto& slice : slices) {
      if (slice.indices.empty()) continue;
      const auto c = static_cast<std::size_t>(slice.cls);
      g[c] = weight[c] * nll_grad_temperature(val, x[c + 1], std::span<const std::size_t>(slice.indices));
      shared += g[c];
    }
    out[0] = shared;
    for (std::size_t c = 0; c < k; ++c) out[c + 1] = g[c] + shared;
  };
  const double lo = cfg.alpha_lo, hi = cfg.alpha_hi, gamma = cfg.gamma;
  auto project = [lo, hi, gamma](std::span<double> x) {
    x[0] = std::clamp(x[0], lo, hi);
    const double lower = std::max(x[0] - gamma, lo);
    const double upper = std::min(x[0] + gamma, hi);
    for (std::size_t c = 1; c < x.size(); ++c) x[c] = std::clamp(x[c], lower, upper);
  };

  GradientProblem problem;
  problem.objective = loss;
  problem.gradient = gradient;
  problem.project = project;
  problem.initial.assign(k + 1, alpha0);
  problem.settings = cfg.descent;
  problem.on_iterate = cfg.observer;
  const auto solved = projected_gd(problem);

  model.alpha0 = solved.x[0];
  model.alphas.assign(solved.x.begin() + 1, solved.x.end());
  result.model = model;
  result.iterations = solved.iterations;
  detail::finish(result, val);
  return result;
}

/// Per-class scale and bias by full-batch gradient descent. Two starts: the
/// identity (a = 1, b = 0) and the TS solution (a = alpha * 1, b = 0); the
/// lower validation NLL wins.
inline FitResult fit_vs(const LogitDataset& val, const FitConfig& cfg = {}) {
  cfg.validate();
  detail::require_nonempty(val);
  const auto k = static_cast<std::size_t>(val.num_classes());
  const FitResult ts = fit_ts(val, cfg);
  const double alpha = std::get<TemperatureModel>(ts.model).alpha;

  GradientProblem problem;
  problem.objective = [&](std::span<const double> x) { return nll_vector(val, x.first(k), x.subspan(k)); };
  problem.gradient = [&](std::span<const double> x, std::span<double> out) {
    const auto g = nll_grad_vector(val, x.first(k), x.subspan(k));
    std::copy(g.scale.begin(), g.scale.end(), out.begin());
    std::copy(g.bias.begin(), g.bias.end(), out.begin() + static_cast<std::ptrdiff_t>(k));
  };
  problem.settings = cfg.descent;
  problem.on_iterate = cfg.observer;

  GradientResult best;
  bool have_best = false;
  int iterations = 0;
  for (double start : {1.0, alpha}) {
    problem.initial.assign(2 * k, 0.0);
    std::fill(problem.initial.begin(), problem.initial.begin() + static_cast<std::ptrdiff_t>(k), start);
    auto run = projected_gd(problem);
    iterations += run.iterations;
    if (!std::isfinite(run.loss)) {
      throw Error(ErrorKind::optimization, "vector scaling diverged after " + std::to_string(run.iterations) + " iterations");
    }
    if (!have_best || run.loss < best.loss) {
      best = std::move(run);
      have_best = true;
    }
  }

  FitResult result;
  result.model = VectorScalingModel{std::vector<double>(best.x.begin(), best.x.begin() + static_cast<std::ptrdiff_t>(k)),
                                    std::vector<double>(best.x.begin() + static_cast<std::ptrdiff_t>(k), best.x.end())};
  result.iterations = iterations;
  detail::finish(result, val);
  return result;
}

struct AccuracyDelta {
  double delta = 0.0;
  std::size_t changed_records = 0;
};

inline AccuracyDelta accuracy_delta(const PredictionSet& before, const PredictionSet& after) {
  if (before.size() != after.size()) throw Error(ErrorKind::config, "prediction sets differ in length");
  AccuracyDelta out;
  long hits = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (before.predicted(i) != after.predicted(i)) ++out.changed_records;
    hits += (after.correct(i) ? 1 : 0) - (before.correct(i) ? 1 : 0);
  }
  if (!before.empty()) out.delta = static_cast<double>(hits) / static_cast<double>(before.size());
  return out;
}

}  // namespace calibkit
