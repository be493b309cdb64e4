#pragma once

// Numerical machinery: bounded scalar minimization, projected gradient
// descent, temperature/vector-scaling NLL with analytic gradients, and
// central finite differences.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "calibkit/core.hpp"

namespace calibkit {

struct ScalarProblem {
  std::function<double(double)> objective;
  double lo = 0.0;
  double hi = 1.0;
  double tolerance = 1e-6;
  int scan_points = 64;
};

struct ScalarResult {
  double x = 0.0;
  double value = 0.0;
  int evaluations = 0;
};

/// Coarse uniform scan over [lo, hi] followed by golden-section search in the
/// cell pair around the best scan point. Deterministic.
inline ScalarResult minimize_scalar(const ScalarProblem& problem) {
  if (!(problem.lo <= problem.hi) || !std::isfinite(problem.lo) || !std::isfinite(problem.hi)) {
    throw Error(ErrorKind::config, "invalid scalar search bounds");
  }
  if (!(problem.tolerance > 0.0)) throw Error(ErrorKind::config, "scalar tolerance must be positive");
  ScalarResult result;
  auto eval = [&](double x) {
    const double f = problem.objective(x);
    ++result.evaluations;
    if (!std::isfinite(f)) {
      throw Error(ErrorKind::optimization, "objective is not finite at x = " + std::to_string(x));
    }
    return f;
  };

  if (problem.lo == problem.hi) {
    result.x = problem.lo;
    result.value = eval(problem.lo);
    return result;
  }

  const int points = std::max(problem.scan_points, 3);
  const double width = problem.hi - problem.lo;
  auto grid = [&](int i) { return i == points - 1 ? problem.hi : problem.lo + width * i / (points - 1); };
  int best = 0;
  double best_value = eval(grid(0));
  for (int i = 1; i < points; ++i) {
    const double f = eval(grid(i));
    if (f < best_value) {
      best_value = f;
      best = i;
    }
  }

  double a = grid(std::max(best - 1, 0));
  double b = grid(std::min(best + 1, points - 1));
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = eval(c);
  double fd = eval(d);
  while (b - a > problem.tolerance) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = eval(d);
    }
  }
  const double mid = 0.5 * (a + b);
  const double fmid = eval(mid);

  result.x = grid(best);
  result.value = best_value;
  for (auto [x, f] : {std::pair{c, fc}, std::pair{d, fd}, std::pair{mid, fmid}}) {
    if (f < result.value) {
      result.x = x;
      result.value = f;
    }
  }
  return result;
}

struct GradientSettings {
  double step = 0.1;
  int max_iterations = 2000;
  double min_improvement = 1e-10;
  int max_halvings = 40;
  double step_growth = 1.0;  // factor applied to the step after an accepted iterate; 1 keeps it fixed
};

struct GradientProblem {
  std::function<double(std::span<const double>)> objective;
  std::function<void(std::span<const double>, std::span<double>)> gradient;
  std::function<void(std::span<double>)> project;  // empty means unconstrained
  std::vector<double> initial;
  GradientSettings settings;
  std::function<void(std::span<const double>, double)> on_iterate;  // sees every accepted iterate
};

struct GradientResult {
  std::vector<double> x;
  double loss = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// x <- project(x - step * grad) with step halving until the loss strictly decreases.
/// Stops when the improvement drops below `min_improvement`, the step stalls, or
/// the iteration budget runs out.
inline GradientResult projected_gd(const GradientProblem& problem) {
  const auto& s = problem.settings;
  auto project = [&](std::span<double> x) {
    if (problem.project) problem.project(x);
  };
  auto loss_at = [&](std::span<const double> x, int iteration) {
    const double f = problem.objective(x);
    if (std::isnan(f)) {
      throw Error(ErrorKind::optimization, "loss became NaN at iteration " + std::to_string(iteration));
    }
    return f;
  };

  GradientResult result;
  result.x = problem.initial;
  project(result.x);
  result.loss = loss_at(result.x, 0);
  if (problem.on_iterate) problem.on_iterate(result.x, result.loss);

  std::vector<double> grad(result.x.size());
  std::vector<double> trial(result.x.size());
  double step = s.step;
  for (int it = 1; it <= s.max_iterations; ++it) {
    problem.gradient(result.x, grad);
    for (double g : grad) {
      if (!std::isfinite(g)) throw Error(ErrorKind::optimization, "gradient not finite at iteration " + std::to_string(it));
    }
    bool accepted = false;
    double trial_loss = result.loss;
    for (int h = 0; h <= s.max_halvings; ++h) {
      for (std::size_t j = 0; j < trial.size(); ++j) trial[j] = result.x[j] - step * grad[j];
      project(trial);
      trial_loss = loss_at(trial, it);
      if (trial_loss < result.loss) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    result.iterations = it;
    if (!accepted) {
      result.converged = true;  // no descent step left at this resolution
      break;
    }
    const double improvement = result.loss - trial_loss;
    result.x = trial;
    result.loss = trial_loss;
    if (problem.on_iterate) problem.on_iterate(result.x, result.loss);
    if (improvement < s.min_improvement) {
      result.converged = true;
      break;
    }
    step = s.step_growth > 1.0 ? step * s.step_growth : s.step;
  }
  return result;
}

/// Optional subset of record indices; std::nullopt means every record.
using RecordSelection = std::optional<std::span<const std::size_t>>;

namespace detail {

template <typename Fn>
void for_each_record(std::size_t n, const RecordSelection& selection, Fn&& fn) {
  if (selection) {
    for (std::size_t i : *selection) fn(i);
  } else {
    for (std::size_t i = 0; i < n; ++i) fn(i);
  }
}

inline std::size_t selection_size(std::size_t n, const RecordSelection& selection) {
  return selection ? selection->size() : n;
}

}  // namespace detail

/// Mean NLL of softmax(alpha * z) over the selected records.
inline double nll_temperature(const LogitDataset& data, double alpha, const RecordSelection& selection = std::nullopt) {
  const std::size_t n = detail::selection_size(data.size(), selection);
  if (n == 0) throw Error(ErrorKind::empty_dataset, "NLL of zero records");
  long double total = 0.0L;
  detail::for_each_record(data.size(), selection, [&](std::size_t i) {
    auto z = data.logits(i);
    const double m = alpha * *std::max_element(z.begin(), z.end());
    long double sum = 0.0L;
    for (double v : z) sum += std::exp(alpha * v - m);
    total += static_cast<long double>(m) + std::log(sum) - static_cast<long double>(alpha * z[static_cast<std::size_t>(data.label(i))]);
  });
  return static_cast<double>(total / static_cast<long double>(n));
}

/// d/d(alpha) of nll_temperature: mean of (sum_k p_k z_k - z_y) with p = softmax(alpha z).
inline double nll_grad_temperature(const LogitDataset& data, double alpha,
                                   const RecordSelection& selection = std::nullopt) {
  const std::size_t n = detail::selection_size(data.size(), selection);
  if (n == 0) return 0.0;
  long double total = 0.0L;
  detail::for_each_record(data.size(), selection, [&](std::size_t i) {
    auto z = data.logits(i);
    const double m = alpha * *std::max_element(z.begin(), z.end());
    long double sum = 0.0L;
    long double weighted = 0.0L;
    for (double v : z) {
      const long double e = std::exp(alpha * v - m);
      sum += e;
      weighted += e * v;
    }
    total += weighted / sum - z[static_cast<std::size_t>(data.label(i))];
  });
  return static_cast<double>(total / static_cast<long double>(n));
}

/// Mean NLL of softmax(a ⊙ z + b).
inline double nll_vector(const LogitDataset& data, std::span<const double> a, std::span<const double> b) {
  const auto k = static_cast<std::size_t>(data.num_classes());
  if (a.size() != k || b.size() != k) throw Error(ErrorKind::config, "vector scaling dimension does not match K");
  if (data.empty()) throw Error(ErrorKind::empty_dataset, "NLL of zero records");
  std::vector<double> t(k);
  long double total = 0.0L;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto z = data.logits(i);
    for (std::size_t j = 0; j < k; ++j) t[j] = a[j] * z[j] + b[j];
    const double m = *std::max_element(t.begin(), t.end());
    total += static_cast<long double>(m) + detail::log_sum_exp_shifted(t, m) - t[static_cast<std::size_t>(data.label(i))];
  }
  return static_cast<double>(total / static_cast<long double>(data.size()));
}

struct VectorGradient {
  std::vector<double> scale;
  std::vector<double> bias;
};

/// grad_b = mean(p - onehot(y)), grad_a = mean((p - onehot(y)) ⊙ z), p = softmax(a ⊙ z + b).
inline VectorGradient nll_grad_vector(const LogitDataset& data, std::span<const double> a, std::span<const double> b) {
  const auto k = static_cast<std::size_t>(data.num_classes());
  if (a.size() != k || b.size() != k) throw Error(ErrorKind::config, "vector scaling dimension does not match K");
  std::vector<long double> ga(k, 0.0L), gb(k, 0.0L);
  std::vector<double> t(k);
  std::vector<long double> e(k);
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto z = data.logits(i);
    for (std::size_t j = 0; j < k; ++j) t[j] = a[j] * z[j] + b[j];
    const double m = *std::max_element(t.begin(), t.end());
    long double sum = 0.0L;
    for (std::size_t j = 0; j < k; ++j) {
      e[j] = std::exp(t[j] - m);
      sum += e[j];
    }
    const auto y = static_cast<std::size_t>(data.label(i));
    for (std::size_t j = 0; j < k; ++j) {
      const long double residual = e[j] / sum - (j == y ? 1.0L : 0.0L);
      gb[j] += residual;
      ga[j] += residual * z[j];
    }
  }
  VectorGradient g{std::vector<double>(k, 0.0), std::vector<double>(k, 0.0)};
  if (data.empty()) return g;
  const auto n = static_cast<long double>(data.size());
  for (std::size_t j = 0; j < k; ++j) {
    g.scale[j] = static_cast<double>(ga[j] / n);
    g.bias[j] = static_cast<double>(gb[j] / n);
  }
  return g;
}

/// Central difference (f(x + h) - f(x - h)) / 2h.
inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Relative error with the denominator floored at 1e-8.
inline double relative_error(double value, double reference) {
  return std::fabs(value - reference) / std::max(std::fabs(reference), 1e-8);
}

}  // namespace calibkit
