#pragma once

// Synthetic constructions: the two-atom noisy binary distribution and its
// population-optimal logistic classifier, the three-atom sample-size
// construction with norm-constrained logistic fitting, and a heterogeneous
// multiclass logit generator.
//
// Randomness: std::mt19937_64 seeded through derive_seed(). Streams are
// reproducible within one standard library implementation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "calibkit/core.hpp"
#include "calibkit/optim.hpp"

namespace calibkit {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; maps (seed, stream) to a well-mixed child seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// log(1 + e^t) without overflow.
inline double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::fabs(t))); }

/// Binary records (x in R^dim, y in {0, 1}); `atom` tags the support point each x came from.
struct BinaryDataset {
  std::size_t dim = 0;
  std::vector<double> x;  // row-major n x dim
  std::vector<int> y;
  std::vector<int> atom;

  std::size_t size() const noexcept { return y.size(); }
  std::span<const double> row(std::size_t i) const { return std::span<const double>(x).subspan(i * dim, dim); }
};

struct LinearBinaryClassifier {
  std::vector<double> weight;
  double intercept = 0.0;

  double logit(std::span<const double> x) const {
    double t = intercept;
    for (std::size_t j = 0; j < weight.size(); ++j) t += weight[j] * x[j];
    return t;
  }
  /// f(x) = P(Y = 1 | x).
  double probability(std::span<const double> x) const { return sigmoid(logit(x)); }
  /// Ŷ = 1 when f(x) >= 1/2.
  int decision(std::span<const double> x) const { return logit(x) >= 0.0 ? 1 : 0; }
  double confidence(std::span<const double> x) const {
    const double p = probability(x);
    return decision(x) == 1 ? p : 1.0 - p;
  }
  double weight_norm() const {
    double s = 0.0;
    for (double w : weight) s += w * w;
    return std::sqrt(s);
  }
};

/// Mean binary cross-entropy of `clf` on `data`.
inline double binary_nll(const LinearBinaryClassifier& clf, const BinaryDataset& data) {
  if (data.size() == 0) throw Error(ErrorKind::empty_dataset, "NLL of zero records");
  long double total = 0.0L;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double sign = data.y[i] == 1 ? 1.0 : -1.0;
    total += softplus(-sign * clf.logit(data.row(i)));
  }
  return static_cast<double>(total / static_cast<long double>(data.size()));
}

// ---------------------------------------------------------------------------
// Two-atom noisy binary distribution over {v, -v}.

struct NoisyBinarySpec {
  double p_plus = 0.0;   // P(Y = 0 | X = v)
  double p_minus = 0.0;  // P(Y = 1 | X = -v)
  double p_test = 0.0;   // symmetric flip rate of the test distribution
  std::vector<double> direction{1.0};

  void validate() const {
    for (double p : {p_plus, p_minus, p_test}) {
      if (!(p >= 0.0 && p < 0.5)) throw Error(ErrorKind::config, "noise levels must lie in [0, 1/2)");
    }
    if (direction.empty()) throw Error(ErrorKind::config, "direction must have dimension >= 1");
    double norm2 = 0.0;
    for (double c : direction) norm2 += c * c;
    if (std::fabs(std::sqrt(norm2) - 1.0) > 1e-12) throw Error(ErrorKind::config, "direction must have unit norm");
  }
};

/// X = ±v with probability 1/2 each; Y = 1 w.p. 1 - p_plus at v, Y = 0 w.p. 1 - p_minus at -v.
inline BinaryDataset sample_dnoisy(const NoisyBinarySpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  Rng rng(derive_seed(seed, 0));
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution keep_plus(1.0 - spec.p_plus);
  std::bernoulli_distribution keep_minus(1.0 - spec.p_minus);
  BinaryDataset data;
  data.dim = spec.direction.size();
  data.x.reserve(n * data.dim);
  data.y.reserve(n);
  data.atom.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool plus = coin(rng);
    for (double c : spec.direction) data.x.push_back(plus ? c : -c);
    if (plus) {
      data.y.push_back(keep_plus(rng) ? 1 : 0);
    } else {
      data.y.push_back(keep_minus(rng) ? 0 : 1);
    }
    data.atom.push_back(plus ? 0 : 1);
  }
  return data;
}

/// Population NLL minimizer along v for training noise (p_plus, p_minus).
/// With alpha = a + b and beta = a - b the loss decouples, giving
/// alpha = log((1 - p_plus) / p_plus), beta = log((1 - p_minus) / p_minus).
struct Lemma2Solution {
  double alpha = 0.0;
  double beta = 0.0;
  double a = 0.0;  // weight along v
  double b = 0.0;  // intercept

  LinearBinaryClassifier classifier(std::span<const double> direction) const {
    LinearBinaryClassifier clf;
    clf.weight.assign(direction.begin(), direction.end());
    for (double& w : clf.weight) w *= a;
    clf.intercept = b;
    return clf;
  }
};

inline Lemma2Solution lemma2_closed_form(double p_plus, double p_minus) {
  for (double p : {p_plus, p_minus}) {
    if (p == 0.0) throw Error(ErrorKind::degenerate_noise, "zero noise drives the optimal logit to infinity");
    if (!(p > 0.0 && p < 0.5)) throw Error(ErrorKind::config, "noise levels must lie in (0, 1/2)");
  }
  Lemma2Solution s;
  s.alpha = std::log((1.0 - p_plus) / p_plus);
  s.beta = std::log((1.0 - p_minus) / p_minus);
  s.a = 0.5 * (s.alpha + s.beta);
  s.b = 0.5 * (s.alpha - s.beta);
  return s;
}

struct PopulationCalibration {
  double conf_plus = 0.0;   // P̂(v)
  double conf_minus = 0.0;  // P̂(-v)
  double accuracy = 0.0;    // under the symmetric test noise p_test
};

/// Exact confidence on both atoms and exact test accuracy under D_noisy(p_test, p_test).
inline PopulationCalibration population_confidence_accuracy(const LinearBinaryClassifier& clf,
                                                            const NoisyBinarySpec& spec) {
  std::vector<double> minus(spec.direction.size());
  std::transform(spec.direction.begin(), spec.direction.end(), minus.begin(), [](double c) { return -c; });
  PopulationCalibration out;
  out.conf_plus = clf.confidence(spec.direction);
  out.conf_minus = clf.confidence(minus);
  // At v the true label is 1 w.p. 1 - p_test; at -v it is 0 w.p. 1 - p_test.
  const double acc_plus = clf.decision(spec.direction) == 1 ? 1.0 - spec.p_test : spec.p_test;
  const double acc_minus = clf.decision(minus) == 0 ? 1.0 - spec.p_test : spec.p_test;
  out.accuracy = 0.5 * (acc_plus + acc_minus);
  return out;
}

/// Empirical accuracy of `clf` on labelled binary records.
inline double empirical_accuracy(const LinearBinaryClassifier& clf, const BinaryDataset& data) {
  if (data.size() == 0) throw Error(ErrorKind::empty_dataset, "accuracy of zero records");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) hits += clf.decision(data.row(i)) == data.y[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Norm-constrained logistic regression.

/// argmin over ||a|| <= R (b free) of the mean binary NLL, by projected gradient
/// descent from a = 0, b = 0. The descent runs on log(NLL): same minimizer, but
/// the gradient stays O(1) once the data are nearly separated and the loss is tiny.
inline LinearBinaryClassifier fit_constrained_logistic(const BinaryDataset& data, double radius,
                                                       double tolerance = 1e-13) {
  if (!(radius > 0.0)) throw Error(ErrorKind::config, "norm radius must be positive");
  if (data.size() == 0) throw Error(ErrorKind::empty_dataset, "cannot fit on zero records");
  const std::size_t d = data.dim;
  const std::size_t n = data.size();
  std::vector<double> sign(n);
  for (std::size_t i = 0; i < n; ++i) sign[i] = data.y[i] == 1 ? 1.0 : -1.0;
  std::vector<double> margin(n);

  auto margins = [&](std::span<const double> theta) {
    for (std::size_t i = 0; i < n; ++i) {
      double t = theta[d];
      auto xi = data.row(i);
      for (std::size_t j = 0; j < d; ++j) t += theta[j] * xi[j];
      margin[i] = sign[i] * t;
    }
  };
  // log(softplus(-m)), accurate for large margins where softplus(-m) ~ e^-m.
  auto log_loss = [](double m) {
    if (m > 30.0) return -m + std::log1p(-0.5 * std::exp(-m));
    return std::log(softplus(-m));
  };
  auto log_sum = [&](auto&& term) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, term(i));
    long double s = 0.0L;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(term(i) - peak);
    return peak + static_cast<double>(std::log(s));
  };

  GradientProblem problem;
  problem.objective = [&](std::span<const double> theta) {
    margins(theta);
    return log_sum([&](std::size_t i) { return log_loss(margin[i]); }) - std::log(static_cast<double>(n));
  };
  problem.gradient = [&](std::span<const double> theta, std::span<double> out) {
    margins(theta);
    const double lse = log_sum([&](std::size_t i) { return log_loss(margin[i]); });
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      // w_i * sigma(-m_i) / softplus(-m_i) with w_i the softmax weight of log_loss.
      const double coeff = -std::exp(-softplus(margin[i]) - lse) * sign[i];
      auto xi = data.row(i);
      for (std::size_t j = 0; j < d; ++j) out[j] += coeff * xi[j];
      out[d] += coeff;
    }
  };
  problem.project = [d, radius](std::span<double> theta) {
    double norm2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) norm2 += theta[j] * theta[j];
    const double norm = std::sqrt(norm2);
    if (norm > radius) {
      for (std::size_t j = 0; j < d; ++j) theta[j] *= radius / norm;
    }
  };
  problem.initial.assign(d + 1, 0.0);
  problem.settings.step = 0.5;
  problem.settings.step_growth = 2.0;
  problem.settings.max_iterations = 5000;
  problem.settings.min_improvement = tolerance;
  problem.settings.max_halvings = 60;

  const auto solved = projected_gd(problem);
  LinearBinaryClassifier clf;
  clf.weight.assign(solved.x.begin(), solved.x.begin() + static_cast<std::ptrdiff_t>(d));
  clf.intercept = solved.x[d];
  return clf;
}

// ---------------------------------------------------------------------------
// Three-atom sample-size construction in span{u, v} (d = 2).

struct Theorem1Spec {
  int n = 50;
  double epsilon = 0.01;

  void validate() const {
    if (n < 10) throw Error(ErrorKind::config, "sample budget n must be at least 10");
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw Error(ErrorKind::config, "epsilon must lie in (0, 1/2)");
  }
  /// Rarity parameter: the v' atom has probability 1/N with N = 20 n.
  double rarity() const { return 20.0 * n; }
  double radius() const { return 6.0 * std::log(50.0 * n + 1.0 / epsilon); }

  static std::vector<double> v() { return {1.0, 0.0}; }
  static std::vector<double> u() { return {0.0, 1.0}; }
  static std::vector<double> v_prime() { return {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)}; }

  /// Atoms in the order v, v', -v with deterministic labels 1, 0, 0.
  std::vector<double> atom_probabilities() const {
    return {0.5, 1.0 / rarity(), 0.5 - 1.0 / rarity()};
  }
  static std::vector<std::vector<double>> atoms() { return {v(), v_prime(), {-1.0, 0.0}}; }
  static constexpr int atom_label(int atom) { return atom == 0 ? 1 : 0; }
};

inline BinaryDataset sample_theorem1(const Theorem1Spec& spec, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto atoms = Theorem1Spec::atoms();
  const double p_rare = 1.0 / spec.rarity();
  BinaryDataset data;
  data.dim = 2;
  for (std::size_t i = 0; i < count; ++i) {
    const double r = unit(rng);
    const int atom = r < 0.5 ? 0 : (r < 0.5 + p_rare ? 1 : 2);
    data.x.insert(data.x.end(), atoms[static_cast<std::size_t>(atom)].begin(), atoms[static_cast<std::size_t>(atom)].end());
    data.y.push_back(Theorem1Spec::atom_label(atom));
    data.atom.push_back(atom);
  }
  return data;
}

struct Theorem1Trial {
  int trial = 0;
  int scenario = 1;  // 1: n records, 2: 30 n records
  std::size_t sample_size = 0;
  bool vprime_present = false;
  bool event_b = false;  // at least 1/3 of the records at v and at least 1/3 at -v
  double min_confidence = 0.0;
  double accuracy = 0.0;
  double weight_norm = 0.0;
  double cosine_with_v = 0.0;
  double intercept = 0.0;
};

/// Exact population accuracy and minimum confidence over the three atoms.
inline void score_theorem1(const Theorem1Spec& spec, const LinearBinaryClassifier& clf, Theorem1Trial& out) {
  const auto atoms = Theorem1Spec::atoms();
  const auto probs = spec.atom_probabilities();
  double error_mass = 0.0;
  out.min_confidence = 1.0;
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    out.min_confidence = std::min(out.min_confidence, clf.confidence(atoms[a]));
    if (clf.decision(atoms[a]) != Theorem1Spec::atom_label(static_cast<int>(a))) error_mass += probs[a];
  }
  out.accuracy = 1.0 - error_mass;
  out.weight_norm = clf.weight_norm();
  out.cosine_with_v = out.weight_norm > 0.0 ? clf.weight[0] / out.weight_norm : 0.0;
  out.intercept = clf.intercept;
}

inline Theorem1Trial run_theorem1_trial(const Theorem1Spec& spec, int trial, int scenario, std::uint64_t seed) {
  const std::size_t count = static_cast<std::size_t>(spec.n) * (scenario == 1 ? 1u : 30u);
  const auto data = sample_theorem1(spec, count, derive_seed(seed, 2 * static_cast<std::uint64_t>(trial) + (scenario - 1)));
  Theorem1Trial out;
  out.trial = trial;
  out.scenario = scenario;
  out.sample_size = count;
  std::size_t at_v = 0, at_minus_v = 0;
  for (int atom : data.atom) {
    out.vprime_present = out.vprime_present || atom == 1;
    at_v += atom == 0 ? 1 : 0;
    at_minus_v += atom == 2 ? 1 : 0;
  }
  out.event_b = 3 * at_v >= count && 3 * at_minus_v >= count;
  score_theorem1(spec, fit_constrained_logistic(data, spec.radius()), out);
  return out;
}

// ---------------------------------------------------------------------------
// Heterogeneous multiclass logits.

/// Per-class generator settings. `scales`, `noise` and `counts` have length K.
struct HeteroLogitSpec {
  int num_classes = 10;
  std::vector<double> scales;
  std::vector<double> noise;
  std::vector<std::size_t> counts;
  double margin = 2.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_classes < 2) throw Error(ErrorKind::config, "need at least 2 classes");
    const auto k = static_cast<std::size_t>(num_classes);
    if (scales.size() != k || noise.size() != k || counts.size() != k) {
      throw Error(ErrorKind::config, "per-class scales, noise and counts must have K entries");
    }
    for (double s : scales) {
      if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorKind::config, "logit scales must be positive");
    }
    for (double r : noise) {
      if (!(r >= 0.0 && r < 1.0)) throw Error(ErrorKind::config, "label-noise rates must lie in [0, 1)");
    }
    if (std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == 0) {
      throw Error(ErrorKind::config, "total record count must be positive");
    }
    if (!(margin >= 0.0) || !std::isfinite(margin)) throw Error(ErrorKind::config, "margin must be finite and >= 0");
  }
};

struct HeteroSample {
  LogitDataset data;
  std::vector<int> source_class;  // generating class before label noise
};

/// For each class k, counts[k] records: features x ~ N(margin e_k, I), base
/// logits z = margin x (the exact log-posterior of that Gaussian mixture), then
/// z is multiplied by scales[Ŷ] where Ŷ = argmax z, and the label is replaced by
/// a uniform class with probability noise[k].
inline HeteroSample gen_hetero_logits(const HeteroLogitSpec& spec) {
  spec.validate();
  const auto k = static_cast<std::size_t>(spec.num_classes);
  Rng rng(derive_seed(spec.seed, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> any_class(0, spec.num_classes - 1);

  const std::size_t total = std::accumulate(spec.counts.begin(), spec.counts.end(), std::size_t{0});
  std::vector<double> logits;
  std::vector<int> labels;
  HeteroSample out;
  logits.reserve(total * k);
  labels.reserve(total);
  out.source_class.reserve(total);
  std::vector<double> z(k);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t r = 0; r < spec.counts[c]; ++r) {
      for (std::size_t j = 0; j < k; ++j) z[j] = spec.margin * (gauss(rng) + (j == c ? spec.margin : 0.0));
      const double scale = spec.scales[static_cast<std::size_t>(predicted_class(z))];
      for (double& v : z) v *= scale;
      int label = static_cast<int>(c);
      if (unit(rng) < spec.noise[c]) label = any_class(rng);
      logits.insert(logits.end(), z.begin(), z.end());
      labels.push_back(label);
      out.source_class.push_back(static_cast<int>(c));
    }
  }
  out.data = LogitDataset(spec.num_classes, std::move(logits), std::move(labels));
  return out;
}

/// Uniform spec helper: K classes, `per_class` records each, same scale and noise.
inline HeteroLogitSpec uniform_hetero_spec(int num_classes, std::size_t per_class, double scale, double noise,
                                           double margin, std::uint64_t seed) {
  const auto k = static_cast<std::size_t>(num_classes);
  return HeteroLogitSpec{num_classes, std::vector<double>(k, scale), std::vector<double>(k, noise),
                         std::vector<std::size_t>(k, per_class), margin, seed};
}

}  // namespace calibkit
