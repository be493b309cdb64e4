#pragma once

// Domain types shared across calibkit: logit datasets, softmax mechanics,
// prediction sets and the class-wise split by predicted label.
//
// Classes are 0-based everywhere (files included).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "calibkit/error.hpp"

namespace calibkit {

namespace detail {

inline void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::invalid_input, std::string(what) + " contains NaN/Inf");
  }
}

// log(sum(exp(z - max))) accumulated in long double.
inline long double log_sum_exp_shifted(std::span<const double> z, double max_value) {
  long double sum = 0.0L;
  for (double v : z) sum += std::exp(v - max_value);
  return std::log(sum);
}

}  // namespace detail

/// Numerically stable softmax. Invariant to adding a constant to every entry.
inline std::vector<double> softmax(std::span<const double> logits) {
  detail::require_finite(logits, "logit vector");
  if (logits.empty()) return {};
  const double max_value = *std::max_element(logits.begin(), logits.end());
  std::vector<long double> shifted(logits.size());
  long double sum = 0.0L;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    shifted[k] = std::exp(static_cast<long double>(logits[k]) - max_value);
    sum += shifted[k];
  }
  std::vector<double> probs(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) probs[k] = static_cast<double>(shifted[k] / sum);
  return probs;
}

/// log(softmax(z)) computed without ever forming the probabilities.
inline std::vector<double> log_softmax(std::span<const double> logits) {
  detail::require_finite(logits, "logit vector");
  if (logits.empty()) return {};
  const double max_value = *std::max_element(logits.begin(), logits.end());
  const long double lse = detail::log_sum_exp_shifted(logits, max_value);
  std::vector<double> out(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = static_cast<double>(static_cast<long double>(logits[k]) - max_value - lse);
  }
  return out;
}

/// Index of the largest entry; ties go to the lowest index.
inline int argmax_tiebreak(std::span<const double> values) {
  int best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  }
  return best;
}

/// N records of (K logits, true label). Immutable after construction.
class LogitDataset {
 public:
  LogitDataset() = default;

  /// `logits` is row-major, N x K.
  LogitDataset(int num_classes, std::vector<double> logits, std::vector<int> labels)
      : num_classes_(num_classes), logits_(std::move(logits)), labels_(std::move(labels)) {
    if (num_classes_ < 2) throw Error(ErrorKind::config, "datasets need at least 2 classes");
    const auto k = static_cast<std::size_t>(num_classes_);
    if (logits_.size() != labels_.size() * k) {
      throw Error(ErrorKind::config, "logit buffer size does not match N x K");
    }
    detail::require_finite(logits_, "dataset");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] < 0 || labels_[i] >= num_classes_) {
        throw Error(ErrorKind::invalid_input, "label " + std::to_string(labels_[i]) + " of record " +
                                                  std::to_string(i) + " outside [0, K)");
      }
    }
  }

  static LogitDataset from_rows(int num_classes, const std::vector<std::vector<double>>& rows,
                                std::vector<int> labels) {
    std::vector<double> flat;
    flat.reserve(rows.size() * static_cast<std::size_t>(std::max(num_classes, 0)));
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != num_classes) {
        throw Error(ErrorKind::config, "row width does not match K");
      }
      flat.insert(flat.end(), row.begin(), row.end());
    }
    return LogitDataset(num_classes, std::move(flat), std::move(labels));
  }

  int num_classes() const noexcept { return num_classes_; }
  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }

  std::span<const double> logits(std::size_t i) const {
    const auto k = static_cast<std::size_t>(num_classes_);
    return std::span<const double>(logits_).subspan(i * k, k);
  }
  int label(std::size_t i) const { return labels_[i]; }

  std::span<const double> all_logits() const noexcept { return logits_; }
  std::span<const int> labels() const noexcept { return labels_; }

  /// Same labels, logits multiplied by `factor`.
  LogitDataset scaled(double factor) const {
    std::vector<double> z = logits_;
    for (double& v : z) v *= factor;
    return LogitDataset(num_classes_, std::move(z), labels_);
  }

  /// Records at the given indices, in the given order.
  LogitDataset subset(std::span<const std::size_t> indices) const {
    const auto k = static_cast<std::size_t>(num_classes_);
    std::vector<double> z;
    std::vector<int> y;
    z.reserve(indices.size() * k);
    y.reserve(indices.size());
    for (std::size_t i : indices) {
      auto row = logits(i);
      z.insert(z.end(), row.begin(), row.end());
      y.push_back(labels_[i]);
    }
    return LogitDataset(num_classes_, std::move(z), std::move(y));
  }

 private:
  int num_classes_ = 2;
  std::vector<double> logits_;
  std::vector<int> labels_;
};

/// Uncalibrated prediction Ŷ for a logit vector: argmax of softmax(z).
inline int predicted_class(std::span<const double> logits) { return argmax_tiebreak(softmax(logits)); }

/// Per-record probabilities, log-probabilities, prediction and confidence.
class PredictionSet {
 public:
  PredictionSet() = default;

  /// `probs` and `log_probs` are row-major N x K.
  PredictionSet(int num_classes, std::vector<double> probs, std::vector<double> log_probs, std::vector<int> labels)
      : num_classes_(num_classes),
        probs_(std::move(probs)),
        log_probs_(std::move(log_probs)),
        labels_(std::move(labels)) {
    const auto k = static_cast<std::size_t>(num_classes_);
    if (num_classes_ < 1 || probs_.size() != labels_.size() * k || log_probs_.size() != probs_.size()) {
      throw Error(ErrorKind::config, "prediction buffers do not match N x K");
    }
    predicted_.resize(labels_.size());
    confidence_.resize(labels_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      auto p = this->probs(i);
      long double total = 0.0L;
      for (double v : p) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw Error(ErrorKind::invalid_input, "probability outside [0, 1]");
        total += v;
      }
      if (std::fabs(static_cast<double>(total) - 1.0) > 1e-9) {
        throw Error(ErrorKind::invalid_input, "probabilities of record " + std::to_string(i) + " do not sum to 1");
      }
      if (labels_[i] < 0 || labels_[i] >= num_classes_) throw Error(ErrorKind::invalid_input, "label outside [0, K)");
      predicted_[i] = argmax_tiebreak(p);
      confidence_[i] = p[static_cast<std::size_t>(predicted_[i])];
    }
  }

  /// Builds a set from probabilities alone; log-probabilities are floored at e^-700.
  static PredictionSet from_probabilities(int num_classes, std::vector<double> probs, std::vector<int> labels) {
    std::vector<double> logp(probs.size());
    for (std::size_t j = 0; j < probs.size(); ++j) {
      logp[j] = probs[j] > 0.0 ? std::max(std::log(probs[j]), -700.0) : -700.0;
    }
    return PredictionSet(num_classes, std::move(probs), std::move(logp), std::move(labels));
  }

  int num_classes() const noexcept { return num_classes_; }
  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }

  std::span<const double> probs(std::size_t i) const {
    const auto k = static_cast<std::size_t>(num_classes_);
    return std::span<const double>(probs_).subspan(i * k, k);
  }
  std::span<const double> log_probs(std::size_t i) const {
    const auto k = static_cast<std::size_t>(num_classes_);
    return std::span<const double>(log_probs_).subspan(i * k, k);
  }
  int label(std::size_t i) const { return labels_[i]; }
  int predicted(std::size_t i) const { return predicted_[i]; }
  double confidence(std::size_t i) const { return confidence_[i]; }
  bool correct(std::size_t i) const { return predicted_[i] == labels_[i]; }

  double accuracy() const {
    if (empty()) throw Error(ErrorKind::empty_dataset, "accuracy of an empty prediction set");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < size(); ++i) hits += correct(i) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(size());
  }

  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;

 private:
  int num_classes_ = 0;
  std::vector<double> probs_;
  std::vector<double> log_probs_;
  std::vector<int> labels_;
  std::vector<int> predicted_;
  std::vector<double> confidence_;
};

/// Records whose predicted label is `cls`.
struct ClassSlice {
  int cls = 0;
  std::vector<std::size_t> indices;
};

inline std::vector<ClassSlice> split_by_predicted(std::span<const int> predicted, int num_classes) {
  std::vector<ClassSlice> slices(static_cast<std::size_t>(num_classes));
  for (int k = 0; k < num_classes; ++k) slices[static_cast<std::size_t>(k)].cls = k;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int k = predicted[i];
    if (k < 0 || k >= num_classes) throw Error(ErrorKind::invalid_input, "predicted label outside [0, K)");
    slices[static_cast<std::size_t>(k)].indices.push_back(i);
  }
  return slices;
}

inline std::vector<ClassSlice> split_by_predicted(const PredictionSet& preds) {
  std::vector<int> predicted(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) predicted[i] = preds.predicted(i);
  return split_by_predicted(predicted, preds.num_classes());
}

/// Uncalibrated predictions for every record of a dataset.
inline std::vector<int> predicted_classes(const LogitDataset& data) {
  std::vector<int> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = predicted_class(data.logits(i));
  return out;
}

}  // namespace calibkit
