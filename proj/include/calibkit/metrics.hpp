#pragma once

// Binned calibration metrics: ECE, per-class ECE, max-ECE, Avg-ECE, NLL and
// reliability-diagram rows.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "calibkit/core.hpp"
#include "calibkit/model.hpp"

namespace calibkit {

/// M equal-width bins: [0, 1/M], (1/M, 2/M], ..., ((M-1)/M, 1].
class BinningConfig {
 public:
  static constexpr int kDefaultBins = 15;

  explicit BinningConfig(int num_bins = kDefaultBins) : num_bins_(num_bins) {
    if (num_bins_ < 1) throw Error(ErrorKind::config, "number of bins must be at least 1");
  }

  int num_bins() const noexcept { return num_bins_; }
  double lower(int bin) const { return static_cast<double>(bin) / num_bins_; }
  double upper(int bin) const { return static_cast<double>(bin + 1) / num_bins_; }

  /// 0-based bin holding `confidence`; right-closed edges, 0 lands in bin 0.
  int bin_of(double confidence) const {
    int bin = static_cast<int>(std::ceil(confidence * num_bins_)) - 1;
    bin = std::clamp(bin, 0, num_bins_ - 1);
    // ceil(c * M) can be off by one near an edge; settle against the stored edges.
    while (bin > 0 && confidence <= lower(bin)) --bin;
    while (bin < num_bins_ - 1 && confidence > upper(bin)) ++bin;
    return bin;
  }

 private:
  int num_bins_;
};

struct BinStat {
  std::size_t count = 0;
  double mean_confidence = 0.0;  // 0 when count == 0
  double mean_accuracy = 0.0;    // 0 when count == 0
};

struct BinnedStats {
  BinningConfig binning;
  std::vector<BinStat> bins;
  std::size_t total = 0;
};

namespace detail {

template <typename IndexRange>
BinnedStats bin_records(const PredictionSet& preds, const BinningConfig& binning, const IndexRange& indices) {
  const auto m = static_cast<std::size_t>(binning.num_bins());
  std::vector<long double> conf_sum(m, 0.0L);
  std::vector<std::size_t> hits(m, 0);
  BinnedStats stats{binning, std::vector<BinStat>(m), 0};
  for (std::size_t i : indices) {
    const double c = preds.confidence(i);
    const auto b = static_cast<std::size_t>(binning.bin_of(c));
    ++stats.bins[b].count;
    conf_sum[b] += c;
    hits[b] += preds.correct(i) ? 1 : 0;
    ++stats.total;
  }
  for (std::size_t b = 0; b < m; ++b) {
    if (stats.bins[b].count == 0) continue;
    const auto n = static_cast<long double>(stats.bins[b].count);
    stats.bins[b].mean_confidence = static_cast<double>(conf_sum[b] / n);
    stats.bins[b].mean_accuracy = static_cast<double>(static_cast<long double>(hits[b]) / n);
  }
  return stats;
}

struct AllIndices {
  std::size_t n;
  struct iterator {
    std::size_t i;
    std::size_t operator*() const { return i; }
    iterator& operator++() { ++i; return *this; }
    bool operator!=(const iterator& o) const { return i != o.i; }
  };
  iterator begin() const { return {0}; }
  iterator end() const { return {n}; }
};

}  // namespace detail

inline BinnedStats bin_stats(const PredictionSet& preds, const BinningConfig& binning = BinningConfig()) {
  return detail::bin_records(preds, binning, detail::AllIndices{preds.size()});
}

inline BinnedStats bin_stats(const PredictionSet& preds, std::span<const std::size_t> indices,
                             const BinningConfig& binning = BinningConfig()) {
  return detail::bin_records(preds, binning, indices);
}

/// Sum over bins of (n_i / N) |accuracy_i - confidence_i|.
inline double ece(const BinnedStats& stats) {
  if (stats.total == 0) throw Error(ErrorKind::empty_dataset, "ECE of zero records");
  long double total = 0.0L;
  for (const auto& bin : stats.bins) {
    if (bin.count == 0) continue;
    total += static_cast<long double>(bin.count) * std::fabs(static_cast<long double>(bin.mean_accuracy) - bin.mean_confidence);
  }
  return static_cast<double>(total / static_cast<long double>(stats.total));
}

/// ECE restricted to each slice. Empty slices yield std::nullopt.
inline std::vector<std::optional<double>> class_ece(const PredictionSet& preds, std::span<const ClassSlice> slices,
                                                    const BinningConfig& binning = BinningConfig()) {
  std::vector<std::optional<double>> out;
  out.reserve(slices.size());
  for (const auto& slice : slices) {
    if (slice.indices.empty()) {
      out.emplace_back(std::nullopt);
    } else {
      out.emplace_back(ece(bin_stats(preds, slice.indices, binning)));
    }
  }
  return out;
}

/// Worst class ECE over classes with at least one predicted record.
inline double max_ece(std::span<const std::optional<double>> class_eces) {
  std::optional<double> best;
  for (const auto& e : class_eces) {
    if (e && (!best || *e > *best)) best = *e;
  }
  if (!best) throw Error(ErrorKind::empty_dataset, "max-ECE needs at least one predicted class");
  return *best;
}

/// Unweighted mean of class ECEs over classes with at least one predicted record.
inline double avg_ece(std::span<const std::optional<double>> class_eces) {
  long double sum = 0.0L;
  std::size_t present = 0;
  for (const auto& e : class_eces) {
    if (!e) continue;
    sum += *e;
    ++present;
  }
  if (present == 0) throw Error(ErrorKind::empty_dataset, "Avg-ECE needs at least one predicted class");
  return static_cast<double>(sum / static_cast<long double>(present));
}

/// Mean negative log-probability of the true label.
inline double nll(const PredictionSet& preds) {
  if (preds.empty()) throw Error(ErrorKind::empty_dataset, "NLL of zero records");
  long double sum = 0.0L;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    sum -= std::max(preds.log_probs(i)[static_cast<std::size_t>(preds.label(i))], -700.0);
  }
  return static_cast<double>(sum / static_cast<long double>(preds.size()));
}

inline double nll(const LogitDataset& data, const CalibrationModel& model) { return nll(predict(data, model)); }

struct ReliabilityRow {
  double bin_low = 0.0;
  double bin_high = 0.0;
  std::size_t count = 0;
  std::optional<double> mean_confidence;
  std::optional<double> mean_accuracy;
};

inline std::vector<ReliabilityRow> reliability_rows(const BinnedStats& stats) {
  std::vector<ReliabilityRow> rows;
  rows.reserve(stats.bins.size());
  for (int b = 0; b < stats.binning.num_bins(); ++b) {
    const auto& bin = stats.bins[static_cast<std::size_t>(b)];
    ReliabilityRow row{stats.binning.lower(b), stats.binning.upper(b), bin.count, std::nullopt, std::nullopt};
    if (bin.count > 0) {
      row.mean_confidence = bin.mean_confidence;
      row.mean_accuracy = bin.mean_accuracy;
    }
    rows.push_back(row);
  }
  return rows;
}

struct ClassMetrics {
  int cls = 0;
  std::size_t count = 0;  // records predicted as cls
  std::optional<double> ece;
  std::optional<double> accuracy;
  std::optional<double> mean_confidence;
};

struct MetricsReport {
  double accuracy = 0.0;
  double ece = 0.0;
  double max_ece = 0.0;
  double avg_ece = 0.0;
  double nll = 0.0;
  std::vector<ClassMetrics> per_class;
  BinnedStats bins;
  std::vector<std::string> warnings;
};

inline MetricsReport evaluate(const PredictionSet& preds, const BinningConfig& binning = BinningConfig()) {
  if (preds.empty()) throw Error(ErrorKind::empty_dataset, "evaluation of zero records");
  MetricsReport report;
  report.accuracy = preds.accuracy();
  report.bins = bin_stats(preds, binning);
  report.ece = ece(report.bins);
  report.nll = nll(preds);

  const auto slices = split_by_predicted(preds);
  const auto eces = class_ece(preds, slices, binning);
  report.max_ece = max_ece(eces);
  report.avg_ece = avg_ece(eces);
  for (const auto& slice : slices) {
    ClassMetrics cm;
    cm.cls = slice.cls;
    cm.count = slice.indices.size();
    cm.ece = eces[static_cast<std::size_t>(slice.cls)];
    if (!slice.indices.empty()) {
      long double conf = 0.0L;
      std::size_t hits = 0;
      for (std::size_t i : slice.indices) {
        conf += preds.confidence(i);
        hits += preds.correct(i) ? 1 : 0;
      }
      const auto n = static_cast<long double>(slice.indices.size());
      cm.mean_confidence = static_cast<double>(conf / n);
      cm.accuracy = static_cast<double>(static_cast<long double>(hits) / n);
    } else {
      report.warnings.push_back("class " + std::to_string(slice.cls) + " is never predicted");
    }
    report.per_class.push_back(cm);
  }
  return report;
}

}  // namespace calibkit
