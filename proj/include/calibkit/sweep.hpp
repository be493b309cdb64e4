#pragma once

// Generate -> fit -> evaluate sweeps over the heterogeneous logit generator.
//
// Axes:
//   noise  label-noise rate of the first K/2 classes
//   size   sampling rate applied to the counts of the first K/2 classes
//   gamma  CTS radius (TS rows are repeated at every point)
//   n_val  total validation size, spread evenly over classes; the test set
//          keeps the base counts
//
// Trial t uses the same seeds at every sweep point so that differences
// between points are not swamped by sampling noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <limits>
#include <string>
#include <vector>

#include "calibkit/calibrate.hpp"
#include "calibkit/metrics.hpp"
#include "calibkit/parallel.hpp"
#include "calibkit/synthetic.hpp"

namespace calibkit {

struct SweepConfig {
  std::string axis = "noise";
  std::vector<double> values;
  HeteroLogitSpec base;  // base.seed is ignored; `seed` drives every draw
  double cts_gamma = std::numeric_limits<double>::infinity();
  int trials = 1;
  int bins = BinningConfig::kDefaultBins;
  FitConfig fit;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: worker_limit()

  void validate() const {
    if (axis != "noise" && axis != "size" && axis != "gamma" && axis != "n_val") {
      throw Error(ErrorKind::config, "unknown sweep axis '" + axis + "'");
    }
    if (values.empty()) throw Error(ErrorKind::config, "sweep needs at least one axis value");
    if (trials < 1) throw Error(ErrorKind::config, "trials must be at least 1");
    base.validate();
    for (double v : values) {
      if (axis == "noise" && !(v >= 0.0 && v < 1.0)) throw Error(ErrorKind::config, "noise values must lie in [0, 1)");
      if (axis == "size" && !(v > 0.0 && std::isfinite(v))) throw Error(ErrorKind::config, "size rates must be positive");
      if (axis == "gamma" && !(v >= 0.0)) throw Error(ErrorKind::config, "gamma values must be >= 0");
      if (axis == "n_val" && !(v >= 1.0 && std::isfinite(v))) throw Error(ErrorKind::config, "n_val values must be >= 1");
    }
  }
};

struct SweepRow {
  double axis_value = 0.0;
  std::string method;
  double ece = 0.0;
  double max_ece = 0.0;
  double avg_ece = 0.0;
  double nll = 0.0;  // test NLL
  double accuracy = 0.0;
  double val_nll_gap = 0.0;  // |validation NLL - test NLL| of the fitted model
};

namespace detail {

inline HeteroLogitSpec sweep_spec(const SweepConfig& cfg, double value, bool validation) {
  HeteroLogitSpec spec = cfg.base;
  const auto k = static_cast<std::size_t>(spec.num_classes);
  const std::size_t half = k / 2;
  if (cfg.axis == "noise") {
    for (std::size_t c = 0; c < half; ++c) spec.noise[c] = value;
  } else if (cfg.axis == "size") {
    for (std::size_t c = 0; c < half; ++c) {
      spec.counts[c] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.base.counts[c] * value)));
    }
  } else if (cfg.axis == "n_val" && validation) {
    const auto total = static_cast<std::size_t>(std::llround(value));
    for (std::size_t c = 0; c < k; ++c) spec.counts[c] = total / k + (c < total % k ? 1 : 0);
  }
  return spec;
}

}  // namespace detail

/// Rows sorted by (axis_value, method), metrics averaged over trials.
inline std::vector<SweepRow> run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const std::size_t points = cfg.values.size();
  const auto trials = static_cast<std::size_t>(cfg.trials);
  const BinningConfig binning(cfg.bins);
  // slot layout: [point][trial][method 0 = cts, 1 = ts]
  std::vector<SweepRow> slots(points * trials * 2);

  parallel_for(
      points * trials,
      [&](std::size_t task) {
        const std::size_t p = task / trials;
        const std::size_t t = task % trials;
        const double value = cfg.values[p];
        const std::uint64_t trial_seed = derive_seed(cfg.seed, t);
        HeteroLogitSpec val_spec = detail::sweep_spec(cfg, value, true);
        HeteroLogitSpec test_spec = detail::sweep_spec(cfg, value, false);
        val_spec.seed = derive_seed(trial_seed, 0);
        test_spec.seed = derive_seed(trial_seed, 1);
        const auto val = gen_hetero_logits(val_spec).data;
        const auto test = gen_hetero_logits(test_spec).data;

        FitConfig cts_cfg = cfg.fit;
        cts_cfg.gamma = cfg.axis == "gamma" ? value : cfg.cts_gamma;
        const FitResult fits[2] = {fit_cts(val, cts_cfg), fit_ts(val, cfg.fit)};
        for (std::size_t m = 0; m < 2; ++m) {
          const auto report = evaluate(predict(test, fits[m].model), binning);
          SweepRow& row = slots[(p * trials + t) * 2 + m];
          row.axis_value = value;
          row.method = m == 0 ? "cts" : "ts";
          row.ece = report.ece;
          row.max_ece = report.max_ece;
          row.avg_ece = report.avg_ece;
          row.nll = report.nll;
          row.accuracy = report.accuracy;
          row.val_nll_gap = std::fabs(fits[m].validation_nll - report.nll);
        }
      },
      cfg.threads == 0 ? worker_limit() : cfg.threads);

  std::vector<SweepRow> rows;
  for (std::size_t p = 0; p < points; ++p) {
    for (std::size_t m = 0; m < 2; ++m) {
      SweepRow avg;
      avg.axis_value = cfg.values[p];
      avg.method = m == 0 ? "cts" : "ts";
      for (std::size_t t = 0; t < trials; ++t) {
        const SweepRow& r = slots[(p * trials + t) * 2 + m];
        avg.ece += r.ece;
        avg.max_ece += r.max_ece;
        avg.avg_ece += r.avg_ece;
        avg.nll += r.nll;
        avg.accuracy += r.accuracy;
        avg.val_nll_gap += r.val_nll_gap;
      }
      const double n = static_cast<double>(trials);
      avg.ece /= n;
      avg.max_ece /= n;
      avg.avg_ece /= n;
      avg.nll /= n;
      avg.accuracy /= n;
      avg.val_nll_gap /= n;
      rows.push_back(avg);
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.axis_value != b.axis_value) return a.axis_value < b.axis_value;
    return a.method < b.method;
  });
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "axis_value,method,ece,max_ece,avg_ece,nll,accuracy,val_nll_gap\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.9g,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.axis_value, r.method.c_str(), r.ece,
                  r.max_ece, r.avg_ece, r.nll, r.accuracy, r.val_nll_gap);
    out << buf;
  }
}

}  // namespace calibkit
