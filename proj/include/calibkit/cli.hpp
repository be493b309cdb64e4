#pragma once

// Command implementations behind the calibkit executable. Each returns a
// process exit code:
//   0 success
//   2 file/format/configuration errors (parse errors carry file:line)
//   3 class-count mismatch between files
//   4 optimization failure

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "calibkit/calibrate.hpp"
#include "calibkit/io.hpp"
#include "calibkit/metrics.hpp"
#include "calibkit/parallel.hpp"
#include "calibkit/serialize.hpp"
#include "calibkit/sweep.hpp"
#include "calibkit/synthetic.hpp"

namespace calibkit::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kClassMismatch = 3, kOptimizationFailure = 4 };

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::class_mismatch: return kClassMismatch;
    case ErrorKind::optimization: return kOptimizationFailure;
    default: return kInputError;
  }
}

/// Runs `body`, translating calibkit errors into exit codes and stderr messages.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "calibkit: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const json::exception& e) {
    err << "calibkit: " << e.what() << '\n';
    return kInputError;
  }
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::format, "cannot write '" + path + "'");
  out << content;
  if (!out) throw Error(ErrorKind::format, "failed writing '" + path + "'");
}

/// Parses a non-negative radius; "inf" selects the unconstrained limit.
inline double parse_gamma(const std::string& text) {
  if (text == "inf" || text == "infinity") return std::numeric_limits<double>::infinity();
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !(value >= 0.0)) {
    throw Error(ErrorKind::config, "gamma must be a non-negative number or 'inf', got '" + text + "'");
  }
  return value;
}

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateOptions {
  std::string val_file;
  std::string test_file;
  std::string method = "ts";
  double gamma = std::numeric_limits<double>::infinity();
  int bins = BinningConfig::kDefaultBins;
  double alpha_lo = 0.01;
  double alpha_hi = 100.0;
  std::size_t min_class_samples = 10;
  std::string report_path;
  std::string model_path;
  bool percent = false;
};

inline FitResult fit_method(const std::string& method, const LogitDataset& val, const FitConfig& cfg) {
  if (method == "none") {
    FitResult r;
    r.model = IdentityModel{};
    r.accuracy_before = r.accuracy_after = predict(val, IdentityModel{}).accuracy();
    r.validation_nll = nll(val, IdentityModel{});
    return r;
  }
  if (method == "ts") return fit_ts(val, cfg);
  if (method == "cts") return fit_cts(val, cfg);
  if (method == "vs") return fit_vs(val, cfg);
  throw Error(ErrorKind::config, "unknown method '" + method + "' (expected none, ts, cts or vs)");
}

/// Evaluation report comparing uncalibrated and calibrated test predictions.
inline json build_report(const std::string& method, const FitResult& fit, const LogitDataset& test,
                         const BinningConfig& binning, const json& config_echo) {
  const auto before_preds = predict(test, IdentityModel{});
  const auto after_preds = predict(test, fit.model);
  const auto before = evaluate(before_preds, binning);
  const auto after = evaluate(after_preds, binning);
  const auto delta = accuracy_delta(before_preds, after_preds);

  json report;
  report["method"] = method;
  report["model"] = model_to_json(fit.model, test.num_classes());
  report["bins"] = binning.num_bins();
  report["accuracy_before"] = before.accuracy;
  report["accuracy_after"] = after.accuracy;
  report["changed_records"] = delta.changed_records;
  report["ece_before"] = before.ece;
  report["ece_after"] = after.ece;
  report["max_ece_before"] = before.max_ece;
  report["max_ece_after"] = after.max_ece;
  report["avg_ece_before"] = before.avg_ece;
  report["avg_ece_after"] = after.avg_ece;
  report["nll_before"] = before.nll;
  report["nll_after"] = after.nll;
  report["validation_nll"] = fit.validation_nll;
  report["fit_iterations"] = fit.iterations;

  json per_class = json::array();
  for (std::size_t c = 0; c < after.per_class.size(); ++c) {
    const auto& a = after.per_class[c];
    per_class.push_back({{"class", a.cls},
                         {"count", a.count},
                         {"ece_before", optional_json(before.per_class[c].ece)},
                         {"ece_after", optional_json(a.ece)},
                         {"mean_confidence", optional_json(a.mean_confidence)},
                         {"accuracy", optional_json(a.accuracy)}});
  }
  report["per_class"] = per_class;

  json warnings = json::array();
  for (const auto& w : fit.warnings) warnings.push_back(w);
  for (const auto& w : after.warnings) warnings.push_back("test: " + w);
  report["warnings"] = warnings;
  report["config"] = config_echo;
  return report;
}

inline void print_summary(std::ostream& out, const json& report, bool percent) {
  const double scale = percent ? 100.0 : 1.0;
  const char* unit = percent ? " (%)" : "";
  char line[256];
  std::snprintf(line, sizeof(line), "%-8s %12s %12s %12s %12s %10s\n", "", (std::string("Acc.") + unit).c_str(),
                (std::string("ECE") + unit).c_str(), (std::string("max-ECE") + unit).c_str(),
                (std::string("Avg-ECE") + unit).c_str(), "NLL");
  out << line;
  for (const char* phase : {"before", "after"}) {
    auto get = [&](const std::string& key) { return report.at(key + "_" + phase).get<double>(); };
    std::snprintf(line, sizeof(line), "%-8s %12.4f %12.4f %12.4f %12.4f %10.5f\n", phase, scale * get("accuracy"),
                  scale * get("ece"), scale * get("max_ece"), scale * get("avg_ece"), get("nll"));
    out << line;
  }
}

inline int cmd_calibrate(const CalibrateOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto val = read_logit_csv(opt.val_file);
    const auto test = read_logit_csv(opt.test_file);
    if (val.num_classes() != test.num_classes()) {
      throw Error(ErrorKind::class_mismatch, "validation has K = " + std::to_string(val.num_classes()) +
                                                 " but test has K = " + std::to_string(test.num_classes()));
    }
    const BinningConfig binning(opt.bins);
    FitConfig cfg;
    cfg.alpha_lo = opt.alpha_lo;
    cfg.alpha_hi = opt.alpha_hi;
    cfg.gamma = opt.gamma;
    cfg.min_class_samples = opt.min_class_samples;
    const auto fit = fit_method(opt.method, val, cfg);

    json echo{{"val_file", opt.val_file},      {"test_file", opt.test_file},
              {"gamma", gamma_to_json(opt.gamma)}, {"alpha_lo", opt.alpha_lo},
              {"alpha_hi", opt.alpha_hi},      {"min_class_samples", opt.min_class_samples},
              {"bins", opt.bins}};
    const auto report = build_report(opt.method, fit, test, binning, echo);
    if (!opt.report_path.empty()) write_text_file(opt.report_path, report.dump(2) + "\n");
    if (!opt.model_path.empty()) {
      write_text_file(opt.model_path, model_to_json(fit.model, val.num_classes()).dump(2) + "\n");
    }
    print_summary(out, report, opt.percent);
    for (const auto& w : report["warnings"]) err << "warning: " << w.get<std::string>() << '\n';
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------------------
// reliability

struct ReliabilityOptions {
  std::string data_file;
  std::string model_file;  // empty: uncalibrated
  int bins = BinningConfig::kDefaultBins;
  std::string out_csv;     // empty: stdout
};

inline int cmd_reliability(const ReliabilityOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto data = read_logit_csv(opt.data_file);
    CalibrationModel model = IdentityModel{};
    if (!opt.model_file.empty()) {
      auto [loaded, k] = read_model_json(opt.model_file);
      if (k != data.num_classes()) {
        throw Error(ErrorKind::class_mismatch, "model has K = " + std::to_string(k) + " but data has K = " +
                                                   std::to_string(data.num_classes()));
      }
      model = std::move(loaded);
    }
    const auto rows = reliability_rows(bin_stats(predict(data, model), BinningConfig(opt.bins)));
    std::ostringstream csv;
    write_reliability_csv(csv, rows);
    if (opt.out_csv.empty()) {
      out << csv.str();
    } else {
      write_text_file(opt.out_csv, csv.str());
    }
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------------------
// synth

struct HeteroOptions {
  int classes = 10;
  std::vector<double> scales{1.0};
  std::vector<double> noise{0.0};
  std::vector<double> counts{1000.0};
  double margin = 2.0;
};

/// Expands a per-class list: length 1 broadcasts, length L dividing K repeats each entry K/L times.
inline std::vector<double> expand_per_class(const std::vector<double>& values, int classes, const std::string& what) {
  if (values.empty() || classes < 1 || classes % static_cast<int>(values.size()) != 0) {
    throw Error(ErrorKind::config, what + " needs 1 entry or a number of entries dividing K");
  }
  const std::size_t block = static_cast<std::size_t>(classes) / values.size();
  std::vector<double> out;
  for (double v : values) out.insert(out.end(), block, v);
  return out;
}

inline HeteroLogitSpec hetero_spec_from(const HeteroOptions& opt, std::uint64_t seed) {
  if (opt.classes < 2) throw Error(ErrorKind::config, "--classes must be at least 2");
  HeteroLogitSpec spec;
  spec.num_classes = opt.classes;
  spec.scales = expand_per_class(opt.scales, opt.classes, "--scales");
  spec.noise = expand_per_class(opt.noise, opt.classes, "--noise");
  for (double c : expand_per_class(opt.counts, opt.classes, "--counts")) {
    if (!(c >= 0.0) || c != std::floor(c)) throw Error(ErrorKind::config, "--counts must be non-negative integers");
    spec.counts.push_back(static_cast<std::size_t>(c));
  }
  spec.margin = opt.margin;
  spec.seed = seed;
  spec.validate();
  return spec;
}

inline json hetero_spec_json(const HeteroLogitSpec& spec) {
  return {{"num_classes", spec.num_classes}, {"scales", spec.scales}, {"noise", spec.noise},
          {"counts", spec.counts},           {"margin", spec.margin}};
}

struct SynthOptions {
  std::string kind;
  std::optional<std::uint64_t> seed;
  std::string out;
  // dnoisy
  std::size_t n = 1000;
  double p_plus = 0.0;
  double p_minus = 0.0;
  int dim = 1;
  // theorem1 (n shared with dnoisy)
  double epsilon = 0.01;
  int trials = 200;
  HeteroOptions hetero;
};

inline std::string theorem1_csv(const std::vector<Theorem1Trial>& trials) {
  std::string out = "trial,scenario,sample_size,vprime_present,event_b,min_confidence,accuracy,weight_norm,cosine_with_v,intercept\n";
  char line[320];
  for (const auto& t : trials) {
    std::snprintf(line, sizeof(line), "%d,%d,%zu,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", t.trial, t.scenario,
                  t.sample_size, t.vprime_present ? 1 : 0, t.event_b ? 1 : 0, t.min_confidence, t.accuracy,
                  t.weight_norm, t.cosine_with_v, t.intercept);
    out += line;
  }
  return out;
}

/// Runs every trial of the sample-size construction; trial t uses streams derived from (seed, t).
inline std::vector<Theorem1Trial> theorem1_experiment(int n, double epsilon, int trials, std::uint64_t seed) {
  const Theorem1Spec spec{n, epsilon};
  spec.validate();
  if (trials < 1) throw Error(ErrorKind::config, "trials must be at least 1");
  std::vector<Theorem1Trial> out(2 * static_cast<std::size_t>(trials));
  parallel_for(out.size(), [&](std::size_t i) {
    out[i] = run_theorem1_trial(spec, static_cast<int>(i / 2), static_cast<int>(i % 2) + 1, seed);
  });
  return out;
}

inline int cmd_synth(const SynthOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!opt.seed) throw Error(ErrorKind::config, "--seed is required");
    if (opt.out.empty()) throw Error(ErrorKind::config, "--out is required");
    const std::uint64_t seed = *opt.seed;
    std::ostringstream data;
    json sidecar{{"kind", opt.kind}, {"seed", seed}};
    if (opt.kind == "dnoisy") {
      if (opt.n < 1) throw Error(ErrorKind::config, "--n must be at least 1");
      if (opt.dim < 1) throw Error(ErrorKind::config, "--dim must be at least 1");
      NoisyBinarySpec spec;
      spec.p_plus = opt.p_plus;
      spec.p_minus = opt.p_minus;
      spec.direction.assign(static_cast<std::size_t>(opt.dim), 0.0);
      spec.direction[0] = 1.0;
      write_binary_csv(data, sample_dnoisy(spec, opt.n, seed));
      sidecar["spec"] = {{"n", opt.n}, {"p_plus", opt.p_plus}, {"p_minus", opt.p_minus}, {"direction", spec.direction}};
    } else if (opt.kind == "theorem1") {
      const auto trials = theorem1_experiment(static_cast<int>(opt.n), opt.epsilon, opt.trials, seed);
      data << theorem1_csv(trials);
      const Theorem1Spec spec{static_cast<int>(opt.n), opt.epsilon};
      sidecar["spec"] = {{"n", opt.n}, {"epsilon", opt.epsilon}, {"trials", opt.trials},
                         {"radius", spec.radius()}, {"rarity", spec.rarity()}};
    } else if (opt.kind == "hetero") {
      const auto spec = hetero_spec_from(opt.hetero, seed);
      const auto sample = gen_hetero_logits(spec);
      write_logit_csv(data, sample.data);
      sidecar["spec"] = hetero_spec_json(spec);
    } else {
      throw Error(ErrorKind::config, "unknown synth kind '" + opt.kind + "' (expected dnoisy, theorem1 or hetero)");
    }
    write_text_file(opt.out, data.str());
    write_text_file(opt.out + ".json", sidecar.dump(2) + "\n");
    out << "wrote " << opt.out << " and " << opt.out << ".json\n";
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOptions {
  std::string axis;
  std::vector<double> values;
  std::optional<std::uint64_t> seed;
  std::string out;  // empty: stdout
  HeteroOptions hetero;
  double gamma = std::numeric_limits<double>::infinity();
  std::optional<int> trials;  // default 30 for n_val, else 1
  int bins = BinningConfig::kDefaultBins;
};

inline int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!opt.seed) throw Error(ErrorKind::config, "--seed is required");
    SweepConfig cfg;
    cfg.axis = opt.axis;
    cfg.values = opt.values;
    cfg.base = hetero_spec_from(opt.hetero, *opt.seed);
    cfg.cts_gamma = opt.gamma;
    cfg.trials = opt.trials.value_or(opt.axis == "n_val" ? 30 : 1);
    cfg.bins = opt.bins;
    cfg.seed = *opt.seed;
    std::ostringstream csv;
    write_sweep_csv(csv, run_sweep(cfg));
    if (opt.out.empty()) {
      out << csv.str();
    } else {
      write_text_file(opt.out, csv.str());
    }
    return static_cast<int>(kOk);
  });
}

}  // namespace calibkit::cli
