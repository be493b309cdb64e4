#include <charconv>
#include <cstdint>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "calibkit/cli.hpp"

namespace {

using namespace calibkit;

double parse_axis_value(const std::string& text) {
  if (text == "inf" || text == "infinity") return std::numeric_limits<double>::infinity();
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::config, "cannot parse sweep value '" + text + "'");
  }
  return value;
}

void add_hetero_flags(CLI::App* cmd, cli::HeteroOptions& h) {
  cmd->add_option("--classes", h.classes, "number of classes K")->capture_default_str();
  cmd->add_option("--scales", h.scales, "per-class logit scales (1, K, or a divisor of K entries)")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--noise", h.noise, "per-class label-noise rates")->delimiter(',')->capture_default_str();
  cmd->add_option("--counts", h.counts, "per-class record counts")->delimiter(',')->capture_default_str();
  cmd->add_option("--margin", h.margin, "mean separation of the generating class")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Post-hoc calibration of classifier logits"};
  app.require_subcommand(1);

  cli::CalibrateOptions cal;
  std::string cal_gamma = "inf";
  auto* calibrate = app.add_subcommand("calibrate", "fit a calibrator on validation logits, evaluate on test logits");
  calibrate->add_option("--val", cal.val_file, "validation logit CSV")->required();
  calibrate->add_option("--test", cal.test_file, "test logit CSV")->required();
  calibrate->add_option("--method", cal.method, "none | ts | cts | vs")->capture_default_str();
  calibrate->add_option("--gamma", cal_gamma, "CTS radius, a number or 'inf'")->capture_default_str();
  calibrate->add_option("--bins", cal.bins, "number of ECE bins")->capture_default_str();
  calibrate->add_option("--alpha-lo", cal.alpha_lo, "lower bound on inverse temperatures")->capture_default_str();
  calibrate->add_option("--alpha-hi", cal.alpha_hi, "upper bound on inverse temperatures")->capture_default_str();
  calibrate->add_option("--min-class-samples", cal.min_class_samples,
                        "CTS classes with fewer validation records use the global temperature")
      ->capture_default_str();
  calibrate->add_option("--report", cal.report_path, "evaluation report JSON path");
  calibrate->add_option("--model", cal.model_path, "fitted model JSON path");
  calibrate->add_flag("--percent", cal.percent, "print percentages instead of fractions");

  cli::ReliabilityOptions rel;
  auto* reliability = app.add_subcommand("reliability", "export reliability-diagram bins as CSV");
  reliability->add_option("--data", rel.data_file, "logit CSV")->required();
  reliability->add_option("--model", rel.model_file, "model JSON applied before binning");
  reliability->add_option("--bins", rel.bins, "number of bins")->capture_default_str();
  reliability->add_option("--out", rel.out_csv, "output CSV (stdout when omitted)");

  cli::SynthOptions syn;
  std::uint64_t syn_seed = 0;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset or trial table");
  synth->add_option("--kind", syn.kind, "dnoisy | theorem1 | hetero")->required();
  auto* syn_seed_opt = synth->add_option("--seed", syn_seed, "random seed (required)");
  synth->add_option("--out", syn.out, "output CSV; a JSON sidecar is written next to it")->required();
  synth->add_option("--n", syn.n, "dnoisy: record count; theorem1: sample budget n")->capture_default_str();
  synth->add_option("--p-plus", syn.p_plus, "dnoisy: P(Y=0 | X=v)")->capture_default_str();
  synth->add_option("--p-minus", syn.p_minus, "dnoisy: P(Y=1 | X=-v)")->capture_default_str();
  synth->add_option("--dim", syn.dim, "dnoisy: feature dimension")->capture_default_str();
  synth->add_option("--epsilon", syn.epsilon, "theorem1: confidence slack")->capture_default_str();
  synth->add_option("--trials", syn.trials, "theorem1: number of trials")->capture_default_str();
  add_hetero_flags(synth, syn.hetero);

  cli::SweepOptions swp;
  std::uint64_t swp_seed = 0;
  std::string swp_gamma = "inf";
  std::vector<std::string> swp_values;
  int swp_trials = 0;
  auto* sweep = app.add_subcommand("sweep", "generate, fit and evaluate TS and CTS across a parameter axis");
  sweep->add_option("--axis", swp.axis, "noise | size | gamma | n_val")->required();
  sweep->add_option("--values", swp_values, "comma-separated axis values ('inf' allowed)")->delimiter(',')->required();
  auto* swp_seed_opt = sweep->add_option("--seed", swp_seed, "random seed (required)");
  sweep->add_option("--out", swp.out, "output CSV (stdout when omitted)");
  sweep->add_option("--gamma", swp_gamma, "CTS radius when not sweeping gamma")->capture_default_str();
  auto* swp_trials_opt = sweep->add_option("--trials", swp_trials, "trials per point (default 30 for n_val, else 1)");
  sweep->add_option("--bins", swp.bins, "number of ECE bins")->capture_default_str();
  add_hetero_flags(sweep, swp.hetero);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kInputError;
  }

  if (*calibrate) {
    return cli::guarded(std::cerr, [&] {
      cal.gamma = cli::parse_gamma(cal_gamma);
      return cli::cmd_calibrate(cal, std::cout, std::cerr);
    });
  }
  if (*reliability) return cli::cmd_reliability(rel, std::cout, std::cerr);
  if (*synth) {
    if (syn_seed_opt->count() > 0) syn.seed = syn_seed;
    return cli::cmd_synth(syn, std::cout, std::cerr);
  }
  return cli::guarded(std::cerr, [&] {
    if (swp_seed_opt->count() > 0) swp.seed = swp_seed;
    if (swp_trials_opt->count() > 0) swp.trials = swp_trials;
    swp.gamma = cli::parse_gamma(swp_gamma);
    for (const auto& v : swp_values) swp.values.push_back(parse_axis_value(v));
    return cli::cmd_sweep(swp, std::cout, std::cerr);
  });
}
