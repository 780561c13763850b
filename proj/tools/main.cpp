#include <CLI11.hpp>

#include <cstdio>
#include <optional>

#include "commands.hpp"

namespace {

using namespace dsar;
using namespace dsar::cli;

struct Overrides {
  std::optional<std::string> out;
  std::optional<int> seed;
  std::optional<double> lambda;
  std::optional<int> reps;
  std::optional<int> workers;
  std::optional<int> dac;
  std::optional<int> breaks_grid;
  std::vector<double> breaks_list;
  std::optional<int> threshold_quantiles;
  std::vector<double> threshold_list;
  bool infer = false;
  bool infer_hist = false;
};

void apply_candidate_overrides(CandidateConfig& candidates, const Overrides& o) {
  if (o.breaks_grid) {
    candidates.kind = CandidateKind::TimeBreak;
    candidates.grid_delta = *o.breaks_grid;
    candidates.list.clear();
  }
  if (!o.breaks_list.empty()) {
    candidates.kind = CandidateKind::TimeBreak;
    candidates.list = o.breaks_list;
  }
  if (o.threshold_quantiles) {
    candidates.kind = CandidateKind::Threshold;
    candidates.quantiles = *o.threshold_quantiles;
    candidates.list.clear();
  }
  if (!o.threshold_list.empty()) {
    candidates.kind = CandidateKind::Threshold;
    candidates.list = o.threshold_list;
  }
  if (o.dac) {
    DacOptions dac = candidates.dac.value_or(DacOptions{});
    dac.subset_size = *o.dac;
    candidates.dac = dac;
  }
}

int run(const std::string& command, const std::string& config_path, const Overrides& o) {
  json root = load_json(config_path);
  if (command == "fit") {
    FitConfig config = parse_fit_config(root);
    if (o.out) config.out = *o.out;
    if (o.seed) config.seed = static_cast<std::uint64_t>(*o.seed);
    if (o.lambda) config.model.lambda_grid = {*o.lambda};
    if (o.infer) config.infer = true;
    cmd_fit(config);
  } else if (command == "detect") {
    DetectConfig config = parse_detect_config(root);
    if (o.out) config.out = *o.out;
    if (o.seed) config.seed = static_cast<std::uint64_t>(*o.seed);
    if (o.lambda) config.model.lambda_grid = {*o.lambda};
    apply_candidate_overrides(config.candidates, o);
    cmd_detect(config);
  } else if (command == "simulate") {
    SimulateConfig config = parse_simulate_config(root);
    if (o.out) config.out = *o.out;
    if (o.seed) config.dgp.seed = static_cast<std::uint64_t>(*o.seed);
    cmd_simulate(config);
  } else {
    ReplicateConfig config = parse_replicate_config(root);
    if (o.out) config.out = *o.out;
    if (o.seed) config.dgp.seed = static_cast<std::uint64_t>(*o.seed);
    if (o.lambda) config.model.lambda_grid = {*o.lambda};
    if (o.reps) config.reps = *o.reps;
    if (o.workers) config.workers = *o.workers;
    if (o.infer_hist) config.infer_hist = true;
    apply_candidate_overrides(config.candidates, o);
    cmd_replicate(config);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Varying-coefficient dynamic spatial autoregression toolkit"};
  app.require_subcommand(1);

  Overrides o;
  std::string config_path;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON configuration file")->required();
    cmd->add_option("--out", o.out, "output directory (overrides config)");
    cmd->add_option("--seed", o.seed, "random seed (overrides config)");
  };

  CLI::App* fit = app.add_subcommand("fit", "estimate the model on a panel");
  add_common(fit);
  fit->add_option("--lambda", o.lambda, "single penalty value instead of a grid");
  fit->add_flag("--infer", o.infer, "write standard errors and confidence intervals");

  CLI::App* detect = app.add_subcommand("detect", "change point / threshold detection");
  add_common(detect);
  detect->add_option("--lambda", o.lambda, "single penalty value instead of a grid");
  detect->add_option("--breaks-grid", o.breaks_grid, "time-break candidates every DELTA periods");
  detect->add_option("--breaks-list", o.breaks_list, "explicit time-break candidates")
      ->delimiter(',');
  detect->add_option("--threshold-quantiles", o.threshold_quantiles,
                     "threshold candidates at K driver quantiles");
  detect->add_option("--threshold-list", o.threshold_list, "explicit threshold candidates")
      ->delimiter(',');
  detect->add_option("--dac", o.dac, "divide-and-conquer subset size");

  CLI::App* simulate = app.add_subcommand("simulate", "generate a synthetic panel");
  add_common(simulate);

  CLI::App* replicate = app.add_subcommand("replicate", "Monte Carlo replication study");
  add_common(replicate);
  replicate->add_option("--reps", o.reps, "number of replications");
  replicate->add_option("--workers", o.workers, "worker threads (0 = auto)");
  replicate->add_flag("--infer-hist", o.infer_hist, "emit standardized-estimate histogram bins");

  CLI11_PARSE(app, argc, argv);

  std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, config_path, o);
  } catch (const dsar::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const dsar::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const dsar::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 1;
  }
}
