#include "commands.hpp"

#include <dsar/csv.hpp>
#include <dsar/inference.hpp>

#include <filesystem>
#include <fstream>

namespace dsar::cli {

namespace {

namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir);
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
}

json phi_entries(const Vector& phi, const DynamicBasis& basis) {
  json entries = json::array();
  for (int i = 0; i < phi.size(); ++i) {
    auto [j, k] = coefficient_jk(basis, i);
    entries.push_back({{"j", j}, {"k", k}, {"value", phi[i]}});
  }
  return entries;
}

json fit_to_json(const ModelFit& fit, const DynamicBasis& basis) {
  json j;
  j["phi"] = phi_entries(fit.phi, basis);
  j["phi_ls"] = phi_entries(fit.phi_ls, basis);
  j["beta"] = std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size());
  j["mu"] = std::vector<double>(fit.mu.data(), fit.mu.data() + fit.mu.size());
  json active = json::array();
  for (int i : fit.active_set) active.push_back(i + 1);  // 1-based flat indices
  j["active_set"] = active;
  j["lambda"] = fit.lambda;
  j["bic"] = fit.bic;
  j["diagnostics"] = {{"max_abs_rho", fit.max_abs_rho},
                      {"max_weight_row_norm", fit.max_weight_row_norm},
                      {"backtrack_scale", fit.backtrack_scale},
                      {"kkt_residual", fit.kkt_residual}};
  json path = json::array();
  for (const auto& point : fit.path)
    path.push_back({{"lambda", point.lambda},
                    {"criterion", point.criterion},
                    {"active_count", point.active_count}});
  j["path"] = path;
  return j;
}

void write_residuals(const std::string& path, const Matrix& residuals) {
  CsvWriter out(path);
  out.write_row({"t", "unit", "residual"});
  for (int t = 0; t < residuals.cols(); ++t)
    for (int i = 0; i < residuals.rows(); ++i)
      out.write_row({std::to_string(t + 1), std::to_string(i + 1),
                     format_double(residuals(i, t))});
}

void write_segmentation(const std::string& path, const std::vector<int>& labels) {
  CsvWriter out(path);
  out.write_row({"t", "label"});
  for (std::size_t t = 0; t < labels.size(); ++t)
    out.write_row({std::to_string(t + 1), std::to_string(labels[t])});
}

Vector resolve_driver(const DriverConfig& config, const PanelData& panel) {
  if (config.kind == DriverConfig::Kind::SelfExcitingMean) {
    Vector driver(panel.T());
    for (int t = 0; t < panel.T(); ++t)
      driver[t] = (t - config.lag >= 0) ? panel.y.col(t - config.lag).mean() : 0.0;
    return driver;
  }
  if (config.kind == DriverConfig::Kind::Csv) {
    CsvTable table = read_csv(config.path, /*has_header=*/true);
    if (table.header.size() != 2 || table.header[0] != "t")
      throw DataError(config.path + ": expected a header 't,<name>'");
    if (static_cast<int>(table.rows.size()) != panel.T())
      throw DataError(config.path + ": expected " + std::to_string(panel.T()) + " rows");
    Vector driver(panel.T());
    for (int t = 0; t < panel.T(); ++t)
      driver[t] = parse_double_cell(table.rows[static_cast<std::size_t>(t)][1], config.path,
                                    static_cast<std::size_t>(t) + 2);
    return driver;
  }
  throw ConfigError("threshold detection needs a driver (self_exciting_mean or csv)");
}

}  // namespace

void cmd_fit(const FitConfig& config) {
  LoadedData loaded = load_panel_data(config.data, /*need_basis=*/true);
  ModelSpec spec =
      make_model_spec(config.model, loaded.weights, loaded.basis, config.seed);
  spec.validate(loaded.panel.T());
  InstrumentPanel inst =
      build_instruments(loaded.panel, spec.weights, spec.instrument_depth);
  DesignMatrices design = build_design(loaded.panel, spec, inst);
  ModelFit fit = fit_with_design(loaded.panel, spec, design);

  ensure_dir(config.out);
  write_json(join(config.out, "fit.json"), fit_to_json(fit, spec.basis));
  write_residuals(join(config.out, "residuals.csv"), fit.residuals);

  if (config.infer) {
    CsvWriter se(join(config.out, "se.csv"));
    se.write_row({"j", "k", "estimate", "se", "lower", "upper"});
    if (fit.active_set.empty()) {
      se.write_comment("empty active set: no coefficients to report");
    } else {
      CovarianceEstimate cov = covariance_phi(fit, loaded.panel, spec, inst, design);
      double q = normal_quantile(0.5 + config.level / 2.0);
      for (std::size_t a = 0; a < cov.H.size(); ++a) {
        int i = cov.H[a];
        auto [j, k] = coefficient_jk(spec.basis, i);
        double est = fit.phi[i];
        double stderr_a = cov.se[static_cast<int>(a)];
        se.write_row({std::to_string(j), std::to_string(k), format_double(est),
                      format_double(stderr_a), format_double(est - q * stderr_a),
                      format_double(est + q * stderr_a)});
      }
    }
  }
}

void cmd_detect(const DetectConfig& config) {
  LoadedData loaded = load_panel_data(config.data, /*need_basis=*/false);
  ModelSpec spec_template =
      make_model_spec(config.model, loaded.weights,
                      DynamicBasis::constants_only(loaded.weights.p(), 0), config.seed);

  Vector driver;
  const Vector* driver_ptr = nullptr;
  if (config.candidates.kind == CandidateKind::Threshold) {
    driver = resolve_driver(config.driver, loaded.panel);
    driver_ptr = &driver;
  }
  CandidateSet candidates = make_candidates(config.candidates, loaded.panel.T(), driver_ptr);

  DetectOptions options;
  options.rule = config.candidates.rule;
  options.add_constants = config.candidates.add_constants;
  options.max_candidates = config.candidates.max_candidates;

  ChangeReport report;
  if (config.candidates.dac) {
    report = divide_and_conquer(loaded.panel, loaded.weights, candidates, spec_template,
                                *config.candidates.dac, options, driver_ptr);
  } else {
    report = detect(loaded.panel, loaded.weights, candidates, spec_template, options,
                    driver_ptr);
  }

  ensure_dir(config.out);
  json j;
  json detected = json::array();
  for (const auto& change : report.detected) {
    json c;
    c["location"] = change.value;
    c["coefficients"] = change.coefficients;
    detected.push_back(c);
  }
  j["detected"] = detected;
  j["k_hat"] = report.k_hat;
  json flagged = json::array();
  for (int idx : report.flagged_indices)
    flagged.push_back(report.candidates.values[static_cast<std::size_t>(idx)]);
  j["flagged"] = flagged;
  j["candidates"] = report.candidates.values;
  if (report.fit) {
    j["lambda"] = report.fit->lambda;
    j["bic"] = report.fit->bic;
  }
  write_json(join(config.out, "changes.json"), j);
  write_segmentation(join(config.out, "segmentation.csv"), report.segmentation);
}

void cmd_simulate(const SimulateConfig& config) {
  Simulated sim = simulate(config.dgp);
  ensure_dir(config.out);
  ensure_dir(join(config.out, "weights"));

  // panel.csv in long format; the exogenous copies become u columns.
  const PanelData& data = sim.data;
  CsvWriter panel(join(config.out, "panel.csv"));
  std::vector<std::string> header{"t", "unit", "y"};
  for (int c = 0; c < data.r(); ++c) header.push_back("x" + std::to_string(c + 1));
  for (int c = 0; c < data.s(); ++c) header.push_back("u" + std::to_string(c + 1));
  panel.write_row(header);
  for (int t = 0; t < data.T(); ++t) {
    for (int i = 0; i < data.d(); ++i) {
      std::vector<std::string> row{std::to_string(t + 1), std::to_string(i + 1),
                                   format_double(data.y(i, t))};
      for (int c = 0; c < data.r(); ++c)
        row.push_back(format_double(data.X[static_cast<std::size_t>(t)](i, c)));
      for (int c = 0; c < data.s(); ++c)
        row.push_back(format_double(data.U[static_cast<std::size_t>(t)](i, c)));
      panel.write_row(row);
    }
  }

  for (int j = 0; j < sim.weights.p(); ++j)
    save_weight_matrix(join(config.out, "weights/w" + std::to_string(j + 1) + ".csv"),
                       sim.weights.matrices[static_cast<std::size_t>(j)]);

  if (sim.truth.basis.p() > 0) {
    CsvWriter basis(join(config.out, "basis.csv"));
    std::vector<std::string> bh{"t"};
    for (int j = 0; j < sim.truth.basis.p(); ++j)
      for (int k = 1; k <= sim.truth.basis.per_matrix[static_cast<std::size_t>(j)].l(); ++k)
        bh.push_back("z_" + std::to_string(j + 1) + "_" + std::to_string(k));
    basis.write_row(bh);
    for (int t = 0; t < data.T(); ++t) {
      std::vector<std::string> row{std::to_string(t + 1)};
      for (int j = 0; j < sim.truth.basis.p(); ++j) {
        const MatrixBasis& mb = sim.truth.basis.per_matrix[static_cast<std::size_t>(j)];
        for (int k = 0; k < mb.l(); ++k) row.push_back(format_double(mb.dynamic(t, k)));
      }
      basis.write_row(row);
    }
  }
  if (sim.truth.driver.size() > 0) {
    CsvWriter driver(join(config.out, "driver.csv"));
    driver.write_row({"t", "q"});
    for (int t = 0; t < data.T(); ++t)
      driver.write_row({std::to_string(t + 1), format_double(sim.truth.driver[t])});
  }

  json truth;
  truth["mu"] =
      std::vector<double>(sim.truth.mu.data(), sim.truth.mu.data() + sim.truth.mu.size());
  truth["beta"] =
      std::vector<double>(sim.truth.beta.data(), sim.truth.beta.data() + sim.truth.beta.size());
  if (sim.truth.phi.size() > 0)
    truth["phi"] =
        std::vector<double>(sim.truth.phi.data(), sim.truth.phi.data() + sim.truth.phi.size());
  if (!sim.truth.break_locations.empty()) truth["break_locations"] = sim.truth.break_locations;
  if (!std::isnan(sim.truth.threshold_gamma)) truth["threshold"] = sim.truth.threshold_gamma;
  truth["segmentation"] = sim.truth.segmentation;
  truth["max_abs_rho"] = sim.truth.max_abs_rho;
  truth["stationarity_violations"] = sim.truth.stationarity_violations;
  write_json(join(config.out, "truth.json"), truth);
}

void cmd_replicate(const ReplicateConfig& config) {
  McSummary summary;
  switch (config.task) {
    case ReplicateConfig::Task::Fit:
      summary = monte_carlo_fit(config.dgp, config.model, config.reps, config.workers);
      break;
    case ReplicateConfig::Task::Detect:
      summary = monte_carlo_detect(config.dgp, config.model, config.candidates, config.reps,
                                   config.workers);
      break;
    case ReplicateConfig::Task::Coverage:
      summary = monte_carlo_coverage(config.dgp, config.model, config.fixed_active,
                                     config.level, config.reps, config.workers);
      break;
  }

  ensure_dir(config.out);
  {
    CsvWriter out(join(config.out, "summary.csv"));
    out.write_row({"metric", "mean", "sd"});
    for (std::size_t i = 0; i < summary.metrics.size(); ++i)
      out.write_row({summary.metrics[i], format_double(summary.mean[static_cast<int>(i)]),
                     format_double(summary.sd[static_cast<int>(i)])});
    if (summary.failures > 0)
      out.write_comment("failed replications excluded: " + std::to_string(summary.failures));
  }
  {
    CsvWriter out(join(config.out, "per_rep.csv"));
    std::vector<std::string> header{"rep"};
    header.insert(header.end(), summary.metrics.begin(), summary.metrics.end());
    out.write_row(header);
    for (int rep = 0; rep < summary.reps; ++rep) {
      std::vector<std::string> row{std::to_string(rep)};
      for (int c = 0; c < summary.per_rep.cols(); ++c)
        row.push_back(format_double(summary.per_rep(rep, c)));
      out.write_row(row);
    }
  }
  if (config.task == ReplicateConfig::Task::Coverage && config.infer_hist) {
    // Fixed-width bins of the jointly standardized estimates per coordinate.
    const int h = static_cast<int>(config.fixed_active.size());
    CsvWriter out(join(config.out, "hist_bins.csv"));
    out.write_row({"coordinate", "bin_lo", "bin_hi", "count"});
    double width = (config.hist.hi - config.hist.lo) / config.hist.bins;
    for (int a = 0; a < h; ++a) {
      int column = h + a;  // std_<a+1>
      std::vector<int> counts(static_cast<std::size_t>(config.hist.bins), 0);
      for (int rep = 0; rep < summary.reps; ++rep) {
        double value = summary.per_rep(rep, column);
        if (std::isnan(value) || value < config.hist.lo || value >= config.hist.hi) continue;
        int bin = static_cast<int>((value - config.hist.lo) / width);
        counts[static_cast<std::size_t>(std::min(bin, config.hist.bins - 1))] += 1;
      }
      for (int b = 0; b < config.hist.bins; ++b)
        out.write_row({std::to_string(a + 1), format_double(config.hist.lo + b * width),
                       format_double(config.hist.lo + (b + 1) * width),
                       std::to_string(counts[static_cast<std::size_t>(b)])});
    }
  }
}

}  // namespace dsar::cli
