#include "dsar/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

namespace dsar {

ModelSpec make_model_spec(const ModelOptions& options, WeightSet weights, DynamicBasis basis,
                          std::uint64_t seed) {
  ModelSpec spec;
  spec.weights = std::move(weights);
  spec.basis = std::move(basis);
  spec.instrument_depth = options.instrument_depth;
  spec.lambda_grid = options.lambda_grid;
  spec.lambda_grid_size = options.lambda_grid_size;
  spec.lambda_min_ratio = options.lambda_min_ratio;
  spec.bic_variant = options.bic_variant;
  spec.selection = options.selection;
  spec.tau_star = options.tau_star;
  spec.seed = seed;
  spec.constraints = options.constraints;
  return spec;
}

int default_workers() {
  if (const char* env = std::getenv("DSAR_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

McSummary run_replications(const std::vector<std::string>& metric_names, int reps, int workers,
                           const Replication& body) {
  if (reps < 1) throw ConfigError("replications: reps must be >= 1");
  if (workers < 1) workers = default_workers();
  workers = std::min(workers, reps);

  const int m = static_cast<int>(metric_names.size());
  McSummary summary;
  summary.metrics = metric_names;
  summary.reps = reps;
  summary.per_rep = Matrix::Constant(reps, m, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> errors(static_cast<std::size_t>(reps));

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int rep = next.fetch_add(1);
      if (rep >= reps) return;
      try {
        Vector row = body(rep);
        if (row.size() != m) throw Error("replication returned wrong metric count");
        summary.per_rep.row(rep) = row.transpose();
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(rep)] = e.what();
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (int rep = 0; rep < reps; ++rep) {
    if (!errors[static_cast<std::size_t>(rep)].empty()) {
      ++summary.failures;
      summary.failure_messages.push_back("rep " + std::to_string(rep) + ": " +
                                         errors[static_cast<std::size_t>(rep)]);
    }
  }
  if (summary.failures * 20 > reps) {
    std::string detail =
        summary.failure_messages.empty() ? "" : ("; first: " + summary.failure_messages.front());
    throw Error("replications: " + std::to_string(summary.failures) + "/" +
                std::to_string(reps) + " failed (more than 5%)" + detail);
  }
  if (summary.failures == reps) throw Error("replications: every replication failed");

  // Aggregation in replication order keeps the summary independent of the
  // worker schedule. Metrics undefined for a replication are NaN and are
  // skipped per column.
  summary.mean = Vector::Zero(m);
  summary.sd = Vector::Zero(m);
  for (int c = 0; c < m; ++c) {
    int ok = 0;
    double mean = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
      double value = summary.per_rep(rep, c);
      if (std::isnan(value)) continue;
      ++ok;
      mean += value;
    }
    if (ok == 0) {
      summary.mean[c] = std::numeric_limits<double>::quiet_NaN();
      summary.sd[c] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    mean /= static_cast<double>(ok);
    summary.mean[c] = mean;
    if (ok > 1) {
      double ss = 0.0;
      for (int rep = 0; rep < reps; ++rep) {
        double value = summary.per_rep(rep, c);
        if (std::isnan(value)) continue;
        ss += (value - mean) * (value - mean);
      }
      summary.sd[c] = std::sqrt(ss / static_cast<double>(ok - 1));
    }
  }
  return summary;
}

CandidateSet make_candidates(const CandidateConfig& config, int T, const Vector* driver) {
  CandidateSet set;
  set.kind = config.kind;
  set.style = config.style;
  if (!config.list.empty()) {
    set.values = config.list;
  } else if (config.kind == CandidateKind::TimeBreak) {
    if (config.grid_delta < 1)
      throw ConfigError("candidates: need an explicit list or a positive grid delta");
    int last = T / config.grid_delta;
    if (!config.include_last && last * config.grid_delta >= T) last -= 1;
    for (int l = 1; l <= last; ++l)
      set.values.push_back(static_cast<double>(l * config.grid_delta));
  } else {
    if (config.quantiles < 1)
      throw ConfigError("candidates: need an explicit list or a quantile count");
    if (driver == nullptr)
      throw ConfigError("candidates: threshold quantiles need a driver series");
    set.values = threshold_quantile_candidates(*driver, config.quantiles);
  }
  return set;
}

McSummary monte_carlo_fit(const DgpSpec& dgp, const ModelOptions& options, int reps,
                          int workers) {
  const std::vector<std::string> names{"mse_phi", "mse_beta", "mse_mu", "specificity",
                                       "sensitivity"};
  return run_replications(names, reps, workers, [&](int rep) {
    Rng rng = Rng::for_replication(dgp.seed, static_cast<std::uint64_t>(rep));
    Simulated sim = simulate(dgp, rng);
    if (!std::holds_alternative<VaryingCoefDgp>(dgp.spatial))
      throw ConfigError("monte_carlo_fit: needs a varying-coefficient truth");
    ModelSpec spec = make_model_spec(options, sim.weights, sim.truth.basis, dgp.seed);
    ModelFit f = fit(sim.data, spec);
    FitMetrics m = evaluate_fit(f, sim.truth);
    Vector row(5);
    row << m.mse_phi, m.mse_beta, m.mse_mu, m.spec, m.sens;
    return row;
  });
}

McSummary monte_carlo_detect(const DgpSpec& dgp, const ModelOptions& options,
                             const CandidateConfig& candidates, int reps, int workers) {
  const std::vector<std::string> names{"true_unique", "ari", "k_hat", "false_discovery",
                                       "mse_phi"};
  return run_replications(names, reps, workers, [&](int rep) {
    Rng rng = Rng::for_replication(dgp.seed, static_cast<std::uint64_t>(rep));
    Simulated sim = simulate(dgp, rng);

    const Vector* driver = nullptr;
    if (candidates.kind == CandidateKind::Threshold) driver = &sim.truth.driver;
    CandidateSet set = make_candidates(candidates, sim.data.T(), driver);

    ModelSpec spec_template = make_model_spec(options, sim.weights,
                                              DynamicBasis::constants_only(sim.weights.p(), 0),
                                              dgp.seed);
    DetectOptions detect_options;
    detect_options.rule = candidates.rule;
    detect_options.add_constants = candidates.add_constants;
    detect_options.max_candidates = candidates.max_candidates;

    ChangeReport report;
    if (candidates.dac) {
      report = divide_and_conquer(sim.data, sim.weights, set, spec_template, *candidates.dac,
                                  detect_options, driver);
    } else {
      report = detect(sim.data, sim.weights, set, spec_template, detect_options, driver);
    }

    double tu = std::numeric_limits<double>::quiet_NaN();
    double mse = std::numeric_limits<double>::quiet_NaN();
    if (candidates.kind == CandidateKind::TimeBreak && report.fit) {
      const DynamicBasis& fitted_basis =
          build_saturated_basis(report.candidates, Vector(), sim.weights, sim.data.T(),
                                detect_options.add_constants);
      if (sim.truth.break_locations.size() == 1) {
        tu = true_unique(report.fit->phi, report.candidates, fitted_basis,
                         static_cast<double>(sim.truth.break_locations.front()));
      }
      try {
        Vector phi_true = step_truth_coefficients(sim.truth.rho_series, report.candidates.values,
                                                  fitted_basis);
        mse = mean_squared_error(report.fit->phi, phi_true);
      } catch (const ConfigError&) {
        // truth not representable on the (refined) grid; leave NaN
      }
    }

    double ari = adjusted_rand_index(report.segmentation, sim.truth.segmentation);
    double false_discovery = 0.0;
    for (const auto& c : report.detected) {
      bool is_true = false;
      for (int loc : sim.truth.break_locations)
        is_true = is_true || c.value == static_cast<double>(loc);
      if (!is_true) false_discovery = 1.0;
    }

    Vector row(5);
    row << tu, ari, static_cast<double>(report.k_hat), false_discovery, mse;
    return row;
  });
}

McSummary monte_carlo_coverage(const DgpSpec& dgp, const ModelOptions& options,
                               const std::vector<int>& fixed_active, double level, int reps,
                               int workers) {
  if (fixed_active.empty()) throw ConfigError("coverage: fixed active set must be nonempty");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < fixed_active.size(); ++i)
    names.push_back("cover_" + std::to_string(i + 1));
  for (std::size_t i = 0; i < fixed_active.size(); ++i)
    names.push_back("std_" + std::to_string(i + 1));

  const double q = normal_quantile(0.5 + level / 2.0);
  return run_replications(names, reps, workers, [&](int rep) {
    Rng rng = Rng::for_replication(dgp.seed, static_cast<std::uint64_t>(rep));
    Simulated sim = simulate(dgp, rng);
    const auto* varying = std::get_if<VaryingCoefDgp>(&dgp.spatial);
    if (!varying) throw ConfigError("coverage: needs a varying-coefficient truth");

    ModelSpec spec = make_model_spec(options, sim.weights, sim.truth.basis, dgp.seed);
    spec.validate(sim.data.T());
    InstrumentPanel inst = build_instruments(sim.data, spec.weights, spec.instrument_depth);
    DesignMatrices design = build_design(sim.data, spec, inst);

    Vector phi = ls_phi_restricted(design, fixed_active);
    Vector beta = profiled_beta(phi, design);
    Vector mu = estimate_mu(phi, beta, sim.data, spec.basis, spec.weights);
    Matrix residuals = residual_panel(sim.data, spec, phi, beta, mu);

    CovarianceEstimate cov = covariance_phi(fixed_active, residuals, sim.data, inst, design,
                                            spec.basis, spec.effective_tau_star(sim.data.T()));

    const int h = static_cast<int>(fixed_active.size());
    Vector err(h);
    for (int a = 0; a < h; ++a)
      err[a] = phi[fixed_active[static_cast<std::size_t>(a)]] -
               sim.truth.phi[fixed_active[static_cast<std::size_t>(a)]];

    // Joint standardization via the inverse matrix square root.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov.cov);
    Vector vals = eig.eigenvalues();
    for (int i = 0; i < vals.size(); ++i) {
      if (vals[i] <= 0.0) throw InferenceError("coverage: singular plug-in covariance");
    }
    Vector standardized = eig.eigenvectors() * vals.cwiseSqrt().cwiseInverse().asDiagonal() *
                          (eig.eigenvectors().transpose() * err);

    Vector row(2 * h);
    for (int a = 0; a < h; ++a) {
      double se = cov.se[a];
      row[a] = (se > 0.0 && std::abs(err[a]) <= q * se) ? 1.0 : 0.0;
      row[h + a] = standardized[a];
    }
    return row;
  });
}

}  // namespace dsar
