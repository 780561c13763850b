#pragma once

#include <functional>
#include <map>
#include <optional>

#include "dsar/inference.hpp"
#include "dsar/simulation.hpp"

namespace dsar {

// Scalar model options applied on top of per-replication weights and bases.
struct ModelOptions {
  int instrument_depth = 1;
  std::vector<double> lambda_grid;  // empty -> automatic
  int lambda_grid_size = 50;
  double lambda_min_ratio = 1e-4;
  BicVariant bic_variant = BicVariant::GrowingL;
  SelectionCriterion selection = SelectionCriterion::Bic;
  int tau_star = -1;
  ConstraintMode constraints = ConstraintMode::Backtrack;
};

ModelSpec make_model_spec(const ModelOptions& options, WeightSet weights, DynamicBasis basis,
                          std::uint64_t seed);

// Aggregate over replications. Failed replications are excluded from the
// moments and recorded; more than 5% failures aborts the run.
struct McSummary {
  std::vector<std::string> metrics;
  Matrix per_rep;                 // reps x metrics, NaN rows for failures
  Vector mean;
  Vector sd;                      // sample sd, 0 when a single replication
  int reps = 0;
  int failures = 0;
  std::vector<std::string> failure_messages;
};

using Replication = std::function<Vector(int rep)>;

// Deterministic parallel driver: replication r's stream must be derived from
// (seed, r) inside `body`; aggregation is performed in replication order so
// the worker count cannot change the summary.
McSummary run_replications(const std::vector<std::string>& metric_names, int reps, int workers,
                           const Replication& body);

// Candidate construction for detection experiments.
struct CandidateConfig {
  CandidateKind kind = CandidateKind::TimeBreak;
  std::vector<double> list;      // explicit values; wins over the rules below
  int grid_delta = 0;            // time breaks at delta, 2*delta, ...
  bool include_last = false;     // keep the break at t = T on the grid
  int quantiles = 0;             // threshold candidates at i/(k+1) quantiles
  IndicatorStyle style = IndicatorStyle::PrePost;
  std::optional<FlagRule> rule;
  bool add_constants = false;
  int max_candidates = 40;
  std::optional<DacOptions> dac;
};

CandidateSet make_candidates(const CandidateConfig& config, int T, const Vector* driver);

// Monte Carlo over fresh panels: estimation metrics against the truth.
McSummary monte_carlo_fit(const DgpSpec& dgp, const ModelOptions& options, int reps, int workers);

// Monte Carlo over detection runs: change-location metrics.
// Metrics: true_unique, ari, k_hat, false_discovery, mse_phi (NaN when the
// truth is not representable on the candidate grid).
McSummary monte_carlo_detect(const DgpSpec& dgp, const ModelOptions& options,
                             const CandidateConfig& candidates, int reps, int workers);

// Monte Carlo for coverage of the plug-in confidence intervals on a fixed
// active set (0-based coordinates). Metrics: cover_<i> indicator per
// coordinate and std_<i>, the jointly standardized estimate, per coordinate.
McSummary monte_carlo_coverage(const DgpSpec& dgp, const ModelOptions& options,
                               const std::vector<int>& fixed_active, double level, int reps,
                               int workers);

// Default worker count: DSAR_THREADS env var if set, else hardware limit.
int default_workers();

}  // namespace dsar
