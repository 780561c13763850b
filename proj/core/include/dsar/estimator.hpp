#pragma once

#include "dsar/design.hpp"
#include "dsar/types.hpp"

namespace dsar {

// Quadratic form of the penalized problem: minimize
//   (1/2) phi' G phi - g' phi + lambda * sum_i u_i |phi_i|
// (equivalently ||b - A phi||^2 / (2T) up to a constant). Coordinates with
// u_i = +inf are pinned to exact zero.
struct LassoProblem {
  Matrix G;
  Vector g;
  Vector u;        // adaptive weights, entries may be +inf
  double lambda = 0.0;
};

struct LassoSolution {
  Vector phi;
  double kkt_residual = 0.0;
  int sweeps = 0;
};

// Initial least squares estimate: exact minimizer of the unpenalized
// quadratic. Structurally zero columns get exact zeros; a singular normal
// matrix on the remaining columns raises IdentificationError naming the
// collinear coordinates.
Vector ls_phi(const DesignMatrices& design, const DynamicBasis& basis);

// Least squares restricted to a fixed support (all other coordinates zero).
Vector ls_phi_restricted(const DesignMatrices& design, const std::vector<int>& support);

// Adaptive weights u_i = 1/|phi_tilde_i|, with exact zeros mapped to +inf
// (pinning) and magnitudes below 1e-10 capped at u_i = 1e10.
Vector adaptive_weights(const Vector& phi_ls);

// Cyclic coordinate descent with soft thresholding, warm-started from
// `warm_start` when given. Runs to a bitwise fixed point (subject to the
// sweep cap) so the reported KKT residual is at numerical precision.
LassoSolution adaptive_lasso(const LassoProblem& problem, const Vector* warm_start = nullptr);

// Max over i of the KKT stationarity violation at phi.
double kkt_residual(const LassoProblem& problem, const Vector& phi);

struct ConstraintCheck {
  double max_abs_rho = 0.0;          // max_t |z_t' phi|
  double max_weight_row_norm = 0.0;  // max_t ||sum rho_jt W_j||_inf
};

ConstraintCheck check_constraints(const Vector& phi, const DynamicBasis& basis,
                                  const WeightSet& weights);

// Scales phi toward zero until both stationarity constraints hold with a
// 1e-6 margin; identity when already feasible. Throws InfeasibleError when
// no positive scaling works (non-finite constraint values).
struct BacktrackResult {
  Vector phi;
  double scale = 1.0;
  ConstraintCheck constraints;
};
BacktrackResult backtrack_to_feasible(const Vector& phi, const DynamicBasis& basis,
                                      const WeightSet& weights);

// Profiled covariate coefficients (delegates to the cached projections).
Vector profiled_beta(const Vector& phi, const DesignMatrices& design);

// Fixed effects: time average of (y_t - W_hat_t y_t - X_t beta).
Vector estimate_mu(const Vector& phi, const Vector& beta, const PanelData& data,
                   const DynamicBasis& basis, const WeightSet& weights);

// Information criterion for a fitted residual norm. GrowingL multiplies the
// penalty by log(log L); with L < 3 that factor is non-positive, so the
// Fixed variant is used instead (with a warning).
double bic_value(double rss, int active_count, int T, int L, BicVariant variant);

struct LambdaSelection {
  double lambda = 0.0;
  Vector phi;                      // solution at the selected lambda
  double criterion = 0.0;
  double backtrack_scale = 1.0;
  double kkt = 0.0;
  ConstraintCheck constraints;
  std::vector<LambdaPathPoint> path;
};

// Smallest penalty that zeroes every free coordinate.
double lambda_max(const Vector& g, const Vector& u);

// Automatic grid (descending) or the spec-provided one (sorted descending).
std::vector<double> make_lambda_grid(const ModelSpec& spec, const Vector& g, const Vector& u);

// Evaluates the criterion along the grid with warm starts, returning the
// minimizer; ties break toward the larger (sparser) lambda.
LambdaSelection select_lambda(const DesignMatrices& design, const ModelSpec& spec,
                              const Vector& phi_ls);

// Full four-step fit: least squares initialization, adaptive LASSO with
// criterion-selected penalty, profiled covariate coefficients, fixed
// effects, residuals.
ModelFit fit(const PanelData& data, const ModelSpec& spec);

// Same, reusing an externally built design (e.g. in Monte Carlo loops).
ModelFit fit_with_design(const PanelData& data, const ModelSpec& spec,
                         const DesignMatrices& design);

// Residual panel eps_t = y_t - mu - W_hat_t y_t - X_t beta.
Matrix residual_panel(const PanelData& data, const ModelSpec& spec, const Vector& phi,
                      const Vector& beta, const Vector& mu);

}  // namespace dsar
