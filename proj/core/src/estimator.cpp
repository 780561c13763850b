#include "dsar/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dsar {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxSweeps = 10000;
constexpr double kConstraintMargin = 1e-6;

std::vector<int> free_columns(const DesignMatrices& design) {
  std::vector<int> cols;
  cols.reserve(static_cast<std::size_t>(design.L));
  std::size_t zi = 0;
  for (int i = 0; i < design.L; ++i) {
    if (zi < design.structural_zero_cols.size() && design.structural_zero_cols[zi] == i) {
      ++zi;
      continue;
    }
    cols.push_back(i);
  }
  return cols;
}

}  // namespace

Vector ls_phi(const DesignMatrices& design, const DynamicBasis& basis) {
  std::vector<int> cols = free_columns(design);
  Vector phi = Vector::Zero(design.L);
  if (cols.empty()) return phi;
  Matrix gsub(cols.size(), cols.size());
  Vector rhs(cols.size());
  for (std::size_t a = 0; a < cols.size(); ++a) {
    rhs[static_cast<int>(a)] = design.g[cols[a]];
    for (std::size_t c = 0; c < cols.size(); ++c) gsub(static_cast<int>(a), static_cast<int>(c)) = design.G(cols[a], cols[c]);
  }
  GuardedSpd solver(std::move(gsub), "least squares normal matrix",
                    [&](int i) { return coefficient_label(basis, cols[static_cast<std::size_t>(i)]); });
  Vector sub = solver.solve(rhs);
  for (std::size_t a = 0; a < cols.size(); ++a) phi[cols[a]] = sub[static_cast<int>(a)];
  return phi;
}

Vector ls_phi_restricted(const DesignMatrices& design, const std::vector<int>& support) {
  Vector phi = Vector::Zero(design.L);
  if (support.empty()) return phi;
  Matrix gsub(support.size(), support.size());
  Vector rhs(support.size());
  for (std::size_t a = 0; a < support.size(); ++a) {
    rhs[static_cast<int>(a)] = design.g[support[a]];
    for (std::size_t c = 0; c < support.size(); ++c)
      gsub(static_cast<int>(a), static_cast<int>(c)) = design.G(support[a], support[c]);
  }
  GuardedSpd solver(std::move(gsub), "restricted normal matrix",
                    [&](int i) { return std::to_string(support[static_cast<std::size_t>(i)]); });
  Vector sub = solver.solve(rhs);
  for (std::size_t a = 0; a < support.size(); ++a) phi[support[a]] = sub[static_cast<int>(a)];
  return phi;
}

Vector adaptive_weights(const Vector& phi_ls) {
  Vector u(phi_ls.size());
  for (int i = 0; i < phi_ls.size(); ++i) {
    double mag = std::abs(phi_ls[i]);
    if (mag == 0.0) {
      u[i] = kInf;
    } else if (mag < 1e-10) {
      u[i] = 1e10;
    } else {
      u[i] = 1.0 / mag;
    }
  }
  return u;
}

double kkt_residual(const LassoProblem& problem, const Vector& phi) {
  Vector grad = problem.G * phi - problem.g;
  double worst = 0.0;
  for (int i = 0; i < phi.size(); ++i) {
    if (problem.u[i] == kInf) continue;  // pinned, no stationarity condition
    double thr = problem.lambda * problem.u[i];
    double viol;
    if (phi[i] != 0.0) {
      viol = std::abs(grad[i] + thr * (phi[i] > 0.0 ? 1.0 : -1.0));
    } else {
      viol = std::max(0.0, std::abs(grad[i]) - thr);
    }
    worst = std::max(worst, viol);
  }
  return worst;
}

LassoSolution adaptive_lasso(const LassoProblem& problem, const Vector* warm_start) {
  const int L = static_cast<int>(problem.g.size());
  bool any_free = false;
  for (int i = 0; i < L; ++i) any_free = any_free || problem.u[i] < kInf;
  if (!any_free) throw ConfigError("adaptive lasso: every coordinate is pinned");
  if (problem.lambda < 0.0) throw ConfigError("adaptive lasso: lambda must be >= 0");

  Vector phi = warm_start ? *warm_start : Vector::Zero(L);
  for (int i = 0; i < L; ++i) {
    if (problem.u[i] == kInf) phi[i] = 0.0;
  }
  Vector gphi = problem.G * phi;

  LassoSolution sol;
  int sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    bool changed = false;
    for (int i = 0; i < L; ++i) {
      if (problem.u[i] == kInf) continue;
      double gii = problem.G(i, i);
      if (gii <= 0.0) continue;  // degenerate coordinate, leave at zero
      double partial = problem.g[i] - (gphi[i] - gii * phi[i]);
      double thr = problem.lambda * problem.u[i];
      double next;
      if (partial > thr) {
        next = (partial - thr) / gii;
      } else if (partial < -thr) {
        next = (partial + thr) / gii;
      } else {
        next = 0.0;
      }
      if (next != phi[i]) {
        double delta = next - phi[i];
        gphi += delta * problem.G.col(i);
        phi[i] = next;
        changed = true;
      }
    }
    if (!changed) break;  // bitwise fixed point
  }
  sol.phi = std::move(phi);
  sol.sweeps = sweep + 1;
  sol.kkt_residual = kkt_residual(problem, sol.phi);
  return sol;
}

ConstraintCheck check_constraints(const Vector& phi, const DynamicBasis& basis,
                                  const WeightSet& weights) {
  const int T = basis.T() > 0 ? basis.T() : 1;
  const int p = weights.p();
  const int d = weights.d();
  ConstraintCheck out;

  // Row L1 norms of each candidate matrix bound the combined row norm from
  // above; the exact value is only assembled when the bound is not already
  // conclusive.
  Vector winf(p);
  for (int j = 0; j < p; ++j)
    winf[j] = weights.matrices[static_cast<std::size_t>(j)].cwiseAbs().rowwise().sum().maxCoeff();

  Matrix combined(d, d);
  Vector rho_j(p);
  for (int t = 0; t < T; ++t) {
    double rho = 0.0;
    for (int j = 0; j < p; ++j) {
      double rj = 0.0;
      int base = coefficient_index(basis, j, 0);
      const MatrixBasis& mb = basis.per_matrix[static_cast<std::size_t>(j)];
      for (int term = 0; term < mb.terms(); ++term) rj += phi[base + term] * basis.value(j, term, t);
      rho_j[j] = rj;
      rho += rj;
    }
    out.max_abs_rho = std::max(out.max_abs_rho, std::abs(rho));

    double bound = 0.0;
    for (int j = 0; j < p; ++j) bound += std::abs(rho_j[j]) * winf[j];
    if (bound <= out.max_weight_row_norm) continue;
    combined.setZero();
    for (int j = 0; j < p; ++j) {
      if (rho_j[j] != 0.0) combined += rho_j[j] * weights.matrices[static_cast<std::size_t>(j)];
    }
    out.max_weight_row_norm =
        std::max(out.max_weight_row_norm, combined.cwiseAbs().rowwise().sum().maxCoeff());
  }
  return out;
}

BacktrackResult backtrack_to_feasible(const Vector& phi, const DynamicBasis& basis,
                                      const WeightSet& weights) {
  BacktrackResult res;
  res.constraints = check_constraints(phi, basis, weights);
  double worst = std::max(res.constraints.max_abs_rho, res.constraints.max_weight_row_norm);
  if (!std::isfinite(worst))
    throw InfeasibleError("constraints: non-finite stationarity measure, max |z_t' phi| = " +
                          std::to_string(res.constraints.max_abs_rho));
  if (worst < 1.0 - kConstraintMargin) {
    res.phi = phi;
    res.scale = 1.0;
    return res;
  }
  // Both constraint functionals are positively homogeneous in phi.
  double scale = (1.0 - kConstraintMargin) / worst;
  res.phi = scale * phi;
  res.scale = scale;
  res.constraints = check_constraints(res.phi, basis, weights);
  if (std::max(res.constraints.max_abs_rho, res.constraints.max_weight_row_norm) >= 1.0)
    throw InfeasibleError("constraints: backtracking failed, max |z_t' phi| = " +
                          std::to_string(res.constraints.max_abs_rho));
  return res;
}

Vector profiled_beta(const Vector& phi, const DesignMatrices& design) {
  return design.beta_of_phi(phi);
}

Vector estimate_mu(const Vector& phi, const Vector& beta, const PanelData& data,
                   const DynamicBasis& basis, const WeightSet& weights) {
  const int d = data.d();
  const int T = data.T();
  Vector mu = Vector::Zero(d);
  Vector wy(d);
  for (int t = 0; t < T; ++t) {
    wy.setZero();
    int idx = 0;
    for (int j = 0; j < weights.p(); ++j) {
      const MatrixBasis& mb = basis.per_matrix[static_cast<std::size_t>(j)];
      double rho_j = 0.0;
      for (int term = 0; term < mb.terms(); ++term, ++idx)
        rho_j += phi[idx] * basis.value(j, term, t);
      if (rho_j != 0.0) wy.noalias() += rho_j * (weights.matrices[static_cast<std::size_t>(j)] * data.y.col(t));
    }
    mu += data.y.col(t) - wy - data.X[static_cast<std::size_t>(t)] * beta;
  }
  return mu / static_cast<double>(T);
}

double bic_value(double rss, int active_count, int T, int L, BicVariant variant) {
  double mean_rss = std::max(rss / static_cast<double>(T), 1e-300);
  double penalty = static_cast<double>(active_count) * std::log(static_cast<double>(T)) /
                   static_cast<double>(T);
  if (variant == BicVariant::GrowingL) {
    if (L < 3) {
      warn("bic: log(log(L)) undefined or non-positive for L=" + std::to_string(L) +
           "; falling back to the fixed-dimension variant");
    } else {
      penalty *= std::log(std::log(static_cast<double>(L)));
    }
  }
  return std::log(mean_rss) + penalty;
}

double lambda_max(const Vector& g, const Vector& u) {
  double lmax = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    if (u[i] == kInf) continue;
    lmax = std::max(lmax, std::abs(g[i]) / u[i]);
  }
  return lmax;
}

std::vector<double> make_lambda_grid(const ModelSpec& spec, const Vector& g, const Vector& u) {
  std::vector<double> grid;
  if (!spec.lambda_grid.empty()) {
    grid = spec.lambda_grid;
    std::sort(grid.begin(), grid.end(), std::greater<double>());
    return grid;
  }
  double lmax = lambda_max(g, u);
  if (lmax <= 0.0) return {0.0};
  int n = spec.lambda_grid_size;
  if (n == 1) return {lmax};
  grid.reserve(static_cast<std::size_t>(n));
  double lmin = lmax * spec.lambda_min_ratio;
  double step = std::log(lmin / lmax) / static_cast<double>(n - 1);
  for (int i = 0; i < n; ++i) grid.push_back(lmax * std::exp(step * static_cast<double>(i)));
  return grid;
}

LambdaSelection select_lambda(const DesignMatrices& design, const ModelSpec& spec,
                              const Vector& phi_ls) {
  LassoProblem problem;
  problem.G = design.G;
  problem.g = design.g;
  problem.u = adaptive_weights(phi_ls);

  std::vector<double> grid = make_lambda_grid(spec, design.g, problem.u);

  LambdaSelection best;
  bool have_best = false;
  Vector warm = Vector::Zero(design.L);
  int prev_active = 0;
  for (double lambda : grid) {
    problem.lambda = lambda;
    LassoSolution sol = adaptive_lasso(problem, &warm);
    warm = sol.phi;

    Vector phi = sol.phi;
    double scale = 1.0;
    ConstraintCheck cons = check_constraints(phi, spec.basis, spec.weights);
    if (spec.constraints == ConstraintMode::Backtrack) {
      BacktrackResult bt = backtrack_to_feasible(phi, spec.basis, spec.weights);
      phi = bt.phi;
      scale = bt.scale;
      cons = bt.constraints;
    }

    // Along the descending grid the active count should not shrink.
    int active = static_cast<int>(nonzero_indices(phi).size());
    if (active < prev_active) {
      warn("lambda path: active count dropped from " + std::to_string(prev_active) + " to " +
           std::to_string(active) + " at lambda=" + std::to_string(lambda));
    }
    prev_active = active;

    double rss = (design.b - design.A * phi).squaredNorm();
    double criterion;
    if (spec.selection == SelectionCriterion::ResidualOnly) {
      criterion = std::log(std::max(rss / static_cast<double>(design.T), 1e-300));
    } else {
      criterion = bic_value(rss, active, design.T, design.L, spec.bic_variant);
    }
    LambdaPathPoint point{lambda, criterion, active};
    best.path.push_back(point);

    // Grid runs from large to small lambda; strict improvement keeps the
    // sparser solution on ties.
    if (!have_best || criterion < best.criterion) {
      have_best = true;
      best.lambda = lambda;
      best.phi = phi;
      best.criterion = criterion;
      best.backtrack_scale = scale;
      best.kkt = sol.kkt_residual;
      best.constraints = cons;
    }
  }
  if (!have_best) throw InfeasibleError("lambda selection: no grid point produced a solution");
  return best;
}

Matrix residual_panel(const PanelData& data, const ModelSpec& spec, const Vector& phi,
                      const Vector& beta, const Vector& mu) {
  Matrix res(data.d(), data.T());
  for (int t = 0; t < data.T(); ++t) {
    Vector wy = Vector::Zero(data.d());
    int idx = 0;
    for (int j = 0; j < spec.weights.p(); ++j) {
      const MatrixBasis& mb = spec.basis.per_matrix[static_cast<std::size_t>(j)];
      double rho_j = 0.0;
      for (int term = 0; term < mb.terms(); ++term, ++idx)
        rho_j += phi[idx] * spec.basis.value(j, term, t);
      if (rho_j != 0.0)
        wy.noalias() += rho_j * (spec.weights.matrices[static_cast<std::size_t>(j)] * data.y.col(t));
    }
    res.col(t) = data.y.col(t) - mu - wy - data.X[static_cast<std::size_t>(t)] * beta;
  }
  return res;
}

ModelFit fit_with_design(const PanelData& data, const ModelSpec& spec,
                         const DesignMatrices& design) {
  ModelFit out;
  out.phi_ls = ls_phi(design, spec.basis);
  LambdaSelection sel = select_lambda(design, spec, out.phi_ls);
  out.phi = sel.phi;
  out.lambda = sel.lambda;
  out.path = sel.path;
  out.backtrack_scale = sel.backtrack_scale;
  out.kkt_residual = sel.kkt;
  out.max_abs_rho = sel.constraints.max_abs_rho;
  out.max_weight_row_norm = sel.constraints.max_weight_row_norm;
  out.active_set = nonzero_indices(out.phi);

  double rss = (design.b - design.A * out.phi).squaredNorm();
  out.bic = bic_value(rss, static_cast<int>(out.active_set.size()), design.T, design.L,
                      spec.bic_variant);

  out.beta = profiled_beta(out.phi, design);
  out.mu = estimate_mu(out.phi, out.beta, data, spec.basis, spec.weights);
  out.residuals = residual_panel(data, spec, out.phi, out.beta, out.mu);
  return out;
}

ModelFit fit(const PanelData& data, const ModelSpec& spec) {
  data.validate();
  spec.validate(data.T());
  InstrumentPanel inst = build_instruments(data, spec.weights, spec.instrument_depth);
  DesignMatrices design = build_design(data, spec, inst);
  return fit_with_design(data, spec, design);
}

}  // namespace dsar
