#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <dsar/estimator.hpp>
#include <dsar/simulation.hpp>

#include "test_util.hpp"

using namespace dsar;

namespace {

// General-setting DGP at small scale: two candidate matrices, two dynamic
// variables each, truth (0.2, 0.2, 0, 0, 0, 0.3).
DgpSpec small_dgp(int d, int T, std::uint64_t seed, NoiseSpec::Kind noise) {
  DgpSpec dgp;
  dgp.d = d;
  dgp.T = T;
  dgp.weights = {WeightGen{WeightGen::Kind::AheadBehind, 2},
                 WeightGen{WeightGen::Kind::Bernoulli, 0, 0.2}};
  dgp.mu = Vector::Ones(d);
  dgp.beta = Vector::Ones(3);
  dgp.x.cols = 3;
  dgp.x.endogenous_add = 0.0;
  dgp.noise.kind = noise;
  VaryingCoefDgp vc;
  vc.l = {2, 2};
  vc.phi.resize(6);
  vc.phi << 0.2, 0.2, 0.0, 0.0, 0.0, 0.3;
  dgp.spatial = vc;
  dgp.seed = seed;
  return dgp;
}

DesignMatrices design_of(const Simulated& sim, const ModelSpec& spec) {
  InstrumentPanel inst = build_instruments(sim.data, spec.weights, spec.instrument_depth);
  return build_design(sim.data, spec, inst);
}

ModelSpec spec_of(const Simulated& sim) {
  ModelSpec spec;
  spec.weights = sim.weights;
  spec.basis = sim.truth.basis;
  return spec;
}

// Brute-force objective minimizer over a dense grid, the oracle for small
// penalized problems.
Vector grid_search_oracle(const LassoProblem& p, double lo, double hi, double step) {
  Vector best = Vector::Zero(2);
  double best_value = std::numeric_limits<double>::infinity();
  for (double a = lo; a <= hi + 1e-12; a += step) {
    for (double b = lo; b <= hi + 1e-12; b += step) {
      Vector phi(2);
      phi << a, b;
      double value = 0.5 * phi.dot(p.G * phi) - p.g.dot(phi) +
                     p.lambda * (p.u[0] * std::abs(a) + p.u[1] * std::abs(b));
      if (value < best_value) {
        best_value = value;
        best = phi;
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("noiseless panels identify the truth exactly") {
  Simulated sim = simulate(small_dgp(12, 40, 5, NoiseSpec::Kind::None));
  ModelSpec spec = spec_of(sim);
  DesignMatrices design = design_of(sim, spec);
  Vector phi_tilde = ls_phi(design, spec.basis);
  CHECK((phi_tilde - sim.truth.phi).cwiseAbs().maxCoeff() < 1e-8);

  Vector beta = profiled_beta(phi_tilde, design);
  CHECK((beta - sim.truth.beta).cwiseAbs().maxCoeff() < 1e-8);
  Vector mu = estimate_mu(phi_tilde, beta, sim.data, spec.basis, spec.weights);
  CHECK((mu - sim.truth.mu).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("scalar least squares reduces to g / G") {
  Rng rng(13);
  PanelData data = testutil::random_panel(4, 8, 2, 2, rng);
  WeightSet ws = testutil::random_weights(4, 1, rng);
  DynamicBasis basis = DynamicBasis::constants_only(1, 8);
  ModelSpec spec;
  spec.weights = ws;
  spec.basis = basis;
  DesignMatrices design = build_design(data, spec, build_instruments(data, ws, 1));
  REQUIRE(design.L == 1);
  Vector phi = ls_phi(design, basis);
  CHECK(phi[0] == doctest::Approx(design.g[0] / design.G(0, 0)).epsilon(1e-14));
}

TEST_CASE("adaptive lasso with zero penalty equals least squares") {
  Simulated sim = simulate(small_dgp(10, 30, 11, NoiseSpec::Kind::IidGaussian));
  ModelSpec spec = spec_of(sim);
  DesignMatrices design = design_of(sim, spec);
  Vector phi_tilde = ls_phi(design, spec.basis);
  LassoProblem p{design.G, design.g, adaptive_weights(phi_tilde), 0.0};
  LassoSolution sol = adaptive_lasso(p);
  CHECK((sol.phi - phi_tilde).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(sol.kkt_residual <= 1e-8);
}

TEST_CASE("two-coordinate solutions match the dense grid oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix root = testutil::random_matrix(2, 2, rng);
    LassoProblem p;
    p.G = root * root.transpose() + 0.5 * Matrix::Identity(2, 2);
    p.g = testutil::random_matrix(2, 1, rng).col(0) * 0.3;
    p.u = Vector::Ones(2) + testutil::random_matrix(2, 1, rng).col(0).cwiseAbs();
    p.lambda = 0.05 * (trial + 1);
    LassoSolution sol = adaptive_lasso(p);
    Vector oracle = grid_search_oracle(p, -1.0, 1.0, 1e-3);
    CHECK((sol.phi - oracle).cwiseAbs().maxCoeff() <= 2e-3);
  }
}

TEST_CASE("KKT certificates hold at randomized solutions") {
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    int L = 3 + static_cast<int>(rng.next_u64() % 6);
    Matrix root = testutil::random_matrix(L, L, rng);
    LassoProblem p;
    p.G = root * root.transpose() + 0.1 * Matrix::Identity(L, L);
    p.g = testutil::random_matrix(L, 1, rng).col(0);
    p.u = testutil::random_matrix(L, 1, rng).col(0).cwiseAbs() + Vector::Constant(L, 0.2);
    p.lambda = 0.1 * rng.uniform();
    LassoSolution sol = adaptive_lasso(p);
    CHECK(sol.kkt_residual <= 1e-8);
  }
}

TEST_CASE("pinned coordinates stay exactly zero") {
  Rng rng(23);
  Matrix root = testutil::random_matrix(4, 4, rng);
  LassoProblem p;
  p.G = root * root.transpose() + Matrix::Identity(4, 4);
  p.g = testutil::random_matrix(4, 1, rng).col(0);
  p.u = Vector::Ones(4);
  p.u[2] = std::numeric_limits<double>::infinity();
  p.lambda = 0.01;
  LassoSolution sol = adaptive_lasso(p);
  CHECK(sol.phi[2] == 0.0);
  CHECK(sol.kkt_residual <= 1e-8);
}

TEST_CASE("profiled beta matches a direct normal-equation oracle for r = 1") {
  Rng rng(29);
  PanelData data = testutil::random_panel(3, 6, 1, 1, rng);
  WeightSet ws = testutil::random_weights(3, 1, rng);
  DynamicBasis basis = testutil::random_basis({1}, 6, rng);
  ModelSpec spec;
  spec.weights = ws;
  spec.basis = basis;
  InstrumentPanel inst = build_instruments(data, ws, 1);
  DesignMatrices design = build_design(data, spec, inst);

  Vector phi = testutil::random_matrix(design.L, 1, rng).col(0);

  Matrix p_sum = Matrix::Zero(1, inst.v());
  Vector q_sum = Vector::Zero(inst.v());
  for (int t = 0; t < data.T(); ++t) {
    Matrix centered = inst.B[size_t(t)] - inst.B_bar;
    p_sum += data.X[size_t(t)].transpose() * centered;
    Vector wy = Vector::Zero(3);
    int idx = 0;
    for (int term = 0; term < basis.per_matrix[0].terms(); ++term, ++idx)
      wy += phi[idx] * basis.value(0, term, t) * (ws.matrices[0] * data.y.col(t));
    q_sum += centered.transpose() * (data.y.col(t) - wy);
  }
  double gram = (p_sum * p_sum.transpose())(0, 0);
  double beta_direct = (p_sum * q_sum)(0) / gram;
  Vector beta = profiled_beta(phi, design);
  CHECK(beta[0] == doctest::Approx(beta_direct).epsilon(1e-12));
}

TEST_CASE("fixed effect estimate for a single unit matches hand arithmetic") {
  // d=1: y = (2, 4, 6), W = 0, X beta = (1, 1, 1) -> mu = mean(y - Xb) = 3.
  PanelData data;
  data.y = Matrix(1, 3);
  data.y << 2, 4, 6;
  Matrix x(1, 1);
  x << 1;
  data.X = {x, x, x};
  WeightSet ws;
  ws.matrices = {Matrix::Zero(1, 1)};
  DynamicBasis basis = DynamicBasis::constants_only(1, 3);
  Vector phi = Vector::Zero(1);
  Vector beta = Vector::Ones(1);
  Vector mu = estimate_mu(phi, beta, data, basis, ws);
  CHECK(mu[0] == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("information criterion hand values") {
  CHECK(bic_value(50.0, 0, 100, 20, BicVariant::GrowingL) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-12));
  double growing = bic_value(100.0, 2, 100, 20, BicVariant::GrowingL);
  CHECK(growing == doctest::Approx(2.0 * std::log(100.0) / 100.0 * std::log(std::log(20.0)))
                       .epsilon(1e-12));
  CHECK(growing == doctest::Approx(0.1010).epsilon(1e-3));
  double fixed = bic_value(100.0, 2, 100, 20, BicVariant::Fixed);
  CHECK(fixed == doctest::Approx(2.0 * std::log(100.0) / 100.0).epsilon(1e-12));
  CHECK(fixed == doctest::Approx(0.0921).epsilon(1e-3));
}

TEST_CASE("growing variant falls back for tiny L with a warning") {
  std::vector<std::string> warnings;
  set_warning_handler([&](const std::string& m) { warnings.push_back(m); });
  double value = bic_value(100.0, 1, 50, 2, BicVariant::GrowingL);
  set_warning_handler(nullptr);
  CHECK(value == doctest::Approx(bic_value(100.0, 1, 50, 2, BicVariant::Fixed)).epsilon(1e-14));
  REQUIRE(!warnings.empty());
  CHECK(warnings.front().find("falling back") != std::string::npos);
}

TEST_CASE("single-point grids are returned as-is") {
  Simulated sim = simulate(small_dgp(8, 25, 31, NoiseSpec::Kind::IidGaussian));
  ModelSpec spec = spec_of(sim);
  spec.lambda_grid = {0.037};
  DesignMatrices design = design_of(sim, spec);
  LambdaSelection sel = select_lambda(design, spec, ls_phi(design, spec.basis));
  CHECK(sel.lambda == 0.037);
  CHECK(sel.path.size() == 1);
}

TEST_CASE("criterion ties prefer the sparser model") {
  // Two penalties large enough to zero everything produce identical fits;
  // the tie must resolve to the larger one.
  Simulated sim = simulate(small_dgp(10, 30, 37, NoiseSpec::Kind::None));
  ModelSpec spec = spec_of(sim);
  DesignMatrices design = design_of(sim, spec);
  Vector phi_tilde = ls_phi(design, spec.basis);
  Vector u = adaptive_weights(phi_tilde);
  double lmax = lambda_max(design.g, u);
  spec.lambda_grid = {lmax * 2.0, lmax * 4.0};
  LambdaSelection sel = select_lambda(design, spec, phi_tilde);
  CHECK(sel.lambda == lmax * 4.0);
}

TEST_CASE("automatic grids are descending with the documented span") {
  Simulated sim = simulate(small_dgp(8, 25, 41, NoiseSpec::Kind::IidGaussian));
  ModelSpec spec = spec_of(sim);
  DesignMatrices design = design_of(sim, spec);
  Vector u = adaptive_weights(ls_phi(design, spec.basis));
  std::vector<double> grid = make_lambda_grid(spec, design.g, u);
  REQUIRE(grid.size() == 50);
  CHECK(grid.front() == doctest::Approx(lambda_max(design.g, u)).epsilon(1e-12));
  CHECK(grid.back() == doctest::Approx(grid.front() * 1e-4).epsilon(1e-9));
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] < grid[i - 1]);
}

TEST_CASE("full fit recovers a noiseless truth end to end") {
  DgpSpec dgp = small_dgp(12, 40, 43, NoiseSpec::Kind::None);
  Simulated sim = simulate(dgp);
  ModelSpec spec = spec_of(sim);
  spec.lambda_grid = {0.0};
  // Gaussian dynamic variables can push the true rho_t past one, in which
  // case backtracking would rescale the exact solution away from the truth.
  spec.constraints = ConstraintMode::None;
  ModelFit f = fit(sim.data, spec);
  CHECK((f.phi - sim.truth.phi).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((f.beta - sim.truth.beta).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((f.mu - sim.truth.mu).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(f.residuals.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("fits are bit-identical across repeated runs") {
  DgpSpec dgp = small_dgp(10, 30, 47, NoiseSpec::Kind::IidGaussian);
  Simulated sim = simulate(dgp);
  ModelSpec spec = spec_of(sim);
  ModelFit a = fit(sim.data, spec);
  ModelFit b = fit(sim.data, spec);
  REQUIRE(a.phi.size() == b.phi.size());
  for (int i = 0; i < a.phi.size(); ++i) CHECK(a.phi[i] == b.phi[i]);
  CHECK(a.lambda == b.lambda);
  CHECK(a.bic == b.bic);
}

TEST_CASE("active set matches the exact nonzeros and constraints are reported") {
  DgpSpec dgp = small_dgp(15, 60, 53, NoiseSpec::Kind::IidGaussian);
  Simulated sim = simulate(dgp);
  ModelSpec spec = spec_of(sim);
  ModelFit f = fit(sim.data, spec);
  for (int i : f.active_set) CHECK(f.phi[i] != 0.0);
  int nonzeros = 0;
  for (int i = 0; i < f.phi.size(); ++i) nonzeros += f.phi[i] != 0.0 ? 1 : 0;
  CHECK(nonzeros == static_cast<int>(f.active_set.size()));
  if (spec.constraints == ConstraintMode::Backtrack) {
    CHECK(f.max_abs_rho < 1.0);
    CHECK(f.max_weight_row_norm < 1.0);
  }
}

TEST_CASE("backtracking rescales an infeasible solution onto the boundary") {
  Rng rng(59);
  WeightSet ws = testutil::random_weights(6, 2, rng);
  DynamicBasis basis = DynamicBasis::constants_only(2, 5);
  Vector phi(2);
  phi << 1.6, 0.2;  // rho = 1.8 everywhere, clearly infeasible
  BacktrackResult bt = backtrack_to_feasible(phi, basis, ws);
  CHECK(bt.scale < 1.0);
  CHECK(bt.constraints.max_abs_rho < 1.0);
  CHECK(bt.phi[0] / phi[0] == doctest::Approx(bt.scale).epsilon(1e-12));
  Vector ok(2);
  ok << 0.2, 0.1;
  BacktrackResult id = backtrack_to_feasible(ok, basis, ws);
  CHECK(id.scale == 1.0);
  CHECK(id.phi == ok);
}
