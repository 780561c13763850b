#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <dsar/experiments.hpp>
#include <dsar/simulation.hpp>
#include <dsar/weights.hpp>

#include <fstream>

#include "test_util.hpp"

using namespace dsar;

TEST_CASE("ahead-behind weights are circulant with normalized rows") {
  Matrix w = gen_weight_ahead_behind(5, 2);
  for (int i = 0; i < 5; ++i) {
    CHECK(w(i, i) == 0.0);
    int nonzeros = 0;
    for (int j = 0; j < 5; ++j) {
      if (w(i, j) != 0.0) {
        ++nonzeros;
        CHECK(w(i, j) == doctest::Approx(0.25).epsilon(1e-15));
      }
    }
    CHECK(nonzeros == 4);
  }

  CHECK(gen_weight_ahead_behind(7, 0).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(gen_weight_ahead_behind(4, 2), ConfigError);

  Matrix big = gen_weight_ahead_behind(9, 3);
  CHECK(big.diagonal().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bernoulli contiguity weights") {
  Rng rng(3);
  CHECK(gen_weight_bernoulli(6, 0.0, rng).cwiseAbs().maxCoeff() == 0.0);

  Matrix full = gen_weight_bernoulli(3, 1.0, rng);
  for (int i = 0; i < 3; ++i) {
    CHECK(full(i, i) == 0.0);
    for (int j = 0; j < 3; ++j) {
      if (j != i) CHECK(full(i, j) == doctest::Approx(0.5).epsilon(1e-15));
    }
  }

  // Law-of-large-numbers density check before normalization zeros nothing.
  double density = 0.0;
  const int draws = 1000;
  Rng rng2(5);
  for (int n = 0; n < draws; ++n) {
    Matrix w = gen_weight_bernoulli(50, 0.2, rng2);
    int nonzero = 0;
    for (int i = 0; i < 50; ++i)
      for (int j = 0; j < 50; ++j) nonzero += (i != j && w(i, j) != 0.0) ? 1 : 0;
    density += double(nonzero) / double(50 * 49);
  }
  density /= draws;
  CHECK(density == doctest::Approx(0.2).epsilon(0.1));
  CHECK(std::abs(density - 0.2) < 0.02);

  Rng rng3(7);
  Matrix sym = gen_weight_bernoulli(20, 0.3, rng3, true);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) CHECK((sym(i, j) != 0.0) == (sym(j, i) != 0.0));
}

TEST_CASE("zero weight matrices reduce the outcome to mu + X beta") {
  DgpSpec dgp;
  dgp.d = 6;
  dgp.T = 10;
  dgp.weights = {WeightGen{WeightGen::Kind::Bernoulli, 0, 0.0}};
  dgp.mu = Vector::Constant(6, 0.5);
  dgp.beta = Vector::Ones(2);
  dgp.x.cols = 2;
  dgp.noise.kind = NoiseSpec::Kind::None;
  VaryingCoefDgp vc;
  vc.l = {1};
  vc.phi = Vector::Zero(2);
  dgp.spatial = vc;
  dgp.seed = 9;
  Simulated sim = simulate(dgp);
  for (int t = 0; t < 10; ++t) {
    Vector expected = dgp.mu + sim.data.X[size_t(t)] * dgp.beta;
    CHECK((sim.data.y.col(t) - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("simulation is bit-identical under a fixed seed") {
  DgpSpec dgp;
  dgp.d = 8;
  dgp.T = 12;
  dgp.weights = {WeightGen{WeightGen::Kind::AheadBehind, 2},
                 WeightGen{WeightGen::Kind::Bernoulli, 0, 0.2}};
  dgp.mu = Vector::Ones(8);
  dgp.beta = Vector::Ones(3);
  dgp.x.endogenous_add = 0.5;
  VaryingCoefDgp vc;
  vc.l = {2, 2};
  vc.phi.resize(6);
  vc.phi << 0.2, 0.2, 0.0, 0.0, 0.0, 0.3;
  dgp.spatial = vc;
  dgp.seed = 31;
  Simulated a = simulate(dgp);
  Simulated b = simulate(dgp);
  CHECK((a.data.y - b.data.y).cwiseAbs().maxCoeff() == 0.0);
  for (int t = 0; t < 12; ++t) {
    CHECK((a.data.X[size_t(t)] - b.data.X[size_t(t)]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.data.U[size_t(t)] - b.data.U[size_t(t)]).cwiseAbs().maxCoeff() == 0.0);
  }
  for (int j = 0; j < 2; ++j)
    CHECK((a.weights.matrices[size_t(j)] - b.weights.matrices[size_t(j)]).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("endogenous covariates keep an exogenous copy for the instruments") {
  DgpSpec dgp;
  dgp.d = 5;
  dgp.T = 8;
  dgp.weights = {WeightGen{WeightGen::Kind::AheadBehind, 1}};
  dgp.mu = Vector::Zero(5);
  dgp.beta = Vector::Ones(3);
  dgp.x.endogenous_add = 0.5;
  dgp.noise.kind = NoiseSpec::Kind::IidGaussian;
  VaryingCoefDgp vc;
  vc.l = {1};
  vc.phi = Vector::Zero(2);
  dgp.spatial = vc;
  dgp.seed = 17;
  Simulated sim = simulate(dgp);
  for (int t = 0; t < 8; ++t) {
    // First two columns coincide; the third differs by the added noise.
    CHECK((sim.data.X[size_t(t)].leftCols(2) - sim.data.U[size_t(t)].leftCols(2))
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((sim.data.X[size_t(t)].col(2) - sim.data.U[size_t(t)].col(2)).cwiseAbs().maxCoeff() >
          0.0);
  }
}

TEST_CASE("two-unit swap system solves to the hand value") {
  const std::string path = "/tmp/dsar_test_swap.csv";
  {
    std::ofstream out(path);
    out << "0,0.5\n0.5,0\n";
  }
  DgpSpec dgp;
  dgp.d = 2;
  dgp.T = 1;
  WeightGen gen;
  gen.kind = WeightGen::Kind::FromFile;
  gen.path = path;
  dgp.weights = {gen};
  dgp.mu = Vector::Ones(2);
  dgp.beta = Vector(0);
  dgp.x.cols = 0;
  dgp.noise.kind = NoiseSpec::Kind::None;
  StepBreaksDgp steps;
  steps.rho = {{{1, 1.0}}};  // coefficient 1 on the 0.5-swap matrix
  dgp.spatial = steps;
  dgp.seed = 1;
  Simulated sim = simulate(dgp);
  std::remove(path.c_str());
  // (I - 0.5 swap) y = (1,1)  =>  y = (2,2).
  CHECK(sim.data.y(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(sim.data.y(1, 0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("stationarity violations are recorded and optionally fatal") {
  DgpSpec dgp;
  dgp.d = 6;
  dgp.T = 5;
  dgp.weights = {WeightGen{WeightGen::Kind::AheadBehind, 2}};
  dgp.mu = Vector::Zero(6);
  dgp.beta = Vector::Ones(1);
  dgp.x.cols = 1;
  dgp.noise.kind = NoiseSpec::Kind::None;
  StepBreaksDgp steps;
  steps.rho = {{{2, 0.5}, {5, 1.2}}};  // second regime violates |rho| < 1
  dgp.spatial = steps;
  dgp.seed = 3;
  set_warning_handler([](const std::string&) {});
  Simulated sim = simulate(dgp);
  set_warning_handler(nullptr);
  CHECK(sim.truth.stationarity_violations == 3);
  CHECK(sim.truth.max_abs_rho == doctest::Approx(1.2));

  dgp.strict_stationarity = true;
  CHECK_THROWS_AS(simulate(dgp), DgpError);
}

TEST_CASE("fit metrics count selection outcomes") {
  Vector truth(6);
  truth << 0.2, 0.2, 0.0, 0.0, 0.0, 0.3;
  Vector est = truth;
  CHECK(mean_squared_error(est, truth) == 0.0);
  CHECK(specificity(est, truth) == 1.0);
  CHECK(sensitivity(est, truth) == 1.0);

  Vector partial(6);
  partial << 0.2, 0.0, 0.0, 0.0, 0.0, 0.3;
  CHECK(sensitivity(partial, truth) == doctest::Approx(2.0 / 3.0));
  CHECK(specificity(partial, truth) == 1.0);

  Vector noisy(6);
  noisy << 0.2, 0.2, 0.01, 0.0, 0.0, 0.3;
  CHECK(specificity(noisy, truth) == doctest::Approx(2.0 / 3.0));
  CHECK(sensitivity(noisy, truth) == 1.0);

  Vector half(6);
  half << 0.1, 0.2, 0.0, 0.0, 0.0, 0.3;
  CHECK(mean_squared_error(half, truth) == doctest::Approx(0.01 / 6.0).epsilon(1e-12));
}

TEST_CASE("replication driver aggregates deterministically across worker counts") {
  auto body = [](int rep) {
    Rng rng = Rng::for_replication(123, static_cast<std::uint64_t>(rep));
    Vector row(2);
    row << rng.normal(), rng.uniform();
    return row;
  };
  McSummary one = run_replications({"a", "b"}, 16, 1, body);
  McSummary four = run_replications({"a", "b"}, 16, 4, body);
  CHECK(one.mean[0] == four.mean[0]);
  CHECK(one.mean[1] == four.mean[1]);
  CHECK(one.sd[0] == four.sd[0]);

  McSummary single = run_replications({"a", "b"}, 1, 4, body);
  CHECK(single.sd[0] == 0.0);
  CHECK(single.sd[1] == 0.0);
  CHECK(single.mean[0] == single.per_rep(0, 0));
}

TEST_CASE("excess replication failures abort the run") {
  auto body = [](int rep) {
    if (rep % 3 == 0) throw DgpError("boom");
    return Vector::Ones(1);
  };
  CHECK_THROWS_WITH_AS(run_replications({"a"}, 12, 2, body), doctest::Contains("more than 5%"),
                       Error);

  // A single failure in twenty-one replications is tolerated and excluded.
  auto rare = [](int rep) {
    if (rep == 7) throw DgpError("boom");
    Vector row(1);
    row << static_cast<double>(rep);
    return row;
  };
  McSummary summary = run_replications({"a"}, 21, 2, rare);
  CHECK(summary.failures == 1);
  double expect = (21.0 * 20.0 / 2.0 - 7.0) / 20.0;
  CHECK(summary.mean[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("generated weight rows stay inside the stationarity budget") {
  Rng rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix w = gen_weight_bernoulli(30, 0.2, rng);
    CHECK(w.cwiseAbs().rowwise().sum().maxCoeff() <=
          1.0 + 64.0 * std::numeric_limits<double>::epsilon());
  }
}

TEST_CASE("monte carlo fit summary on a tiny noiseless design is exact") {
  DgpSpec dgp;
  dgp.d = 10;
  dgp.T = 25;
  dgp.weights = {WeightGen{WeightGen::Kind::AheadBehind, 2},
                 WeightGen{WeightGen::Kind::Bernoulli, 0, 0.2}};
  dgp.mu = Vector::Ones(10);
  dgp.beta = Vector::Ones(3);
  dgp.noise.kind = NoiseSpec::Kind::None;
  VaryingCoefDgp vc;
  vc.l = {2, 2};
  vc.phi.resize(6);
  vc.phi << 0.2, 0.2, 0.0, 0.0, 0.0, 0.3;
  dgp.spatial = vc;
  dgp.seed = 77;
  ModelOptions options;
  // A tiny penalty zeroes the dead coordinates (their capped adaptive
  // weights are huge) without visibly shrinking the active ones.
  options.lambda_grid = {1e-6};
  options.constraints = ConstraintMode::None;
  McSummary summary = monte_carlo_fit(dgp, options, 3, 2);
  CHECK(summary.mean[0] < 1e-6);  // mse_phi: only the tiny penalty bias remains
  CHECK(summary.mean[3] == 1.0);   // specificity
  CHECK(summary.mean[4] == 1.0);   // sensitivity
}
