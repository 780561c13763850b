#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <dsar/inference.hpp>
#include <dsar/simulation.hpp>

#include "test_util.hpp"

using namespace dsar;

namespace {

struct Instance {
  PanelData data;
  WeightSet ws;
  DynamicBasis basis;
  ModelSpec spec;
  InstrumentPanel inst;
  DesignMatrices design;
};

Instance make_instance(int d, int T, int r, std::uint64_t seed, int p = 1) {
  Rng rng(seed);
  Instance inst;
  inst.data = testutil::random_panel(d, T, r, r, rng);
  inst.ws = testutil::random_weights(d, p, rng);
  std::vector<int> l(static_cast<std::size_t>(p), 1);
  inst.basis = testutil::random_basis(l, T, rng);
  inst.spec.weights = inst.ws;
  inst.spec.basis = inst.basis;
  inst.inst = build_instruments(inst.data, inst.ws, 1);
  inst.design = build_design(inst.data, inst.spec, inst.inst);
  return inst;
}

}  // namespace

TEST_CASE("zero residuals produce a zero long-run moment") {
  Instance in = make_instance(3, 6, 2, 61);
  Matrix zero = Matrix::Zero(3, 6);
  Matrix sigma = estimate_sigma_beta(zero, in.inst, 2);
  CHECK(sigma.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lag-zero moment equals the direct-summation oracle") {
  Instance in = make_instance(4, 8, 2, 67);
  Rng rng(68);
  Matrix eps = testutil::random_matrix(4, 8, rng);
  Matrix sigma = estimate_sigma_beta(eps, in.inst, 0);

  Matrix oracle = Matrix::Zero(in.inst.v(), in.inst.v());
  for (int t = 0; t < 8; ++t) {
    Matrix centered = in.inst.B[size_t(t)] - in.inst.B_bar;
    oracle += centered.transpose() * eps.col(t) * eps.col(t).transpose() * centered;
  }
  oracle /= 8.0;
  CHECK((sigma - oracle).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("truncated moment is symmetric and deterministic") {
  Instance in = make_instance(4, 12, 2, 71);
  Rng rng(72);
  Matrix eps = testutil::random_matrix(4, 12, rng);
  Matrix a = estimate_sigma_beta(eps, in.inst, 3);
  Matrix b = estimate_sigma_beta(eps, in.inst, 3);
  CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) CHECK(a(i, j) == b(i, j));  // bit-equal

  CHECK_THROWS_AS(estimate_sigma_beta(eps, in.inst, 12), ConfigError);
}

TEST_CASE("sample moment matrices are the rescaled design blocks") {
  Instance in = make_instance(4, 9, 2, 73);
  auto [h10, h20] = sample_h_matrices(in.design);
  double s = std::sqrt(4.0 / 9.0);
  CHECK((h10 - s * in.design.BtV).cwiseAbs().maxCoeff() == 0.0);
  CHECK((h20 - s * in.design.XiYW).cwiseAbs().maxCoeff() == 0.0);

  // Quadratic identity used downstream: (H20-H10)'(H20-H10) = (d/T) A'A.
  Matrix diff = h20 - h10;
  Matrix lhs = diff.transpose() * diff;
  Matrix rhs = (4.0 / 9.0) * (in.design.A.transpose() * in.design.A);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
}

TEST_CASE("zero panels give zero moment matrices") {
  Instance in = make_instance(3, 5, 2, 79);
  PanelData zero = in.data;
  zero.y.setZero();
  DesignMatrices design = build_design(zero, in.spec, in.inst);
  auto [h10, h20] = sample_h_matrices(design);
  CHECK(h10.cwiseAbs().maxCoeff() == 0.0);
  CHECK(h20.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("theorem-product covariance matches a factor-by-factor oracle") {
  Instance in = make_instance(2, 4, 2, 83);
  Rng rng(84);
  Matrix eps = testutil::random_matrix(2, 4, rng);
  std::vector<int> H{0, 1};
  const int tau = 1;
  CovarianceEstimate cov =
      covariance_phi(H, eps, in.data, in.inst, in.design, in.basis, tau);

  // Oracle: every factor from raw definitions.
  const int d = 2, T = 4, v = in.inst.v(), r = 2;
  double s = std::sqrt(double(d) / double(T));
  Matrix D = s * (in.design.XiYW - in.design.BtV);  // full: H is everything here

  Matrix sgam = Matrix::Zero(d * d, r);
  for (int i = 0; i < d; ++i) {
    for (int ip = 0; ip < d; ++ip) {
      Vector row = Vector::Zero(r);
      for (int t = 0; t < T; ++t) {
        double c = (in.inst.B[size_t(t)].row(ip) - in.inst.B_bar.row(ip)).dot(in.inst.gamma);
        row += c * in.data.X[size_t(t)].row(i).transpose();
      }
      sgam.row(i * d + ip) = row.transpose() / double(T);
    }
  }

  Matrix xb = Matrix::Zero(r, v);
  for (int t = 0; t < T; ++t) xb += in.data.X[size_t(t)].transpose() * in.inst.B[size_t(t)];
  xb /= double(T);
  Matrix r_beta = (xb * xb.transpose()).inverse() * xb;

  Matrix sigma = Matrix::Zero(v, v);
  for (int dt = -tau; dt <= tau; ++dt) {
    for (int t = 0; t < T; ++t) {
      int u = t + dt;
      if (u < 0 || u >= T) continue;
      Matrix bc_t = in.inst.B[size_t(t)] - in.inst.B_bar;
      Matrix bc_u = in.inst.B[size_t(u)] - in.inst.B_bar;
      sigma += bc_t.transpose() * eps.col(t) * eps.col(u).transpose() * bc_u;
    }
  }
  sigma /= double(T);
  sigma = 0.5 * (sigma + sigma.transpose());

  Matrix rh = (D.transpose() * D).inverse() * D.transpose();
  Matrix oracle = rh * sgam * r_beta * sigma * r_beta.transpose() * sgam.transpose() *
                  rh.transpose() / double(T);
  oracle = 0.5 * (oracle + oracle.transpose());

  CHECK((cov.sandwich - oracle).cwiseAbs().maxCoeff() <=
        1e-10 * std::max(1.0, oracle.cwiseAbs().maxCoeff()));
}

TEST_CASE("reported covariance matches an independent influence-sum oracle") {
  Instance in = make_instance(3, 7, 2, 85, 2);
  Rng rng(86);
  Matrix eps = testutil::random_matrix(3, 7, rng);
  std::vector<int> H{0, 2};
  const int tau = 2;
  CovarianceEstimate cov =
      covariance_phi(H, eps, in.data, in.inst, in.design, in.basis, tau);

  // Oracle: per-period influence terms from raw definitions (dense
  // augmentation, explicit Kronecker for K) and a tau-descending HAC sum.
  const int d = 3, T = 7, r = 2;
  double scale = 1.0 / std::sqrt(double(d) * double(T));
  Matrix B = testutil::dense_augmentation(in.inst);  // dT x d^2

  Matrix K = Matrix::Zero(d * d, r);
  for (int t = 0; t < T; ++t) {
    Vector c_t = (in.inst.B[size_t(t)] - in.inst.B_bar) * in.inst.gamma;
    for (int i = 0; i < d; ++i)
      for (int ip = 0; ip < d; ++ip)
        for (int col = 0; col < r; ++col)
          K(i * d + ip, col) += in.data.X[size_t(t)](i, col) * c_t[ip];
  }
  Matrix P = Matrix::Zero(r, in.inst.v());
  for (int t = 0; t < T; ++t)
    P += in.data.X[size_t(t)].transpose() * (in.inst.B[size_t(t)] - in.inst.B_bar);
  Matrix gram_inv = (P * P.transpose()).inverse();

  Matrix AH(d * d, 2);
  for (size_t a = 0; a < H.size(); ++a) AH.col((int)a) = in.design.A.col(H[a]);
  Matrix rt = (AH.transpose() * AH).inverse() * AH.transpose();

  Matrix V(2, T);
  for (int t = 0; t < T; ++t) {
    // Direct-channel moment via the dense augmentation of a one-period panel.
    Matrix panel = Matrix::Zero(d, T);
    panel.col(t) = eps.col(t);
    Vector direct = B.transpose() * testutil::stacked_outcome([&] {
      dsar::PanelData p = in.data;
      p.y = panel;
      return p;
    }());
    Vector e_t = (in.inst.B[size_t(t)] - in.inst.B_bar).transpose() * eps.col(t);
    Vector w = direct - scale * (K * (gram_inv * (P * e_t)));
    V.col(t) = rt * w;
  }
  Matrix oracle = Matrix::Zero(2, 2);
  for (int dt = tau; dt >= -tau; --dt) {
    for (int t = 0; t < T; ++t) {
      int u = t + dt;
      if (u < 0 || u >= T) continue;
      oracle += V.col(t) * V.col(u).transpose();
    }
  }
  oracle = 0.5 * (oracle + oracle.transpose());
  CHECK((cov.cov - oracle).cwiseAbs().maxCoeff() <=
        1e-10 * std::max(1.0, oracle.cwiseAbs().maxCoeff()));
}

TEST_CASE("covariance is symmetric and PSD on a larger random instance") {
  Instance in = make_instance(6, 20, 3, 89, 2);
  Rng rng(90);
  Matrix eps = testutil::random_matrix(6, 20, rng);
  std::vector<int> H{0, 2, 3};
  CovarianceEstimate cov = covariance_phi(H, eps, in.data, in.inst, in.design, in.basis, 2);
  CHECK((cov.cov - cov.cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov.cov);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * cov.cov.cwiseAbs().maxCoeff());
  for (int i = 0; i < cov.se.size(); ++i) CHECK(cov.se[i] >= 0.0);
}

TEST_CASE("zero residuals give a zero covariance") {
  Instance in = make_instance(3, 6, 2, 91);
  Matrix zero = Matrix::Zero(3, 6);
  std::vector<int> H{0, 1};
  CovarianceEstimate cov = covariance_phi(H, zero, in.data, in.inst, in.design, in.basis, 1);
  CHECK(cov.cov.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("empty active set is an inference error") {
  Instance in = make_instance(3, 6, 2, 93);
  Matrix eps = Matrix::Zero(3, 6);
  CHECK_THROWS_AS(covariance_phi({}, eps, in.data, in.inst, in.design, in.basis, 0),
                  InferenceError);
}

TEST_CASE("rho inference with constant-only activity sums the intercepts") {
  DynamicBasis basis = DynamicBasis::constants_only(2, 5);
  Vector phi(2);
  phi << 0.3, -0.1;
  CovarianceEstimate cov;
  cov.H = {0, 1};
  cov.cov = Matrix::Identity(2, 2) * 0.01;
  cov.se = cov.cov.diagonal().cwiseSqrt();
  RhoInference ri = infer_rho(phi, cov, basis, 2, 0.95);
  CHECK(ri.rho == doctest::Approx(0.2).epsilon(1e-14));
  // Hand quadratic form: var = 0.01 + 0.01 = 0.02.
  CHECK(ri.se == doctest::Approx(std::sqrt(0.02)).epsilon(1e-12));
  double half = 1.959963984540054 * ri.se;
  CHECK(ri.upper - ri.rho == doctest::Approx(half).epsilon(1e-9));
  CHECK(ri.rho - ri.lower == doctest::Approx(half).epsilon(1e-9));
}

TEST_CASE("doubling the basis values doubles the interval half-width") {
  Rng rng(97);
  DynamicBasis basis = testutil::random_basis({2}, 4, rng);
  DynamicBasis doubled = basis;
  doubled.per_matrix[0].dynamic *= 2.0;

  Vector phi(3);
  phi << 0.0, 0.2, -0.1;  // constant inactive so rho scales exactly
  CovarianceEstimate cov;
  cov.H = {1, 2};
  Matrix root = testutil::random_matrix(2, 2, rng);
  cov.cov = root * root.transpose() + 0.05 * Matrix::Identity(2, 2);
  cov.se = cov.cov.diagonal().cwiseSqrt();

  RhoInference a = infer_rho(phi, cov, basis, 1, 0.95);
  RhoInference b = infer_rho(phi, cov, doubled, 1, 0.95);
  CHECK(b.upper - b.lower == doctest::Approx(2.0 * (a.upper - a.lower)).epsilon(1e-12));
}

TEST_CASE("hand-sized rho interval from a known 2x2 covariance") {
  DynamicBasis basis = DynamicBasis::constants_only(2, 3);
  Vector phi(2);
  phi << 0.5, 0.25;
  CovarianceEstimate cov;
  cov.H = {0, 1};
  cov.cov.resize(2, 2);
  cov.cov << 0.04, 0.01,
             0.01, 0.09;
  cov.se = cov.cov.diagonal().cwiseSqrt();
  RhoInference ri = infer_rho(phi, cov, basis, 0, 0.95);
  // var = 0.04 + 2*0.01 + 0.09 = 0.15
  CHECK(ri.rho == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(ri.se == doctest::Approx(std::sqrt(0.15)).epsilon(1e-12));

  CovarianceEstimate degenerate;
  degenerate.H = {0, 1};
  degenerate.cov = Matrix::Zero(2, 2);
  degenerate.se = Vector::Zero(2);
  CHECK_THROWS_AS(infer_rho(phi, degenerate, basis, 0, 0.95), InferenceError);
}

TEST_CASE("standard errors shrink roughly like 1/sqrt(T)") {
  // Same DGP at T and 4T; the mean standard error should shrink by about a
  // half (allow a generous band).
  auto mean_se = [](int T, std::uint64_t seed) {
    DgpSpec dgp;
    dgp.d = 20;
    dgp.T = T;
    dgp.weights = {WeightGen{WeightGen::Kind::AheadBehind, 2},
                   WeightGen{WeightGen::Kind::Bernoulli, 0, 0.2}};
    dgp.mu = Vector::Ones(20);
    dgp.beta = Vector::Ones(3);
    dgp.noise.kind = NoiseSpec::Kind::IidGaussian;
    VaryingCoefDgp vc;
    vc.l = {2, 2};
    vc.phi.resize(6);
    vc.phi << 0.0, -0.3, 0.3, 0.0, 0.0, 0.0;
    dgp.spatial = vc;
    dgp.seed = seed;

    double total = 0.0;
    const int reps = 8;
    for (int repetition = 0; repetition < reps; ++repetition) {
      Rng rng = Rng::for_replication(seed, static_cast<std::uint64_t>(repetition));
      Simulated sim = simulate(dgp, rng);
      ModelSpec spec;
      spec.weights = sim.weights;
      spec.basis = sim.truth.basis;
      InstrumentPanel inst = build_instruments(sim.data, spec.weights, 1);
      DesignMatrices design = build_design(sim.data, spec, inst);
      std::vector<int> H{1, 2};
      Vector phi = ls_phi_restricted(design, H);
      Vector beta = profiled_beta(phi, design);
      Vector mu = estimate_mu(phi, beta, sim.data, spec.basis, spec.weights);
      Matrix resid = residual_panel(sim.data, spec, phi, beta, mu);
      CovarianceEstimate cov = covariance_phi(H, resid, sim.data, inst, design, spec.basis,
                                              spec.effective_tau_star(T));
      total += cov.se.mean();
    }
    return total / reps;
  };

  double se_small = mean_se(50, 617);
  double se_large = mean_se(200, 618);
  double ratio = se_large / se_small;  // two doublings: expect about 0.5
  CHECK(ratio > 0.3);
  CHECK(ratio < 0.8);
}
