#include "dsar/inference.hpp"

#include <cmath>

namespace dsar {

Matrix estimate_sigma_beta(const Matrix& residuals, const InstrumentPanel& inst, int tau_star) {
  const int T = inst.T();
  const int v = inst.v();
  if (tau_star < 0 || tau_star >= T)
    throw ConfigError("sigma_beta: tau_star must be in [0, T)");

  Matrix E(v, T);  // column t = (B_t - B_bar)' eps_t
  for (int t = 0; t < T; ++t)
    E.col(t).noalias() =
        (inst.B[static_cast<std::size_t>(t)] - inst.B_bar).transpose() * residuals.col(t);

  Matrix sigma = Matrix::Zero(v, v);
  sigma.noalias() = E * E.transpose();
  for (int tau = 1; tau <= tau_star; ++tau) {
    Matrix m = E.leftCols(T - tau) * E.rightCols(T - tau).transpose();
    sigma += m + m.transpose();
  }
  sigma /= static_cast<double>(T);
  return 0.5 * (sigma + sigma.transpose());
}

std::pair<Matrix, Matrix> sample_h_matrices(const DesignMatrices& design) {
  double s = std::sqrt(static_cast<double>(design.d) / static_cast<double>(design.T));
  return {s * design.BtV, s * design.XiYW};
}

namespace {

Matrix clip_to_psd(Matrix cov, const char* what) {
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  double lo = eig.eigenvalues().minCoeff();
  if (lo < 0.0) {
    if (lo < -1e-10 * std::max(1e-300, cov.cwiseAbs().maxCoeff()))
      warn(std::string(what) + ": clipping negative eigenvalue " + std::to_string(lo) +
           " to zero");
    Vector clipped = eig.eigenvalues().cwiseMax(0.0);
    cov = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    cov = 0.5 * (cov + cov.transpose());
  }
  return cov;
}

}  // namespace

CovarianceEstimate covariance_phi(const std::vector<int>& H, const Matrix& residuals,
                                  const PanelData& data, const InstrumentPanel& inst,
                                  const DesignMatrices& design, const DynamicBasis& basis,
                                  int tau_star) {
  if (H.empty()) throw InferenceError("covariance: active set is empty");
  const int h = static_cast<int>(H.size());
  const int d = design.d;
  const int T = design.T;
  const int r = design.r;
  const int v = design.v;

  CovarianceEstimate out;
  out.H = H;
  out.tau_star = tau_star;

  Matrix AH(d * d, h);
  for (int a = 0; a < h; ++a) AH.col(a) = design.A.col(H[static_cast<std::size_t>(a)]);

  GuardedSpd normal_h = [&]() {
    try {
      return GuardedSpd(AH.transpose() * AH, "active-set design", [&](int i) {
        return coefficient_label(basis, H[static_cast<std::size_t>(i)]);
      });
    } catch (const IdentificationError& e) {
      throw InferenceError(std::string("covariance: ") + e.what());
    }
  }();

  // Per-period influence of the noise on the restricted estimator.
  Matrix AHK = AH.transpose() * design.K;  // h x r
  Matrix influence(h, T);
  for (int t = 0; t < T; ++t) {
    Vector e_t = (inst.B[static_cast<std::size_t>(t)] - inst.B_bar).transpose() * residuals.col(t);
    Vector q_t = design.gram.solve(Vector(design.P * e_t));
    Matrix outer = inst.centered.col(t) * residuals.col(t).transpose();  // d x d
    Vector contracted = AH.transpose() * Eigen::Map<Vector>(outer.data(), d * d);
    influence.col(t) = normal_h.solve(Vector(design.scale * (contracted - AHK * q_t)));
  }

  Matrix cov = influence * influence.transpose();
  int effective_tau = std::min(tau_star, T - 1);
  for (int tau = 1; tau <= effective_tau; ++tau) {
    Matrix g = influence.leftCols(T - tau) * influence.rightCols(T - tau).transpose();
    cov += g + g.transpose();
  }
  out.cov = clip_to_psd(std::move(cov), "covariance");
  out.se = out.cov.diagonal().cwiseMax(0.0).cwiseSqrt();

  // Theorem-product plug-in, assembled from the same sample analogues.
  out.sigma_beta = estimate_sigma_beta(residuals, inst, tau_star);
  Matrix xb = Matrix::Zero(r, v);  // (1/T) sum_t X_t' B_t, uncentered
  for (int t = 0; t < T; ++t)
    xb.noalias() +=
        data.X[static_cast<std::size_t>(t)].transpose() * inst.B[static_cast<std::size_t>(t)];
  xb /= static_cast<double>(T);
  try {
    GuardedSpd gxb(xb * xb.transpose(), "instrument-covariate moment",
                   [](int i) { return "x" + std::to_string(i + 1); });
    out.r_beta = gxb.solve(xb);
  } catch (const IdentificationError& e) {
    throw InferenceError(std::string("covariance: ") + e.what());
  }
  // R_hat S_gamma: with D = (H20 - H10)_H = -sqrt(d/T) A_H and S_gamma = K/T,
  // (D'D)^{-1} D' S_gamma = -(A_H'A_H)^{-1} A_H' K / (sqrt(d/T) T).
  double s = std::sqrt(static_cast<double>(d) / static_cast<double>(T));
  Matrix rs = -normal_h.solve(AHK) / (s * static_cast<double>(T));
  Matrix mid = out.r_beta * out.sigma_beta * out.r_beta.transpose();
  out.sandwich =
      clip_to_psd(Matrix((rs * mid * rs.transpose()) / static_cast<double>(T)), "sandwich");
  return out;
}

CovarianceEstimate covariance_phi(const ModelFit& fit, const PanelData& data,
                                  const ModelSpec& spec, const InstrumentPanel& inst,
                                  const DesignMatrices& design) {
  return covariance_phi(fit.active_set, fit.residuals, data, inst, design, spec.basis,
                        spec.effective_tau_star(data.T()));
}

RhoInference infer_rho(const Vector& phi, const CovarianceEstimate& cov,
                       const DynamicBasis& basis, int t, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("infer_rho: level must be in (0,1)");
  Vector z = z_vector(basis, t);
  RhoInference out;
  Vector zh(static_cast<int>(cov.H.size()));
  for (std::size_t a = 0; a < cov.H.size(); ++a) {
    out.rho += z[cov.H[a]] * phi[cov.H[a]];
    zh[static_cast<int>(a)] = z[cov.H[a]];
  }
  double variance = zh.dot(cov.cov * zh);
  if (variance <= 0.0)
    throw InferenceError("infer_rho: nonpositive variance, degenerate confidence interval");
  out.se = std::sqrt(variance);
  double q = normal_quantile(0.5 + level / 2.0);
  out.lower = out.rho - q * out.se;
  out.upper = out.rho + q * out.se;
  return out;
}

}  // namespace dsar
