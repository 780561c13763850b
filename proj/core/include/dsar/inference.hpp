#pragma once

#include "dsar/design.hpp"
#include "dsar/estimator.hpp"
#include "dsar/types.hpp"

namespace dsar {

// Plug-in covariance of the active coefficients.
//
// The reported `cov` is the truncated HAC variance of the estimator's
// per-period influence terms
//   v_t = [A_H' A_H]^{-1} A_H' w_t,
//   w_t = scale * ( vec(c_t eps_t') - K Gram^{-1} P (B_t - B_bar)' eps_t ),
// which is the exact sample analogue of the noise entering the restricted
// estimator (the two terms are the direct instrument channel and the
// profiled-covariate channel). `sandwich` is the asymptotic-theory product
// T^{-1} R_H S_gamma R_beta Sigma_beta R_beta' S_gamma' R_H'; it only
// carries the covariate channel, which can be dominated in finite samples,
// and is kept for diagnostics.
struct CovarianceEstimate {
  std::vector<int> H;     // active coordinates, sorted, 0-based
  Matrix cov;             // |H| x |H| influence HAC, symmetric PSD
  Vector se;              // sqrt of the diagonal of cov
  Matrix sandwich;        // |H| x |H| theorem-product plug-in
  Matrix sigma_beta;      // v x v truncated long-run noise moment
  Matrix r_beta;          // r x v
  int tau_star = 0;
};

// Truncated long-run second moment of the instrumented residuals:
// sum over |tau| <= tau_star of (1/T) sum_t E_t E_{t+tau}' with
// E_t = (B_t - B_bar)' eps_t, symmetrized.
Matrix estimate_sigma_beta(const Matrix& residuals, const InstrumentPanel& inst, int tau_star);

// Sample analogues of the population design moments: the rescaled augmented
// design blocks sqrt(d/T) * BtV and sqrt(d/T) * XiYW.
std::pair<Matrix, Matrix> sample_h_matrices(const DesignMatrices& design);

// Covariance for an explicit active set H and residual panel.
CovarianceEstimate covariance_phi(const std::vector<int>& H, const Matrix& residuals,
                                  const PanelData& data, const InstrumentPanel& inst,
                                  const DesignMatrices& design, const DynamicBasis& basis,
                                  int tau_star);

// Convenience overload driven by a completed fit.
CovarianceEstimate covariance_phi(const ModelFit& fit, const PanelData& data,
                                  const ModelSpec& spec, const InstrumentPanel& inst,
                                  const DesignMatrices& design);

struct RhoInference {
  double rho = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// Point estimate and CI for the total spatial correlation at time t
// (0-based). Only meaningful when the basis series are non-stochastic;
// the caller is responsible for that restriction.
RhoInference infer_rho(const Vector& phi, const CovarianceEstimate& cov,
                       const DynamicBasis& basis, int t, double level);

}  // namespace dsar
