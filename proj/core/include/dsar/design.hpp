#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dsar/types.hpp"

namespace dsar {

// Instrument blocks B_t = [U_t, W_1 U_t, ..., W_1^m U_t, ..., W_p^m U_t]
// together with their time average and the uniform combination weights.
struct InstrumentPanel {
  std::vector<Matrix> B;   // T blocks, d x v
  Matrix B_bar;            // d x v
  Vector gamma;            // v, = 1/v each
  Matrix centered;         // d x T; column t = (B_t - B_bar) * gamma

  int v() const { return static_cast<int>(B_bar.cols()); }
  int d() const { return static_cast<int>(B_bar.rows()); }
  int T() const { return static_cast<int>(B.size()); }
};

InstrumentPanel build_instruments(const PanelData& data, const WeightSet& weights, int depth);

// Symmetric positive definite solve guarded by a relative condition number
// bound (1e12). Beyond the bound the solve throws IdentificationError and
// names the offending columns via the supplied labeller.
class GuardedSpd {
 public:
  GuardedSpd() = default;
  GuardedSpd(Matrix m, std::string what, std::function<std::string(int)> label);

  Vector solve(const Vector& rhs) const;
  Matrix solve(const Matrix& rhs) const;
  const Matrix& matrix() const { return mat_; }
  double condition() const { return cond_; }

 private:
  void ensure_ok() const;

  Matrix mat_;
  Eigen::SelfAdjointEigenSolver<Matrix> eig_;
  double cond_ = 0.0;
  bool ok_ = false;
  std::string what_;
  std::string deficient_;
};

// All per-fit matrices of the instrumented, fixed-effect-free formulation.
// Row blocks of the d^2-dimensional augmented moments are indexed by data
// unit (outer) and instrument unit (inner); Kronecker-structured products
// are assembled blockwise rather than materialized.
struct DesignMatrices {
  int d = 0, T = 0, L = 0, v = 0, r = 0;
  double scale = 0.0;  // 1/sqrt(T*d)

  Matrix BtV;    // d^2 x L  augmented design columns
  Vector Bty;    // d^2      augmented outcome
  Matrix XiYW;   // d^2 x L  covariate-projection image of the design
  Vector Xiy;    // d^2      covariate-projection image of the outcome
  Matrix A;      // BtV - XiYW
  Vector b;      // Bty - Xiy
  Matrix G;      // A'A / T
  Vector g;      // A'b / T

  Matrix P;        // r x v   = sum_t X_t' (B_t - B_bar)
  GuardedSpd gram;  // r x r  = P P'
  Vector qy;       // v       = sum_t (B_t - B_bar)' y_t
  Matrix QW;       // v x L   column (j,k): sum_t z_jkt (B_t - B_bar)' W_j y_t
  Matrix yw_proj;  // r x L   = P * QW
  Vector yv_proj;  // r       = P * qy
  Matrix K;        // d^2 x r = sum_t X_t kron c_t (c_t = centered column)

  std::vector<int> structural_zero_cols;  // exactly-zero design columns

  // Profiled covariate coefficients for a given phi.
  Vector beta_of_phi(const Vector& phi) const;
};

DesignMatrices build_design(const PanelData& data, const ModelSpec& spec,
                            const InstrumentPanel& inst);

// Applies the centered-instrument augmentation to an arbitrary d x T panel,
// returning the d^2 moment vector. Used for the outcome, the fixed-effect
// annihilation identity and the direct (unprofiled) objective form.
Vector augmented_moment(const InstrumentPanel& inst, const Matrix& panel);

// d x T panel whose column t is X_t * beta.
Matrix covariate_effect_panel(const PanelData& data, const Vector& beta);

}  // namespace dsar
