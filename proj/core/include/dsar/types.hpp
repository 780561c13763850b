#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dsar/common.hpp"

namespace dsar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Balanced panel: outcomes y (d x T), per-period covariate blocks X_t (d x r)
// and optional instrument sources U_t (d x s). Immutable after validate().
struct PanelData {
  Matrix y;                // d x T
  std::vector<Matrix> X;   // T blocks, each d x r
  std::vector<Matrix> U;   // T blocks, each d x s; empty if absent

  int d() const { return static_cast<int>(y.rows()); }
  int T() const { return static_cast<int>(y.cols()); }
  int r() const { return X.empty() ? 0 : static_cast<int>(X.front().cols()); }
  int s() const { return U.empty() ? 0 : static_cast<int>(U.front().cols()); }
  bool has_instruments() const { return !U.empty(); }

  // Checks block shapes and finiteness; throws DataError.
  void validate() const;
};

// Candidate spatial weight matrices W_1..W_p, zero diagonal, d x d.
struct WeightSet {
  std::vector<Matrix> matrices;

  int p() const { return static_cast<int>(matrices.size()); }
  int d() const { return matrices.empty() ? 0 : static_cast<int>(matrices.front().rows()); }

  void validate() const;
};

// Dynamic variables attached to one weight matrix. Term 0 is the implicit
// constant series (identically one) when has_constant is set; the remaining
// terms are the columns of `dynamic` (T x l_j). Saturated indicator bases
// used for change detection drop the constant.
struct MatrixBasis {
  bool has_constant = true;
  Matrix dynamic;  // T x l_j

  int l() const { return static_cast<int>(dynamic.cols()); }
  int terms() const { return (has_constant ? 1 : 0) + l(); }
};

struct DynamicBasis {
  std::vector<MatrixBasis> per_matrix;

  int p() const { return static_cast<int>(per_matrix.size()); }
  int T() const;
  // Total coefficient count across all matrices (p + sum l_j when every
  // matrix carries its constant).
  int total_coefficients() const;

  // z value of `term` (0-based within matrix j, constants first) at time t
  // (0-based).
  double value(int j, int term, int t) const;

  void validate() const;

  static DynamicBasis constants_only(int p, int T);
  // All matrices carry a constant plus l_j iid-supplied dynamic columns.
  static DynamicBasis from_columns(std::vector<Matrix> columns_per_matrix);
};

// Position of coefficient (j, term) in the flat stacked vector: matrices in
// order, constant (if present) before the dynamic terms. 0-based.
int coefficient_index(const DynamicBasis& basis, int j, int term);
// Inverse of coefficient_index.
std::pair<int, int> coefficient_position(const DynamicBasis& basis, int flat);

// Human-readable label "phi[j][k]" with 1-based j and the conventional k
// (k = 0 denotes the constant term).
std::string coefficient_label(const DynamicBasis& basis, int flat);
// The conventional (j 1-based, k with 0 = constant) pair for a flat index.
std::pair<int, int> coefficient_jk(const DynamicBasis& basis, int flat);

// Total spatial correlation at time t (0-based): z_t' phi.
double rho_at(const Vector& phi, const DynamicBasis& basis, int t);

// Stacked z_t vector matching the flat coefficient order.
Vector z_vector(const DynamicBasis& basis, int t);

enum class BicVariant { GrowingL, Fixed };
enum class SelectionCriterion { Bic, ResidualOnly };
enum class ConstraintMode { None, Backtrack };

// Everything needed to turn a PanelData into a fitted model.
struct ModelSpec {
  WeightSet weights;
  DynamicBasis basis;
  int instrument_depth = 1;          // powers of W_j applied to U_t
  std::vector<double> lambda_grid;   // empty -> automatic log-spaced grid
  int lambda_grid_size = 50;
  double lambda_min_ratio = 1e-4;
  BicVariant bic_variant = BicVariant::GrowingL;
  SelectionCriterion selection = SelectionCriterion::Bic;
  int tau_star = -1;                 // autocovariance cut-off; -1 -> floor(T^(1/3))
  std::uint64_t seed = 0;
  ConstraintMode constraints = ConstraintMode::Backtrack;

  void validate(int T) const;
  int effective_tau_star(int T) const;
};

struct LambdaPathPoint {
  double lambda = 0.0;
  double criterion = 0.0;  // BIC or log residual, per selection rule
  int active_count = 0;
};

// Result of the four-step estimation.
struct ModelFit {
  Vector phi;                    // penalized estimate
  Vector phi_ls;                 // initial least squares estimate
  Vector beta;
  Vector mu;
  std::vector<int> active_set;   // indices with phi[i] != 0, sorted
  double lambda = 0.0;
  double bic = 0.0;
  Matrix residuals;              // d x T

  // Diagnostics.
  double max_abs_rho = 0.0;           // max_t |z_t' phi|
  double max_weight_row_norm = 0.0;   // max_t ||sum_j rho_jt W_j||_inf
  double backtrack_scale = 1.0;       // 1 when constraints did not bind
  double kkt_residual = 0.0;          // of the unconstrained minimizer
  std::vector<LambdaPathPoint> path;
};

std::vector<int> nonzero_indices(const Vector& v);

}  // namespace dsar
