#pragma once

#include <limits>
#include <string>
#include <variant>

#include "dsar/changepoint.hpp"
#include "dsar/rng.hpp"
#include "dsar/types.hpp"
#include "dsar/weights.hpp"

namespace dsar {

// ---- weight matrix generators ----

// Circulant adjacency with k neighbors on each side, then row-normalized.
Matrix gen_weight_ahead_behind(int d, int k);
// Independent Bernoulli(p) off-diagonal adjacency (optionally symmetrized),
// then row-normalized.
Matrix gen_weight_bernoulli(int d, double p, Rng& rng, bool symmetric = false);

struct WeightGen {
  enum class Kind { AheadBehind, Bernoulli, FromFile };
  Kind kind = Kind::AheadBehind;
  int k = 2;                  // AheadBehind
  double p = 0.2;             // Bernoulli
  bool symmetric = false;     // Bernoulli
  std::string path;           // FromFile
  WeightFormat format = WeightFormat::DenseCsv;
};

// ---- noise / covariates ----

struct NoiseSpec {
  enum class Kind { SparseCorrGaussian, IidGaussian, StudentT, None };
  Kind kind = Kind::SparseCorrGaussian;
  double offdiag = 0.1;  // SparseCorrGaussian entry value
  double prob = 0.2;     // SparseCorrGaussian entry probability
  int df = 6;            // StudentT degrees of freedom
  // Rescale Student-t draws to unit variance (raw variance is df/(df-2)).
  bool standardize_t = false;
};

struct CovariateGen {
  int cols = 3;
  // Magnitude of the noise added to the last column; the clean copy is kept
  // as the instrument source. Zero means fully exogenous (U = X).
  double endogenous_add = 0.0;
};

// ---- spatial coefficient paths ----

// z_{j,k,t} iid standard normal with the given per-matrix counts; the truth
// phi is in the implied (constants-first) coordinates.
struct VaryingCoefDgp {
  std::vector<int> l;
  Vector phi;
};

// Piecewise-constant rho_j(t): `value` holds on (previous end, end_t].
struct StepSegment {
  int end_t = 0;
  double value = 0.0;
};
struct StepBreaksDgp {
  std::vector<std::vector<StepSegment>> rho;  // one list per weight matrix
};

struct ThresholdDriver {
  enum class Kind { Ar, SelfExcitingMean };
  Kind kind = Kind::Ar;
  std::vector<double> ar_coef{0.4, 0.2, 0.1, 0.05, 0.05};
  int lag = 1;  // SelfExcitingMean: q_t = mean(y_{t-lag}); zero before data
};

struct ThresholdDgp {
  ThresholdDriver driver;
  double gamma = 0.0;
  Vector rho_le;  // per matrix, regime q_t <= gamma
  Vector rho_gt;  // per matrix, regime q_t > gamma
};

using SpatialDgp = std::variant<VaryingCoefDgp, StepBreaksDgp, ThresholdDgp>;

struct DgpSpec {
  int d = 0;
  int T = 0;
  std::vector<WeightGen> weights;
  Vector mu;
  Vector beta;
  CovariateGen x;
  NoiseSpec noise;
  SpatialDgp spatial;
  std::uint64_t seed = 0;
  bool strict_stationarity = false;
};

struct Truth {
  Vector phi;                 // varying-coefficient truth (empty otherwise)
  Vector mu;
  Vector beta;
  Matrix eps;                 // d x T realized noise
  Matrix rho_series;          // p x T realized coefficient paths
  std::vector<int> break_locations;  // 1-based; empty when none
  double threshold_gamma = std::numeric_limits<double>::quiet_NaN();
  Vector driver;              // threshold driver series (empty otherwise)
  std::vector<int> segmentation;  // length T regime labels
  double max_abs_rho = 0.0;
  int stationarity_violations = 0;
  DynamicBasis basis;         // DGP basis (varying-coefficient case)
};

struct Simulated {
  PanelData data;
  WeightSet weights;
  Truth truth;
};

Simulated simulate(const DgpSpec& dgp);
Simulated simulate(const DgpSpec& dgp, Rng& rng);

// ---- per-replication metrics ----

double mean_squared_error(const Vector& estimate, const Vector& truth);
// Proportion of true zeros estimated as exact zeros (1 when there are none).
double specificity(const Vector& estimate, const Vector& truth);
// Proportion of true nonzeros estimated nonzero (1 when there are none).
double sensitivity(const Vector& estimate, const Vector& truth);

// 1 when the pair attached to the true break is the only nonzero in phi.
double true_unique(const Vector& phi, const CandidateSet& candidates, const DynamicBasis& basis,
                   double true_location);

// Expresses piecewise-constant coefficient paths in saturated indicator
// coordinates; throws if the paths are not representable on the candidates.
Vector step_truth_coefficients(const Matrix& rho_series, const std::vector<double>& candidates,
                               const DynamicBasis& basis);

struct FitMetrics {
  double mse_phi = 0.0;
  double mse_beta = 0.0;
  double mse_mu = 0.0;
  double spec = 1.0;
  double sens = 1.0;
};

FitMetrics evaluate_fit(const ModelFit& fit, const Truth& truth);

}  // namespace dsar
