#include "dsar/simulation.hpp"

#include <algorithm>
#include <cmath>

namespace dsar {

Matrix gen_weight_ahead_behind(int d, int k) {
  if (k < 0) throw ConfigError("ahead-behind weights: k must be >= 0");
  if (k > 0 && d <= 2 * k)
    throw ConfigError("ahead-behind weights: need d > 2k, got d=" + std::to_string(d) +
                      ", k=" + std::to_string(k));
  Matrix w = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int off = 1; off <= k; ++off) {
      w(i, (i + off) % d) = 1.0;
      w(i, (i - off + d) % d) = 1.0;
    }
  }
  return row_normalize(w);
}

Matrix gen_weight_bernoulli(int d, double p, Rng& rng, bool symmetric) {
  if (p < 0.0 || p > 1.0) throw ConfigError("bernoulli weights: p must be in [0,1]");
  Matrix w = Matrix::Zero(d, d);
  if (symmetric) {
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j) {
        if (rng.bernoulli(p)) {
          w(i, j) = 1.0;
          w(j, i) = 1.0;
        }
      }
    }
  } else {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        if (j == i) continue;
        if (rng.bernoulli(p)) w(i, j) = 1.0;
      }
    }
  }
  return row_normalize(w);
}

namespace {

Matrix make_weight(const WeightGen& gen, int d, Rng& rng) {
  switch (gen.kind) {
    case WeightGen::Kind::AheadBehind:
      return gen_weight_ahead_behind(d, gen.k);
    case WeightGen::Kind::Bernoulli:
      return gen_weight_bernoulli(d, gen.p, rng, gen.symmetric);
    case WeightGen::Kind::FromFile:
      return load_weight_matrix(gen.path, gen.format, d);
  }
  throw ConfigError("unknown weight generator");
}

// Correlation factor for the sparse-correlated Gaussian noise. The random
// pattern occasionally fails to be positive definite; redraw when it does.
Matrix noise_cholesky(const NoiseSpec& noise, int d, Rng& rng) {
  int redraws = 0;
  for (;;) {
    Matrix sigma = Matrix::Identity(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j) {
        if (rng.bernoulli(noise.prob)) {
          sigma(i, j) = noise.offdiag;
          sigma(j, i) = noise.offdiag;
        }
      }
    }
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() == Eigen::Success) {
      if (redraws > 0)
        warn("noise: redrew the correlation pattern " + std::to_string(redraws) +
             " time(s) to obtain a positive definite matrix");
      return llt.matrixL();
    }
    if (++redraws > 100) throw DgpError("noise: could not draw a positive definite correlation");
  }
}

Vector draw_noise(const NoiseSpec& noise, const Matrix& chol, int d, Rng& rng) {
  Vector z(d);
  switch (noise.kind) {
    case NoiseSpec::Kind::SparseCorrGaussian: {
      for (int i = 0; i < d; ++i) z[i] = rng.normal();
      return chol * z;
    }
    case NoiseSpec::Kind::IidGaussian: {
      for (int i = 0; i < d; ++i) z[i] = rng.normal();
      return z;
    }
    case NoiseSpec::Kind::StudentT: {
      double scale = 1.0;
      if (noise.standardize_t && noise.df > 2)
        scale = std::sqrt(static_cast<double>(noise.df - 2) / static_cast<double>(noise.df));
      for (int i = 0; i < d; ++i) z[i] = scale * rng.student_t(noise.df);
      return z;
    }
    case NoiseSpec::Kind::None:
      return Vector::Zero(d);
  }
  throw ConfigError("unknown noise kind");
}

std::vector<int> breaks_from_rho(const Matrix& rho_series) {
  std::vector<int> breaks;
  for (int t = 0; t + 1 < rho_series.cols(); ++t) {
    if ((rho_series.col(t) - rho_series.col(t + 1)).cwiseAbs().maxCoeff() > 0.0)
      breaks.push_back(t + 1);  // 1-based location of the last pre-change period
  }
  return breaks;
}

}  // namespace

Simulated simulate(const DgpSpec& dgp) {
  Rng rng(dgp.seed);
  return simulate(dgp, rng);
}

Simulated simulate(const DgpSpec& dgp, Rng& rng) {
  const int d = dgp.d;
  const int T = dgp.T;
  if (d < 1 || T < 1) throw ConfigError("dgp: d and T must be positive");
  if (dgp.weights.empty()) throw ConfigError("dgp: at least one weight matrix");
  const int p = static_cast<int>(dgp.weights.size());
  const int r = dgp.x.cols;
  if (dgp.mu.size() != d) throw ConfigError("dgp: mu must have length d");
  if (dgp.beta.size() != r) throw ConfigError("dgp: beta must match the covariate count");

  Simulated out;
  out.weights.matrices.reserve(static_cast<std::size_t>(p));
  for (const auto& gen : dgp.weights) out.weights.matrices.push_back(make_weight(gen, d, rng));
  out.weights.validate();

  Matrix chol;
  if (dgp.noise.kind == NoiseSpec::Kind::SparseCorrGaussian)
    chol = noise_cholesky(dgp.noise, d, rng);

  // Dynamic variables drawn up front where they do not depend on outcomes.
  const auto* varying = std::get_if<VaryingCoefDgp>(&dgp.spatial);
  const auto* steps = std::get_if<StepBreaksDgp>(&dgp.spatial);
  const auto* threshold = std::get_if<ThresholdDgp>(&dgp.spatial);

  DynamicBasis basis;
  if (varying) {
    if (static_cast<int>(varying->l.size()) != p)
      throw ConfigError("dgp: one dynamic-variable count per weight matrix");
    std::vector<Matrix> cols;
    for (int j = 0; j < p; ++j) {
      Matrix zj(T, varying->l[static_cast<std::size_t>(j)]);
      for (int k = 0; k < zj.cols(); ++k)
        for (int t = 0; t < T; ++t) zj(t, k) = rng.normal();
      cols.push_back(std::move(zj));
    }
    basis = DynamicBasis::from_columns(std::move(cols));
    if (varying->phi.size() != basis.total_coefficients())
      throw ConfigError("dgp: phi length does not match the basis coefficient count");
  }

  Matrix rho_series = Matrix::Zero(p, T);
  if (steps) {
    if (static_cast<int>(steps->rho.size()) != p)
      throw ConfigError("dgp: one segment list per weight matrix");
    for (int j = 0; j < p; ++j) {
      const auto& segs = steps->rho[static_cast<std::size_t>(j)];
      int prev_end = 0;
      for (const auto& seg : segs) {
        if (seg.end_t <= prev_end || seg.end_t > T)
          throw ConfigError("dgp: step segments must have increasing end times within [1,T]");
        for (int t = prev_end; t < seg.end_t; ++t) rho_series(j, t) = seg.value;
        prev_end = seg.end_t;
      }
      if (prev_end != T) throw ConfigError("dgp: step segments must cover 1..T");
    }
  }

  Vector driver;
  if (threshold) {
    if (threshold->rho_le.size() != p || threshold->rho_gt.size() != p)
      throw ConfigError("dgp: threshold regimes need one rho per weight matrix");
    if (threshold->driver.kind == ThresholdDriver::Kind::Ar) {
      const auto& a = threshold->driver.ar_coef;
      const int order = static_cast<int>(a.size());
      const int burn = 100;
      std::vector<double> q(static_cast<std::size_t>(T + burn), 0.0);
      for (int t = 0; t < T + burn; ++t) {
        double value = rng.normal();
        for (int i = 1; i <= order; ++i) {
          if (t - i >= 0) value += a[static_cast<std::size_t>(i - 1)] * q[static_cast<std::size_t>(t - i)];
        }
        q[static_cast<std::size_t>(t)] = value;
      }
      driver.resize(T);
      for (int t = 0; t < T; ++t) driver[t] = q[static_cast<std::size_t>(t + burn)];
    } else {
      driver = Vector::Zero(T);  // filled causally inside the time loop
    }
  }

  PanelData data;
  data.y.resize(d, T);
  data.X.resize(static_cast<std::size_t>(T));
  data.U.resize(static_cast<std::size_t>(T));

  Truth& truth = out.truth;
  truth.mu = dgp.mu;
  truth.beta = dgp.beta;

  truth.eps.resize(d, T);
  Matrix wstar(d, d);
  for (int t = 0; t < T; ++t) {
    Vector eps = draw_noise(dgp.noise, chol, d, rng);
    truth.eps.col(t) = eps;
    Matrix x(d, r);
    for (int c = 0; c < r; ++c)
      for (int i = 0; i < d; ++i) x(i, c) = rng.normal();
    data.U[static_cast<std::size_t>(t)] = x;  // exogenous copy
    if (dgp.x.endogenous_add != 0.0 && r > 0) x.col(r - 1) += dgp.x.endogenous_add * eps;
    data.X[static_cast<std::size_t>(t)] = x;

    if (threshold && threshold->driver.kind == ThresholdDriver::Kind::SelfExcitingMean) {
      int lag = threshold->driver.lag;
      driver[t] = (t - lag >= 0) ? data.y.col(t - lag).mean() : 0.0;
    }

    if (varying) {
      for (int j = 0; j < p; ++j) {
        const MatrixBasis& mb = basis.per_matrix[static_cast<std::size_t>(j)];
        double rho_j = 0.0;
        int base = coefficient_index(basis, j, 0);
        for (int term = 0; term < mb.terms(); ++term)
          rho_j += varying->phi[base + term] * basis.value(j, term, t);
        rho_series(j, t) = rho_j;
      }
    } else if (threshold) {
      bool le = driver[t] <= threshold->gamma;
      for (int j = 0; j < p; ++j)
        rho_series(j, t) = le ? threshold->rho_le[j] : threshold->rho_gt[j];
    }

    wstar.setZero();
    for (int j = 0; j < p; ++j) {
      if (rho_series(j, t) != 0.0)
        wstar += rho_series(j, t) * out.weights.matrices[static_cast<std::size_t>(j)];
    }

    double rho_total = rho_series.col(t).sum();
    double row_norm = wstar.cwiseAbs().rowwise().sum().maxCoeff();
    truth.max_abs_rho = std::max(truth.max_abs_rho, std::abs(rho_total));
    if (std::abs(rho_total) >= 1.0 || row_norm >= 1.0) {
      ++truth.stationarity_violations;
      if (dgp.strict_stationarity)
        throw DgpError("dgp: stationarity violated at t=" + std::to_string(t + 1) +
                       " (|rho_t|=" + std::to_string(std::abs(rho_total)) +
                       ", row norm=" + std::to_string(row_norm) + ")");
    }

    Vector rhs = dgp.mu + x * dgp.beta + eps;
    Matrix system = Matrix::Identity(d, d) - wstar;
    Eigen::PartialPivLU<Matrix> lu(system);
    Vector yt = lu.solve(rhs);
    if (!yt.allFinite() || (system * yt - rhs).cwiseAbs().maxCoeff() >
                               1e-8 * (1.0 + rhs.cwiseAbs().maxCoeff()))
      throw DgpError("dgp: singular system at t=" + std::to_string(t + 1));
    data.y.col(t) = yt;
  }

  truth.rho_series = rho_series;
  if (varying) {
    truth.phi = varying->phi;
    truth.basis = basis;
  }
  if (steps || threshold) {
    truth.break_locations = breaks_from_rho(rho_series);
    std::vector<double> locs(truth.break_locations.begin(), truth.break_locations.end());
    truth.segmentation = segmentation_from_breaks(T, locs);
  } else {
    truth.segmentation.assign(static_cast<std::size_t>(T), 1);
  }
  if (threshold) {
    truth.threshold_gamma = threshold->gamma;
    truth.driver = driver;
  }
  if (truth.stationarity_violations > 0) {
    warn("dgp: " + std::to_string(truth.stationarity_violations) +
         " period(s) violated the stationarity bounds (max |rho_t| = " +
         std::to_string(truth.max_abs_rho) + ")");
  }

  out.data = std::move(data);
  return out;
}

double mean_squared_error(const Vector& estimate, const Vector& truth) {
  if (estimate.size() != truth.size())
    throw ConfigError("mse: length mismatch");
  if (estimate.size() == 0) return 0.0;
  return (estimate - truth).squaredNorm() / static_cast<double>(estimate.size());
}

double specificity(const Vector& estimate, const Vector& truth) {
  int zeros = 0, hit = 0;
  for (int i = 0; i < truth.size(); ++i) {
    if (truth[i] == 0.0) {
      ++zeros;
      if (estimate[i] == 0.0) ++hit;
    }
  }
  return zeros == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(zeros);
}

double sensitivity(const Vector& estimate, const Vector& truth) {
  int nonzeros = 0, hit = 0;
  for (int i = 0; i < truth.size(); ++i) {
    if (truth[i] != 0.0) {
      ++nonzeros;
      if (estimate[i] != 0.0) ++hit;
    }
  }
  return nonzeros == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(nonzeros);
}

double true_unique(const Vector& phi, const CandidateSet& candidates, const DynamicBasis& basis,
                   double true_location) {
  int target = -1;
  for (std::size_t l = 0; l < candidates.values.size(); ++l) {
    if (candidates.values[l] == true_location) target = static_cast<int>(l);
  }
  if (target < 0) return 0.0;
  std::vector<int> pair = candidate_coefficients(candidates, basis, target);
  for (int i : pair) {
    if (phi[i] == 0.0) return 0.0;
  }
  std::vector<int> active = nonzero_indices(phi);
  for (int i : active) {
    if (std::find(pair.begin(), pair.end(), i) == pair.end()) return 0.0;
  }
  return 1.0;
}

Vector step_truth_coefficients(const Matrix& rho_series, const std::vector<double>& candidates,
                               const DynamicBasis& basis) {
  const int T = static_cast<int>(rho_series.cols());
  const int m = static_cast<int>(candidates.size());
  if (basis.p() != rho_series.rows())
    throw ConfigError("step truth: matrix count mismatch");

  auto interval_value = [&](int j, int lo, int hi) {  // 1-based inclusive range
    double value = rho_series(j, lo - 1);
    for (int t = lo; t <= hi; ++t) {
      if (rho_series(j, t - 1) != value)
        throw ConfigError("step truth: path not representable on the candidate grid");
    }
    return value;
  };

  Vector phi = Vector::Zero(basis.total_coefficients());
  for (int j = 0; j < basis.p(); ++j) {
    const MatrixBasis& mb = basis.per_matrix[static_cast<std::size_t>(j)];
    int first_term = mb.has_constant ? 1 : 0;
    bool is_le = mb.dynamic(0, 0) == 1.0;  // first period inside a <= indicator
    if (is_le) {
      // 1{t <= c_l} stack: value on (c_{l-1}, c_l] is the tail sum from l.
      double next_tail = 0.0;
      if (candidates[static_cast<std::size_t>(m - 1)] < static_cast<double>(T)) {
        next_tail = interval_value(j, static_cast<int>(candidates[static_cast<std::size_t>(m - 1)]) + 1, T);
        if (next_tail != 0.0)
          throw ConfigError("step truth: nonzero level after the last <= candidate");
      }
      for (int l = m - 1; l >= 0; --l) {
        int hi = static_cast<int>(candidates[static_cast<std::size_t>(l)]);
        int lo = l == 0 ? 1 : static_cast<int>(candidates[static_cast<std::size_t>(l - 1)]) + 1;
        double value = interval_value(j, lo, hi);
        phi[coefficient_index(basis, j, first_term + l)] = value - next_tail;
        next_tail = value;
      }
    } else {
      // 1{t > c_l} stack: value on (c_l, c_{l+1}] is the head sum up to l.
      double head = interval_value(j, 1, static_cast<int>(candidates[0]));
      if (head != 0.0) throw ConfigError("step truth: nonzero level before the first > candidate");
      double prev_head = 0.0;
      for (int l = 0; l < m; ++l) {
        int lo = static_cast<int>(candidates[static_cast<std::size_t>(l)]) + 1;
        int hi = l + 1 < m ? static_cast<int>(candidates[static_cast<std::size_t>(l + 1)]) : T;
        if (lo > T) break;  // candidate at T: empty post region, coefficient stays 0
        hi = std::min(hi, T);
        double value = interval_value(j, lo, hi);
        phi[coefficient_index(basis, j, first_term + l)] = value - prev_head;
        prev_head = value;
      }
    }
  }
  return phi;
}

FitMetrics evaluate_fit(const ModelFit& fit, const Truth& truth) {
  FitMetrics m;
  m.mse_phi = mean_squared_error(fit.phi, truth.phi);
  m.mse_beta = mean_squared_error(fit.beta, truth.beta);
  m.mse_mu = mean_squared_error(fit.mu, truth.mu);
  m.spec = specificity(fit.phi, truth.phi);
  m.sens = sensitivity(fit.phi, truth.phi);
  return m;
}

}  // namespace dsar
