#include "dsar/design.hpp"

#include <cmath>
#include <limits>

namespace dsar {

InstrumentPanel build_instruments(const PanelData& data, const WeightSet& weights, int depth) {
  if (!data.has_instruments())
    throw ConfigError(
        "instruments: panel has no U blocks; for exogenous covariates set U = X");
  if (depth < 0) throw ConfigError("instruments: depth must be >= 0");
  const int d = data.d();
  const int T = data.T();
  const int s = data.s();
  const int p = weights.p();
  const int v = s * (1 + p * depth);

  InstrumentPanel inst;
  inst.B.resize(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    Matrix bt(d, v);
    bt.leftCols(s) = data.U[static_cast<std::size_t>(t)];
    int offset = s;
    for (int j = 0; j < p; ++j) {
      Matrix cur = data.U[static_cast<std::size_t>(t)];
      for (int power = 1; power <= depth; ++power) {
        cur = weights.matrices[static_cast<std::size_t>(j)] * cur;
        bt.middleCols(offset, s) = cur;
        offset += s;
      }
    }
    inst.B[static_cast<std::size_t>(t)] = std::move(bt);
  }
  inst.B_bar = Matrix::Zero(d, v);
  for (const auto& bt : inst.B) inst.B_bar += bt;
  inst.B_bar /= static_cast<double>(T);
  inst.gamma = Vector::Constant(v, 1.0 / static_cast<double>(v));
  inst.centered.resize(d, T);
  for (int t = 0; t < T; ++t)
    inst.centered.col(t) = (inst.B[static_cast<std::size_t>(t)] - inst.B_bar) * inst.gamma;
  return inst;
}

GuardedSpd::GuardedSpd(Matrix m, std::string what, std::function<std::string(int)> label)
    : mat_(std::move(m)), what_(std::move(what)) {
  eig_.compute(mat_);
  if (eig_.info() != Eigen::Success)
    throw IdentificationError(what_ + ": eigendecomposition failed");
  const Vector& ev = eig_.eigenvalues();
  double lo = ev.minCoeff();
  double hi = ev.maxCoeff();
  cond_ = (lo > 0.0) ? hi / lo : std::numeric_limits<double>::infinity();
  ok_ = (lo > 0.0) && (cond_ <= 1e12);
  if (!ok_) {
    // Name the columns loading on the most deficient direction.
    int which = 0;
    ev.minCoeff(&which);
    Vector dir = eig_.eigenvectors().col(which).cwiseAbs();
    double top = dir.maxCoeff();
    std::string names;
    for (int i = 0; i < dir.size(); ++i) {
      if (dir[i] >= 0.1 * top) {
        if (!names.empty()) names += ", ";
        names += label ? label(i) : std::to_string(i);
      }
    }
    deficient_ = names;
  }
}

void GuardedSpd::ensure_ok() const {
  if (!ok_)
    throw IdentificationError(what_ + ": numerically singular (condition " +
                              std::to_string(cond_) + "); deficient columns: " + deficient_);
}

Vector GuardedSpd::solve(const Vector& rhs) const {
  ensure_ok();
  return eig_.eigenvectors() *
         (eig_.eigenvalues().cwiseInverse().asDiagonal() * (eig_.eigenvectors().transpose() * rhs));
}

Matrix GuardedSpd::solve(const Matrix& rhs) const {
  ensure_ok();
  return eig_.eigenvectors() *
         (eig_.eigenvalues().cwiseInverse().asDiagonal() * (eig_.eigenvectors().transpose() * rhs));
}

Vector augmented_moment(const InstrumentPanel& inst, const Matrix& panel) {
  const int d = inst.d();
  const int T = inst.T();
  double scale = 1.0 / std::sqrt(static_cast<double>(T) * static_cast<double>(d));
  Matrix m = scale * (inst.centered * panel.transpose());  // d x d
  return Eigen::Map<Vector>(m.data(), d * d);
}

Matrix covariate_effect_panel(const PanelData& data, const Vector& beta) {
  Matrix out(data.d(), data.T());
  for (int t = 0; t < data.T(); ++t) out.col(t) = data.X[static_cast<std::size_t>(t)] * beta;
  return out;
}

DesignMatrices build_design(const PanelData& data, const ModelSpec& spec,
                            const InstrumentPanel& inst) {
  const int d = data.d();
  const int T = data.T();
  const int r = data.r();
  const int v = inst.v();
  const DynamicBasis& basis = spec.basis;
  const int L = basis.total_coefficients();
  const int p = spec.weights.p();

  DesignMatrices dm;
  dm.d = d;
  dm.T = T;
  dm.L = L;
  dm.v = v;
  dm.r = r;
  dm.scale = 1.0 / std::sqrt(static_cast<double>(T) * static_cast<double>(d));

  const Matrix& C = inst.centered;  // d x T

  // Per-matrix propagated outcomes W_j y_t, shared across basis terms.
  std::vector<Matrix> Yw(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) Yw[static_cast<std::size_t>(j)] = spec.weights.matrices[static_cast<std::size_t>(j)] * data.y;

  dm.BtV.resize(d * d, L);
  dm.QW.resize(v, L);
  dm.qy = Vector::Zero(v);
  dm.P = Matrix::Zero(r, v);
  for (int t = 0; t < T; ++t) {
    const Matrix centered_bt = inst.B[static_cast<std::size_t>(t)] - inst.B_bar;
    dm.qy.noalias() += centered_bt.transpose() * data.y.col(t);
    dm.P.noalias() += data.X[static_cast<std::size_t>(t)].transpose() * centered_bt;
  }

  // Instrumented cross-moments, per matrix: column t of Rj is
  // (B_t - B_bar)' W_j y_t, contracted against each basis series below.
  std::vector<Matrix> Rj(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    Matrix rj(v, T);
    for (int t = 0; t < T; ++t)
      rj.col(t).noalias() =
          (inst.B[static_cast<std::size_t>(t)] - inst.B_bar).transpose() * Yw[static_cast<std::size_t>(j)].col(t);
    Rj[static_cast<std::size_t>(j)] = std::move(rj);
  }

  Vector zt(T);
  int col = 0;
  for (int j = 0; j < p; ++j) {
    const MatrixBasis& mb = basis.per_matrix[static_cast<std::size_t>(j)];
    for (int term = 0; term < mb.terms(); ++term, ++col) {
      for (int t = 0; t < T; ++t) zt[t] = basis.value(j, term, t);
      Matrix m = dm.scale * (C * zt.asDiagonal() * Yw[static_cast<std::size_t>(j)].transpose());
      dm.BtV.col(col) = Eigen::Map<Vector>(m.data(), d * d);
      dm.QW.col(col).noalias() = Rj[static_cast<std::size_t>(j)] * zt;
    }
  }

  dm.Bty = augmented_moment(inst, data.y);

  dm.gram = GuardedSpd(dm.P * dm.P.transpose(), "covariate Gram matrix",
                       [](int i) { return "x" + std::to_string(i + 1); });

  dm.yw_proj = dm.P * dm.QW;
  dm.yv_proj = dm.P * dm.qy;

  dm.K.resize(d * d, r);
  Matrix xc(d, T);
  for (int jc = 0; jc < r; ++jc) {
    for (int t = 0; t < T; ++t) xc.col(t) = data.X[static_cast<std::size_t>(t)].col(jc);
    Matrix m = C * xc.transpose();  // d x d, instrument unit by data unit
    dm.K.col(jc) = Eigen::Map<Vector>(m.data(), d * d);
  }

  dm.XiYW = dm.scale * (dm.K * dm.gram.solve(dm.yw_proj));
  dm.Xiy = dm.scale * (dm.K * dm.gram.solve(dm.yv_proj));

  dm.A = dm.BtV - dm.XiYW;
  dm.b = dm.Bty - dm.Xiy;
  dm.G = (dm.A.transpose() * dm.A) / static_cast<double>(T);
  dm.g = (dm.A.transpose() * dm.b) / static_cast<double>(T);

  for (int i = 0; i < L; ++i) {
    if (dm.A.col(i).cwiseAbs().maxCoeff() == 0.0) dm.structural_zero_cols.push_back(i);
  }
  if (!dm.structural_zero_cols.empty()) {
    std::string names;
    for (int i : dm.structural_zero_cols) {
      if (!names.empty()) names += ", ";
      names += coefficient_label(basis, i);
    }
    warn("design: structurally zero columns pinned to zero: " + names);
  }
  return dm;
}

Vector DesignMatrices::beta_of_phi(const Vector& phi) const {
  return gram.solve(Vector(yv_proj - yw_proj * phi));
}

}  // namespace dsar
