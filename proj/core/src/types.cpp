#include "dsar/types.hpp"

#include <cmath>

namespace dsar {

namespace {

void require(bool cond, const std::string& message) {
  if (!cond) throw DataError(message);
}

}  // namespace

void PanelData::validate() const {
  require(y.rows() > 0 && y.cols() > 0, "panel: y must be non-empty");
  require(static_cast<int>(X.size()) == T(), "panel: need one X block per period");
  for (int t = 0; t < T(); ++t) {
    require(X[t].rows() == d() && X[t].cols() == r(),
            "panel: X block at t=" + std::to_string(t + 1) + " has wrong shape");
  }
  if (!U.empty()) {
    require(static_cast<int>(U.size()) == T(), "panel: need one U block per period");
    for (int t = 0; t < T(); ++t) {
      require(U[t].rows() == d() && U[t].cols() == s(),
              "panel: U block at t=" + std::to_string(t + 1) + " has wrong shape");
    }
  }
  require(y.allFinite(), "panel: y contains non-finite entries");
  for (const auto& x : X) require(x.allFinite(), "panel: X contains non-finite entries");
  for (const auto& u : U) require(u.allFinite(), "panel: U contains non-finite entries");
}

void WeightSet::validate() const {
  require(!matrices.empty(), "weights: at least one matrix required");
  for (int j = 0; j < p(); ++j) {
    const Matrix& w = matrices[j];
    require(w.rows() == d() && w.cols() == d(),
            "weights: W" + std::to_string(j + 1) + " is not square of matching size");
    require(w.allFinite(), "weights: W" + std::to_string(j + 1) + " has non-finite entries");
    require(w.diagonal().cwiseAbs().maxCoeff() == 0.0,
            "weights: W" + std::to_string(j + 1) + " has nonzero diagonal");
  }
}

int DynamicBasis::T() const {
  for (const auto& mb : per_matrix) {
    if (mb.dynamic.cols() > 0) return static_cast<int>(mb.dynamic.rows());
  }
  return 0;
}

int DynamicBasis::total_coefficients() const {
  int total = 0;
  for (const auto& mb : per_matrix) total += mb.terms();
  return total;
}

double DynamicBasis::value(int j, int term, int t) const {
  const MatrixBasis& mb = per_matrix[static_cast<std::size_t>(j)];
  if (mb.has_constant) {
    if (term == 0) return 1.0;
    return mb.dynamic(t, term - 1);
  }
  return mb.dynamic(t, term);
}

void DynamicBasis::validate() const {
  require(!per_matrix.empty(), "basis: empty");
  int t = T();
  for (const auto& mb : per_matrix) {
    require(mb.terms() > 0, "basis: a matrix has no terms at all");
    if (mb.dynamic.cols() > 0) {
      require(static_cast<int>(mb.dynamic.rows()) == t, "basis: series length mismatch");
      require(mb.dynamic.allFinite(), "basis: non-finite dynamic variable");
    }
  }
}

DynamicBasis DynamicBasis::constants_only(int p, int T) {
  DynamicBasis basis;
  basis.per_matrix.resize(static_cast<std::size_t>(p));
  for (auto& mb : basis.per_matrix) {
    mb.has_constant = true;
    mb.dynamic.resize(T, 0);
  }
  return basis;
}

DynamicBasis DynamicBasis::from_columns(std::vector<Matrix> columns_per_matrix) {
  DynamicBasis basis;
  basis.per_matrix.reserve(columns_per_matrix.size());
  for (auto& cols : columns_per_matrix) {
    MatrixBasis mb;
    mb.has_constant = true;
    mb.dynamic = std::move(cols);
    basis.per_matrix.push_back(std::move(mb));
  }
  return basis;
}

int coefficient_index(const DynamicBasis& basis, int j, int term) {
  if (j < 0 || j >= basis.p()) throw ConfigError("coefficient_index: matrix index out of range");
  const MatrixBasis& mb = basis.per_matrix[static_cast<std::size_t>(j)];
  if (term < 0 || term >= mb.terms())
    throw ConfigError("coefficient_index: term index out of range");
  int offset = 0;
  for (int m = 0; m < j; ++m) offset += basis.per_matrix[static_cast<std::size_t>(m)].terms();
  return offset + term;
}

std::pair<int, int> coefficient_position(const DynamicBasis& basis, int flat) {
  int offset = 0;
  for (int j = 0; j < basis.p(); ++j) {
    int terms = basis.per_matrix[static_cast<std::size_t>(j)].terms();
    if (flat < offset + terms) return {j, flat - offset};
    offset += terms;
  }
  throw ConfigError("coefficient_position: flat index out of range");
}

std::pair<int, int> coefficient_jk(const DynamicBasis& basis, int flat) {
  auto [j, term] = coefficient_position(basis, flat);
  const MatrixBasis& mb = basis.per_matrix[static_cast<std::size_t>(j)];
  int k = mb.has_constant ? term : term + 1;
  return {j + 1, k};
}

std::string coefficient_label(const DynamicBasis& basis, int flat) {
  auto [j, k] = coefficient_jk(basis, flat);
  return "phi[" + std::to_string(j) + "][" + std::to_string(k) + "]";
}

double rho_at(const Vector& phi, const DynamicBasis& basis, int t) {
  double total = 0.0;
  int idx = 0;
  for (int j = 0; j < basis.p(); ++j) {
    const MatrixBasis& mb = basis.per_matrix[static_cast<std::size_t>(j)];
    for (int term = 0; term < mb.terms(); ++term, ++idx) {
      total += phi[idx] * basis.value(j, term, t);
    }
  }
  return total;
}

Vector z_vector(const DynamicBasis& basis, int t) {
  Vector z(basis.total_coefficients());
  int idx = 0;
  for (int j = 0; j < basis.p(); ++j) {
    const MatrixBasis& mb = basis.per_matrix[static_cast<std::size_t>(j)];
    for (int term = 0; term < mb.terms(); ++term, ++idx) z[idx] = basis.value(j, term, t);
  }
  return z;
}

void ModelSpec::validate(int T) const {
  weights.validate();
  basis.validate();
  if (basis.p() != weights.p())
    throw ConfigError("spec: basis and weight set disagree on the number of matrices");
  if (basis.T() != 0 && basis.T() != T)
    throw ConfigError("spec: basis length does not match the panel time span");
  if (instrument_depth < 0) throw ConfigError("spec: instrument depth must be >= 0");
  for (double l : lambda_grid) {
    if (!(l >= 0.0)) throw ConfigError("spec: lambda grid entries must be >= 0");
  }
  if (lambda_grid.empty()) {
    if (lambda_grid_size < 1) throw ConfigError("spec: lambda grid size must be >= 1");
    if (!(lambda_min_ratio > 0.0 && lambda_min_ratio <= 1.0))
      throw ConfigError("spec: lambda_min_ratio must be in (0,1]");
  }
  if (tau_star >= T) throw ConfigError("spec: tau_star must be < T");
}

int ModelSpec::effective_tau_star(int T) const {
  if (tau_star >= 0) return tau_star;
  return static_cast<int>(std::floor(std::cbrt(static_cast<double>(T))));
}

std::vector<int> nonzero_indices(const Vector& v) {
  std::vector<int> idx;
  for (int i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) idx.push_back(i);
  }
  return idx;
}

}  // namespace dsar
