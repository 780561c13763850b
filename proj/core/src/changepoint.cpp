#include "dsar/changepoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace dsar {

void CandidateSet::validate(int T) const {
  if (values.empty()) throw ConfigError("candidates: empty set");
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (!(values[i] > values[i - 1]))
      throw ConfigError("candidates: values must be strictly increasing");
  }
  if (kind == CandidateKind::TimeBreak) {
    for (double v : values) {
      if (v != std::floor(v) || v < 1 || v > T)
        throw ConfigError("candidates: time breaks must be integers in [1, T]");
    }
  }
}

namespace {

bool indicator_constant(const Vector& column) {
  double first = column[0];
  for (int t = 1; t < column.size(); ++t) {
    if (column[t] != first) return false;
  }
  return true;
}

}  // namespace

DynamicBasis build_saturated_basis(const CandidateSet& candidates, const Vector& driver,
                                   const WeightSet& weights, int T, bool add_constants) {
  candidates.validate(T);
  Vector drv;
  if (candidates.kind == CandidateKind::TimeBreak) {
    drv.resize(T);
    for (int t = 0; t < T; ++t) drv[t] = static_cast<double>(t + 1);
  } else {
    if (driver.size() != T)
      throw ConfigError("candidates: threshold detection needs a length-T driver series");
    drv = driver;
  }
  const int m = static_cast<int>(candidates.values.size());

  Matrix le(T, m);
  for (int l = 0; l < m; ++l) {
    for (int t = 0; t < T; ++t) le(t, l) = drv[t] <= candidates.values[static_cast<std::size_t>(l)] ? 1.0 : 0.0;
  }

  DynamicBasis basis;
  if (candidates.style == IndicatorStyle::PrePost) {
    if (weights.p() != 2)
      throw ConfigError("candidates: the pre/post indicator style needs exactly two weight matrices");
    MatrixBasis pre;
    pre.has_constant = add_constants;
    pre.dynamic = le;
    MatrixBasis post;
    post.has_constant = add_constants;
    post.dynamic = Matrix::Ones(T, m) - le;
    basis.per_matrix.push_back(std::move(pre));
    basis.per_matrix.push_back(std::move(post));
  } else {
    for (int j = 0; j < weights.p(); ++j) {
      MatrixBasis mb;
      mb.has_constant = true;
      mb.dynamic = le;
      basis.per_matrix.push_back(std::move(mb));
    }
  }

  for (int l = 0; l < m; ++l) {
    if (indicator_constant(le.col(l))) {
      warn("candidates: indicator for candidate " +
           std::to_string(candidates.values[static_cast<std::size_t>(l)]) +
           " is constant over the sample (outside the driver range)");
    }
  }
  return basis;
}

std::vector<int> candidate_coefficients(const CandidateSet& candidates, const DynamicBasis& basis,
                                        int candidate_index) {
  std::vector<int> idx;
  for (int j = 0; j < basis.p(); ++j) {
    const MatrixBasis& mb = basis.per_matrix[static_cast<std::size_t>(j)];
    int term = (mb.has_constant ? 1 : 0) + candidate_index;
    idx.push_back(coefficient_index(basis, j, term));
  }
  (void)candidates;
  return idx;
}

std::vector<int> flagged_candidates(const Vector& phi, const CandidateSet& candidates,
                                    const DynamicBasis& basis, FlagRule rule) {
  std::vector<int> flagged;
  const int m = static_cast<int>(candidates.values.size());
  for (int l = 0; l < m; ++l) {
    std::vector<int> coef = candidate_coefficients(candidates, basis, l);
    bool any = false;
    bool all = true;
    for (int i : coef) {
      bool nz = phi[i] != 0.0;
      any = any || nz;
      all = all && nz;
    }
    bool hit = (rule == FlagRule::BothPaired) ? all : any;
    if (hit) flagged.push_back(l);
  }
  return flagged;
}

namespace {

// A flagged candidate whose <=-indicator is constant over the sample plays
// the role of the base level (e.g. a time break at t = T); it does not
// partition the sample and is excluded from the reported change set.
bool is_boundary_candidate(const CandidateSet& candidates, const Vector& driver, int T, int l) {
  double c = candidates.values[static_cast<std::size_t>(l)];
  if (candidates.kind == CandidateKind::TimeBreak) return c >= static_cast<double>(T) || c < 1.0;
  bool any_le = false, any_gt = false;
  for (int t = 0; t < driver.size(); ++t) {
    if (driver[t] <= c) {
      any_le = true;
    } else {
      any_gt = true;
    }
  }
  return !(any_le && any_gt);
}

}  // namespace

ChangeReport detect(const PanelData& data, const WeightSet& weights,
                    const CandidateSet& candidates, const ModelSpec& spec_template,
                    const DetectOptions& options, const Vector* driver) {
  candidates.validate(data.T());
  if (static_cast<int>(candidates.values.size()) > options.max_candidates)
    throw ConfigError("detect: " + std::to_string(candidates.values.size()) +
                      " candidates exceed the configured maximum of " +
                      std::to_string(options.max_candidates) +
                      "; use divide_and_conquer for large sets");

  Vector drv;
  if (candidates.kind == CandidateKind::Threshold) {
    if (driver == nullptr)
      throw ConfigError("detect: threshold candidates need a driver series");
    drv = *driver;
  } else {
    drv.resize(data.T());
    for (int t = 0; t < data.T(); ++t) drv[t] = static_cast<double>(t + 1);
  }

  ModelSpec spec = spec_template;
  spec.weights = weights;
  spec.basis =
      build_saturated_basis(candidates, drv, weights, data.T(), options.add_constants);

  ChangeReport report;
  report.candidates = candidates;
  ModelFit model_fit = fit(data, spec);

  FlagRule rule = options.effective_rule(candidates.style);
  report.flagged_indices = flagged_candidates(model_fit.phi, candidates, spec.basis, rule);

  for (int l : report.flagged_indices) {
    if (is_boundary_candidate(candidates, drv, data.T(), l)) continue;
    DetectedChange change;
    change.value = candidates.values[static_cast<std::size_t>(l)];
    change.candidate_index = l;
    for (int i : candidate_coefficients(candidates, spec.basis, l))
      change.coefficients.push_back(model_fit.phi[i]);
    report.detected.push_back(std::move(change));
  }
  report.k_hat = static_cast<int>(report.detected.size());

  std::vector<double> locations;
  for (const auto& c : report.detected) locations.push_back(c.value);
  if (candidates.kind == CandidateKind::TimeBreak) {
    report.segmentation = segmentation_from_breaks(data.T(), locations);
  } else {
    report.segmentation = segmentation_from_thresholds(drv, locations);
  }
  report.fit = std::move(model_fit);
  return report;
}

std::vector<int> aggregate_window_flags(const std::vector<std::pair<int, int>>& windows,
                                        const std::vector<std::vector<int>>& flags_per_window) {
  std::map<int, int> containing;  // candidate index -> number of windows containing it
  std::map<int, int> hits;        // candidate index -> number of windows flagging it
  for (std::size_t w = 0; w < windows.size(); ++w) {
    for (int i = windows[w].first; i <= windows[w].second; ++i) containing[i] += 1;
    for (int i : flags_per_window[w]) hits[i] += 1;
  }
  std::vector<int> surviving;
  for (const auto& [idx, hit_count] : hits) {
    if (hit_count == containing[idx]) surviving.push_back(idx);
  }
  return surviving;
}

ChangeReport divide_and_conquer(const PanelData& data, const WeightSet& weights,
                                const CandidateSet& candidates, const ModelSpec& spec_template,
                                const DacOptions& dac, const DetectOptions& options,
                                const Vector* driver) {
  candidates.validate(data.T());
  if (dac.subset_size < 2) throw ConfigError("divide_and_conquer: subset_size must be >= 2");
  if (dac.overlap < 0 || dac.overlap >= dac.subset_size)
    throw ConfigError("divide_and_conquer: overlap must be in [0, subset_size)");

  const int n = static_cast<int>(candidates.values.size());
  if (n <= dac.subset_size) return detect(data, weights, candidates, spec_template, options, driver);

  std::vector<std::pair<int, int>> windows;
  int stride = dac.subset_size - dac.overlap;
  for (int start = 0; start < n; start += stride) {
    int end = std::min(start + dac.subset_size - 1, n - 1);
    windows.emplace_back(start, end);
    if (end == n - 1) break;
  }

  DetectOptions window_options = options;
  window_options.max_candidates = std::max(options.max_candidates, dac.subset_size);

  std::vector<std::vector<int>> flags_per_window;
  std::vector<ChangeReport> window_reports;
  for (const auto& [lo, hi] : windows) {
    CandidateSet sub = candidates;
    sub.values.assign(candidates.values.begin() + lo, candidates.values.begin() + hi + 1);
    ChangeReport r = detect(data, weights, sub, spec_template, window_options, driver);
    std::vector<int> flags;
    for (int local : r.flagged_indices) flags.push_back(lo + local);
    flags_per_window.push_back(std::move(flags));
    window_reports.push_back(std::move(r));
  }

  if (dac.pick_best_subset) {
    // Smallest estimation error among the window fits.
    std::size_t best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t w = 0; w < window_reports.size(); ++w) {
      const ModelFit& f = *window_reports[w].fit;
      double err = f.residuals.squaredNorm() /
                   (static_cast<double>(data.T()) * static_cast<double>(data.d()));
      if (err < best_err) {
        best_err = err;
        best = w;
      }
    }
    return window_reports[best];
  }

  std::vector<int> surviving = aggregate_window_flags(windows, flags_per_window);
  if (surviving.empty()) {
    ChangeReport report;
    report.candidates = candidates;
    report.k_hat = 0;
    report.segmentation.assign(static_cast<std::size_t>(data.T()), 1);
    return report;
  }

  CandidateSet refined = candidates;
  refined.values.clear();
  for (int idx : surviving) refined.values.push_back(candidates.values[static_cast<std::size_t>(idx)]);
  DetectOptions final_options = options;
  final_options.max_candidates =
      std::max(options.max_candidates, static_cast<int>(refined.values.size()));
  return detect(data, weights, refined, spec_template, final_options, driver);
}

std::vector<int> segmentation_from_breaks(int T, const std::vector<double>& locations) {
  std::vector<int> labels(static_cast<std::size_t>(T));
  for (int t = 1; t <= T; ++t) {
    int label = 1;
    for (double loc : locations) {
      if (loc < static_cast<double>(T) && static_cast<double>(t) > loc) ++label;
    }
    labels[static_cast<std::size_t>(t - 1)] = label;
  }
  return labels;
}

std::vector<int> segmentation_from_thresholds(const Vector& driver,
                                              const std::vector<double>& thresholds) {
  std::vector<int> labels(static_cast<std::size_t>(driver.size()));
  for (int t = 0; t < driver.size(); ++t) {
    int label = 1;
    for (double g : thresholds) {
      if (driver[t] > g) ++label;
    }
    labels[static_cast<std::size_t>(t)] = label;
  }
  return labels;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw ConfigError("ari: label vectors must have equal length");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;

  std::map<std::pair<int, int>, long long> cell;
  std::map<int, long long> row, col;
  for (std::size_t i = 0; i < n; ++i) {
    cell[{a[i], b[i]}] += 1;
    row[a[i]] += 1;
    col[b[i]] += 1;
  }
  auto comb2 = [](long long m) { return m * (m - 1) / 2; };
  double idx = 0.0, rsum = 0.0, csum = 0.0;
  for (const auto& [key, count] : cell) idx += static_cast<double>(comb2(count));
  for (const auto& [key, count] : row) rsum += static_cast<double>(comb2(count));
  for (const auto& [key, count] : col) csum += static_cast<double>(comb2(count));
  double total = static_cast<double>(comb2(static_cast<long long>(n)));
  double expected = rsum * csum / total;
  double maximum = 0.5 * (rsum + csum);
  double denom = maximum - expected;
  if (denom == 0.0) {
    // Both partitions trivial; they agree exactly iff the cells do.
    return idx == rsum && idx == csum ? 1.0 : 0.0;
  }
  return (idx - expected) / denom;
}

std::vector<double> threshold_quantile_candidates(const Vector& driver, int k) {
  if (k < 1) throw ConfigError("threshold candidates: k must be >= 1");
  std::vector<double> sorted(driver.data(), driver.data() + driver.size());
  std::sort(sorted.begin(), sorted.end());
  std::set<double> unique;
  const double n = static_cast<double>(sorted.size());
  for (int i = 1; i <= k; ++i) {
    double level = static_cast<double>(i) / static_cast<double>(k + 1);
    auto pos = static_cast<std::size_t>(std::floor(level * (n - 1.0)));
    unique.insert(sorted[pos]);
  }
  return {unique.begin(), unique.end()};
}

}  // namespace dsar
