#pragma once

#include <optional>

#include "dsar/estimator.hpp"
#include "dsar/types.hpp"

namespace dsar {

enum class CandidateKind { TimeBreak, Threshold };

// PrePost attaches a 1{driver <= c} indicator to the first weight matrix and
// the complementary 1{driver > c} indicator to the second, per candidate.
// CumulativeLE attaches a constant plus all 1{driver <= c} indicators to
// every weight matrix.
enum class IndicatorStyle { PrePost, CumulativeLE };

// PrePost single-change consistency flags a candidate only when BOTH paired
// coefficients are nonzero; the multi-change rule flags when ANY coefficient
// at the candidate is nonzero.
enum class FlagRule { BothPaired, AnyNonzero };

struct CandidateSet {
  CandidateKind kind = CandidateKind::TimeBreak;
  std::vector<double> values;  // sorted strictly increasing; time breaks are integers in [1,T]
  IndicatorStyle style = IndicatorStyle::PrePost;

  void validate(int T) const;
};

struct DetectOptions {
  std::optional<FlagRule> rule;   // default: BothPaired for PrePost, AnyNonzero otherwise
  bool add_constants = false;     // footnote variant: constants on PrePost bases
  int max_candidates = 40;        // proxy for the candidate-count growth condition

  FlagRule effective_rule(IndicatorStyle style) const {
    if (rule) return *rule;
    return style == IndicatorStyle::PrePost ? FlagRule::BothPaired : FlagRule::AnyNonzero;
  }
};

struct DetectedChange {
  double value = 0.0;          // time location or threshold value
  int candidate_index = 0;     // position within the candidate set
  std::vector<double> coefficients;  // fitted coefficients that flagged it, per matrix
};

struct ChangeReport {
  CandidateSet candidates;
  std::vector<DetectedChange> detected;   // regime changes (constant-indicator flags excluded)
  std::vector<int> flagged_indices;       // raw rule-based flags, incl. boundary candidates
  int k_hat = 0;
  std::optional<ModelFit> fit;
  std::vector<int> segmentation;          // length-T regime labels
};

// Indicator basis for the saturated model. TimeBreak candidates use the time
// index as the driver; Threshold candidates need an observed driver series.
// Candidates whose indicator is constant over the sample trigger a warning.
DynamicBasis build_saturated_basis(const CandidateSet& candidates, const Vector& driver,
                                   const WeightSet& weights, int T, bool add_constants = false);

// Flat indices of the coefficients attached to candidate l (one per matrix
// for PrePost -- pre on matrix 1, post on matrix 2 -- or one per matrix for
// CumulativeLE).
std::vector<int> candidate_coefficients(const CandidateSet& candidates, const DynamicBasis& basis,
                                        int candidate_index);

// Applies the flag rule to a fitted coefficient vector.
std::vector<int> flagged_candidates(const Vector& phi, const CandidateSet& candidates,
                                    const DynamicBasis& basis, FlagRule rule);

// Fits the saturated model and extracts the detected changes. The driver is
// ignored for TimeBreak candidates.
ChangeReport detect(const PanelData& data, const WeightSet& weights,
                    const CandidateSet& candidates, const ModelSpec& spec_template,
                    const DetectOptions& options = {}, const Vector* driver = nullptr);

struct DacOptions {
  int subset_size = 12;
  int overlap = 1;
  // When set, mimics the smallest-residual subset pick instead of the
  // aggregation-and-refit scheme.
  bool pick_best_subset = false;
};

// Splits the candidates into overlapping contiguous windows, detects per
// window, aggregates surviving candidates (boundary candidates must flag in
// every window containing them), then refits once on the aggregate. A single
// window short-circuits to plain detect.
ChangeReport divide_and_conquer(const PanelData& data, const WeightSet& weights,
                                const CandidateSet& candidates, const ModelSpec& spec_template,
                                const DacOptions& dac, const DetectOptions& options = {},
                                const Vector* driver = nullptr);

// Pure aggregation helper exposed for testing: windows are index ranges into
// the candidate list; a candidate survives when it is flagged in every
// window that contains it (for boundary candidates shared by windows) or in
// its única window otherwise.
std::vector<int> aggregate_window_flags(const std::vector<std::pair<int, int>>& windows,
                                        const std::vector<std::vector<int>>& flags_per_window);

// Regime labels implied by change locations (1-based time breaks): the label
// increments right after each location; locations >= T induce no boundary.
std::vector<int> segmentation_from_breaks(int T, const std::vector<double>& locations);
// Regime labels for threshold detections: 1 + #{detected gamma < q_t}.
std::vector<int> segmentation_from_thresholds(const Vector& driver,
                                              const std::vector<double>& thresholds);

// Adjusted Rand index between two equal-length labelings.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

// k equally spaced empirical quantiles of the driver (levels i/(k+1)),
// deduplicated, for threshold candidate construction.
std::vector<double> threshold_quantile_candidates(const Vector& driver, int k);

}  // namespace dsar
