#pragma once

#include <dsar/experiments.hpp>
#include <dsar/simulation.hpp>
#include <json.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dsar::cli {

using nlohmann::json;

// Strict JSON view: every key must be consumed by a getter; unknown keys are
// configuration errors (reported with their JSON pointer path).
class StrictObject {
 public:
  StrictObject(const json& node, std::string path);
  ~StrictObject() noexcept(false);
  StrictObject(const StrictObject&) = delete;
  StrictObject& operator=(const StrictObject&) = delete;

  bool has(const std::string& key) const;
  const json* get(const std::string& key);              // marks consumed, nullptr if absent
  const json& require(const std::string& key);
  void finish();                                        // throws on unconsumed keys

  const std::string& path() const { return path_; }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> consumed_;
  bool finished_ = false;
};

struct DataConfig {
  std::string panel_path;
  std::vector<std::string> weight_paths;
  WeightFormat weight_format = WeightFormat::DenseCsv;
  bool normalize_weights = true;
  bool instruments_from_covariates = false;  // true: U = X
  // basis: one of
  std::string basis_csv;                     // empty -> constants only
};

struct DriverConfig {
  enum class Kind { None, SelfExcitingMean, Csv };
  Kind kind = Kind::None;
  int lag = 1;
  std::string path;
};

struct FitConfig {
  ModelOptions model;
  std::uint64_t seed = 0;
  DataConfig data;
  bool infer = false;
  double level = 0.95;
  std::string out = ".";
};

struct DetectConfig {
  ModelOptions model;
  std::uint64_t seed = 0;
  DataConfig data;
  CandidateConfig candidates;
  DriverConfig driver;
  std::string out = ".";
};

struct SimulateConfig {
  DgpSpec dgp;
  std::string out = ".";
};

struct HistConfig {
  double lo = -5.0;
  double hi = 5.0;
  int bins = 40;
};

struct ReplicateConfig {
  enum class Task { Fit, Detect, Coverage };
  Task task = Task::Fit;
  DgpSpec dgp;
  ModelOptions model;
  CandidateConfig candidates;               // detect task
  std::vector<int> fixed_active;            // coverage task, 0-based
  double level = 0.95;
  bool infer_hist = false;
  HistConfig hist;
  int reps = 100;
  int workers = 0;                          // 0 -> auto
  std::string out = ".";
};

json load_json(const std::string& path);

FitConfig parse_fit_config(const json& root);
DetectConfig parse_detect_config(const json& root);
SimulateConfig parse_simulate_config(const json& root);
ReplicateConfig parse_replicate_config(const json& root);

// Loaded panel plus the basis declared alongside it.
struct LoadedData {
  PanelData panel;
  WeightSet weights;
  DynamicBasis basis;
};

LoadedData load_panel_data(const DataConfig& config, bool need_basis);

}  // namespace dsar::cli
