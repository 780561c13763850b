#include "config.hpp"

#include <dsar/csv.hpp>

#include <cstdio>
#include <fstream>

namespace dsar::cli {

StrictObject::StrictObject(const json& node, std::string path)
    : node_(node), path_(std::move(path)) {
  if (!node_.is_object()) throw ConfigError(path_ + ": expected a JSON object");
}

StrictObject::~StrictObject() noexcept(false) {
  if (!finished_ && !std::uncaught_exceptions()) finish();
}

bool StrictObject::has(const std::string& key) const { return node_.contains(key); }

const json* StrictObject::get(const std::string& key) {
  consumed_.insert(key);
  auto it = node_.find(key);
  return it == node_.end() ? nullptr : &*it;
}

const json& StrictObject::require(const std::string& key) {
  const json* v = get(key);
  if (!v) throw ConfigError(path_ + ": missing required key '" + key + "'");
  return *v;
}

void StrictObject::finish() {
  finished_ = true;
  for (auto it = node_.begin(); it != node_.end(); ++it) {
    if (!consumed_.count(it.key()))
      throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
  }
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);
  json root;
  try {
    in >> root;
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return root;
}

namespace {

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return v.get<int>();
}

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + ": expected a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean");
  return v.get<bool>();
}

std::vector<double> as_number_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& item : v) out.push_back(as_number(item, where));
  return out;
}

Vector as_vector(const json& v, int length, const std::string& where) {
  if (v.is_number()) return Vector::Constant(length, v.get<double>());
  std::vector<double> list = as_number_list(v, where);
  if (static_cast<int>(list.size()) != length)
    throw ConfigError(where + ": expected length " + std::to_string(length));
  return Eigen::Map<Vector>(list.data(), length);
}

ModelOptions parse_model(const json* node, const std::string& path, std::uint64_t* seed) {
  ModelOptions options;
  if (!node) return options;
  StrictObject obj(*node, path);
  if (const json* v = obj.get("instrument_depth")) options.instrument_depth = as_int(*v, path);
  if (const json* v = obj.get("lambda_grid")) {
    if (v->is_array()) {
      options.lambda_grid = as_number_list(*v, path + ".lambda_grid");
    } else {
      StrictObject grid(*v, path + ".lambda_grid");
      if (const json* s = grid.get("size")) options.lambda_grid_size = as_int(*s, path);
      if (const json* s = grid.get("min_ratio")) options.lambda_min_ratio = as_number(*s, path);
      grid.finish();
    }
  }
  if (const json* v = obj.get("bic")) {
    std::string name = as_string(*v, path + ".bic");
    if (name == "growing_l") {
      options.bic_variant = BicVariant::GrowingL;
    } else if (name == "fixed") {
      options.bic_variant = BicVariant::Fixed;
    } else {
      throw ConfigError(path + ".bic: expected 'growing_l' or 'fixed'");
    }
  }
  if (const json* v = obj.get("selection")) {
    std::string name = as_string(*v, path + ".selection");
    if (name == "bic") {
      options.selection = SelectionCriterion::Bic;
    } else if (name == "residual") {
      options.selection = SelectionCriterion::ResidualOnly;
    } else {
      throw ConfigError(path + ".selection: expected 'bic' or 'residual'");
    }
  }
  if (const json* v = obj.get("tau_star")) options.tau_star = as_int(*v, path + ".tau_star");
  if (const json* v = obj.get("constraints")) {
    std::string name = as_string(*v, path + ".constraints");
    if (name == "backtrack") {
      options.constraints = ConstraintMode::Backtrack;
    } else if (name == "none") {
      options.constraints = ConstraintMode::None;
    } else {
      throw ConfigError(path + ".constraints: expected 'backtrack' or 'none'");
    }
  }
  if (const json* v = obj.get("seed")) {
    if (seed) *seed = static_cast<std::uint64_t>(as_int(*v, path + ".seed"));
  }
  obj.finish();
  return options;
}

DataConfig parse_data(const json& node, const std::string& path) {
  DataConfig config;
  StrictObject obj(node, path);
  config.panel_path = as_string(obj.require("panel"), path + ".panel");
  const json& weights = obj.require("weights");
  if (!weights.is_array() || weights.empty())
    throw ConfigError(path + ".weights: expected a nonempty array of file paths");
  for (const auto& w : weights) config.weight_paths.push_back(as_string(w, path + ".weights"));
  if (const json* v = obj.get("weights_format")) {
    std::string name = as_string(*v, path + ".weights_format");
    if (name == "dense") {
      config.weight_format = WeightFormat::DenseCsv;
    } else if (name == "triplet") {
      config.weight_format = WeightFormat::TripletCsv;
    } else {
      throw ConfigError(path + ".weights_format: expected 'dense' or 'triplet'");
    }
  }
  if (const json* v = obj.get("normalize_weights"))
    config.normalize_weights = as_bool(*v, path + ".normalize_weights");
  if (const json* v = obj.get("instruments")) {
    std::string name = as_string(*v, path + ".instruments");
    if (name == "covariates") {
      config.instruments_from_covariates = true;
    } else if (name == "columns") {
      config.instruments_from_covariates = false;
    } else {
      throw ConfigError(path + ".instruments: expected 'columns' or 'covariates'");
    }
  }
  if (const json* v = obj.get("basis")) {
    StrictObject basis(*v, path + ".basis");
    std::string kind = as_string(basis.require("kind"), path + ".basis.kind");
    if (kind == "csv") {
      config.basis_csv = as_string(basis.require("path"), path + ".basis.path");
    } else if (kind != "constant") {
      throw ConfigError(path + ".basis.kind: expected 'csv' or 'constant'");
    }
    basis.finish();
  }
  obj.finish();
  return config;
}

DriverConfig parse_driver(const json* node, const std::string& path) {
  DriverConfig config;
  if (!node) return config;
  StrictObject obj(*node, path);
  std::string kind = as_string(obj.require("kind"), path + ".kind");
  if (kind == "self_exciting_mean") {
    config.kind = DriverConfig::Kind::SelfExcitingMean;
    if (const json* v = obj.get("lag")) config.lag = as_int(*v, path + ".lag");
  } else if (kind == "csv") {
    config.kind = DriverConfig::Kind::Csv;
    config.path = as_string(obj.require("path"), path + ".path");
  } else {
    throw ConfigError(path + ".kind: expected 'self_exciting_mean' or 'csv'");
  }
  obj.finish();
  return config;
}

CandidateConfig parse_candidates(const json& node, const std::string& path) {
  CandidateConfig config;
  StrictObject obj(node, path);
  std::string kind = as_string(obj.require("kind"), path + ".kind");
  if (kind == "breaks") {
    config.kind = CandidateKind::TimeBreak;
  } else if (kind == "threshold") {
    config.kind = CandidateKind::Threshold;
  } else {
    throw ConfigError(path + ".kind: expected 'breaks' or 'threshold'");
  }
  if (const json* v = obj.get("list")) config.list = as_number_list(*v, path + ".list");
  if (const json* v = obj.get("grid_delta")) config.grid_delta = as_int(*v, path + ".grid_delta");
  if (const json* v = obj.get("include_last"))
    config.include_last = as_bool(*v, path + ".include_last");
  if (const json* v = obj.get("quantiles")) config.quantiles = as_int(*v, path + ".quantiles");
  if (const json* v = obj.get("style")) {
    std::string name = as_string(*v, path + ".style");
    if (name == "pre_post") {
      config.style = IndicatorStyle::PrePost;
    } else if (name == "cumulative") {
      config.style = IndicatorStyle::CumulativeLE;
    } else {
      throw ConfigError(path + ".style: expected 'pre_post' or 'cumulative'");
    }
  }
  if (const json* v = obj.get("rule")) {
    std::string name = as_string(*v, path + ".rule");
    if (name == "both") {
      config.rule = FlagRule::BothPaired;
    } else if (name == "any") {
      config.rule = FlagRule::AnyNonzero;
    } else {
      throw ConfigError(path + ".rule: expected 'both' or 'any'");
    }
  }
  if (const json* v = obj.get("add_constants"))
    config.add_constants = as_bool(*v, path + ".add_constants");
  if (const json* v = obj.get("max_candidates"))
    config.max_candidates = as_int(*v, path + ".max_candidates");
  if (const json* v = obj.get("dac")) {
    StrictObject dac(*v, path + ".dac");
    DacOptions options;
    if (const json* s = dac.get("subset_size")) options.subset_size = as_int(*s, path);
    if (const json* s = dac.get("overlap")) options.overlap = as_int(*s, path);
    if (const json* s = dac.get("pick_best_subset"))
      options.pick_best_subset = as_bool(*s, path);
    dac.finish();
    config.dac = options;
  }
  obj.finish();
  return config;
}

DgpSpec parse_dgp(const json& node, const std::string& path) {
  DgpSpec dgp;
  StrictObject obj(node, path);
  dgp.d = as_int(obj.require("d"), path + ".d");
  dgp.T = as_int(obj.require("T"), path + ".T");

  const json& weights = obj.require("weights");
  if (!weights.is_array() || weights.empty())
    throw ConfigError(path + ".weights: expected a nonempty array");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    std::string wpath = path + ".weights[" + std::to_string(i) + "]";
    StrictObject w(weights[i], wpath);
    WeightGen gen;
    std::string kind = as_string(w.require("kind"), wpath + ".kind");
    if (kind == "ahead_behind") {
      gen.kind = WeightGen::Kind::AheadBehind;
      if (const json* v = w.get("k")) gen.k = as_int(*v, wpath + ".k");
    } else if (kind == "bernoulli") {
      gen.kind = WeightGen::Kind::Bernoulli;
      if (const json* v = w.get("p")) gen.p = as_number(*v, wpath + ".p");
      if (const json* v = w.get("symmetric")) gen.symmetric = as_bool(*v, wpath + ".symmetric");
    } else if (kind == "file") {
      gen.kind = WeightGen::Kind::FromFile;
      gen.path = as_string(w.require("path"), wpath + ".path");
      if (const json* v = w.get("format")) {
        std::string name = as_string(*v, wpath + ".format");
        gen.format = name == "triplet" ? WeightFormat::TripletCsv : WeightFormat::DenseCsv;
      }
    } else {
      throw ConfigError(wpath + ".kind: expected 'ahead_behind', 'bernoulli' or 'file'");
    }
    w.finish();
    dgp.weights.push_back(std::move(gen));
  }

  if (const json* v = obj.get("x")) {
    StrictObject x(*v, path + ".x");
    if (const json* s = x.get("cols")) dgp.x.cols = as_int(*s, path + ".x.cols");
    if (const json* s = x.get("endogenous_add"))
      dgp.x.endogenous_add = as_number(*s, path + ".x.endogenous_add");
    x.finish();
  }
  dgp.mu = as_vector(obj.require("mu"), dgp.d, path + ".mu");
  dgp.beta = as_vector(obj.require("beta"), dgp.x.cols, path + ".beta");

  if (const json* v = obj.get("noise")) {
    StrictObject n(*v, path + ".noise");
    std::string kind = as_string(n.require("kind"), path + ".noise.kind");
    if (kind == "sparse_corr") {
      dgp.noise.kind = NoiseSpec::Kind::SparseCorrGaussian;
      if (const json* s = n.get("offdiag")) dgp.noise.offdiag = as_number(*s, path);
      if (const json* s = n.get("prob")) dgp.noise.prob = as_number(*s, path);
    } else if (kind == "gaussian") {
      dgp.noise.kind = NoiseSpec::Kind::IidGaussian;
    } else if (kind == "student_t") {
      dgp.noise.kind = NoiseSpec::Kind::StudentT;
      if (const json* s = n.get("df")) dgp.noise.df = as_int(*s, path);
    } else if (kind == "none") {
      dgp.noise.kind = NoiseSpec::Kind::None;
    } else {
      throw ConfigError(path + ".noise.kind: unknown noise kind '" + kind + "'");
    }
    n.finish();
  }

  const json& spatial = obj.require("spatial");
  StrictObject sp(spatial, path + ".spatial");
  std::string kind = as_string(sp.require("kind"), path + ".spatial.kind");
  if (kind == "varying") {
    VaryingCoefDgp vc;
    const json& l = sp.require("l");
    if (!l.is_array()) throw ConfigError(path + ".spatial.l: expected an array");
    for (const auto& item : l) vc.l.push_back(as_int(item, path + ".spatial.l"));
    std::vector<double> phi = as_number_list(sp.require("phi"), path + ".spatial.phi");
    vc.phi = Eigen::Map<Vector>(phi.data(), static_cast<int>(phi.size()));
    dgp.spatial = std::move(vc);
  } else if (kind == "breaks") {
    StepBreaksDgp steps;
    const json& rho = sp.require("rho");
    if (!rho.is_array()) throw ConfigError(path + ".spatial.rho: expected an array per matrix");
    for (const auto& matrix_segments : rho) {
      if (!matrix_segments.is_array())
        throw ConfigError(path + ".spatial.rho: expected segment arrays");
      std::vector<StepSegment> segs;
      for (const auto& seg : matrix_segments) {
        if (!seg.is_array() || seg.size() != 2)
          throw ConfigError(path + ".spatial.rho: segments are [end_t, value] pairs");
        StepSegment s;
        s.end_t = as_int(seg[0], path + ".spatial.rho");
        s.value = as_number(seg[1], path + ".spatial.rho");
        segs.push_back(s);
      }
      steps.rho.push_back(std::move(segs));
    }
    dgp.spatial = std::move(steps);
  } else if (kind == "threshold") {
    ThresholdDgp th;
    const json& driver = sp.require("driver");
    StrictObject dr(driver, path + ".spatial.driver");
    std::string dkind = as_string(dr.require("kind"), path + ".spatial.driver.kind");
    if (dkind == "ar") {
      th.driver.kind = ThresholdDriver::Kind::Ar;
      if (const json* v = dr.get("coef"))
        th.driver.ar_coef = as_number_list(*v, path + ".spatial.driver.coef");
    } else if (dkind == "self_exciting_mean") {
      th.driver.kind = ThresholdDriver::Kind::SelfExcitingMean;
      if (const json* v = dr.get("lag")) th.driver.lag = as_int(*v, path);
    } else {
      throw ConfigError(path + ".spatial.driver.kind: expected 'ar' or 'self_exciting_mean'");
    }
    dr.finish();
    th.gamma = as_number(sp.require("gamma"), path + ".spatial.gamma");
    std::vector<double> le = as_number_list(sp.require("rho_le"), path + ".spatial.rho_le");
    std::vector<double> gt = as_number_list(sp.require("rho_gt"), path + ".spatial.rho_gt");
    th.rho_le = Eigen::Map<Vector>(le.data(), static_cast<int>(le.size()));
    th.rho_gt = Eigen::Map<Vector>(gt.data(), static_cast<int>(gt.size()));
    dgp.spatial = std::move(th);
  } else {
    throw ConfigError(path + ".spatial.kind: expected 'varying', 'breaks' or 'threshold'");
  }
  sp.finish();

  if (const json* v = obj.get("seed")) dgp.seed = static_cast<std::uint64_t>(as_int(*v, path));
  if (const json* v = obj.get("strict_stationarity"))
    dgp.strict_stationarity = as_bool(*v, path);
  obj.finish();
  return dgp;
}

}  // namespace

FitConfig parse_fit_config(const json& root) {
  FitConfig config;
  StrictObject obj(root, "$");
  config.model = parse_model(obj.get("model"), "$.model", &config.seed);
  config.data = parse_data(obj.require("data"), "$.data");
  if (const json* v = obj.get("infer")) config.infer = as_bool(*v, "$.infer");
  if (const json* v = obj.get("level")) config.level = as_number(*v, "$.level");
  if (const json* v = obj.get("out")) config.out = as_string(*v, "$.out");
  obj.finish();
  return config;
}

DetectConfig parse_detect_config(const json& root) {
  DetectConfig config;
  StrictObject obj(root, "$");
  config.model = parse_model(obj.get("model"), "$.model", &config.seed);
  config.data = parse_data(obj.require("data"), "$.data");
  config.candidates = parse_candidates(obj.require("candidates"), "$.candidates");
  config.driver = parse_driver(obj.get("driver"), "$.driver");
  if (const json* v = obj.get("out")) config.out = as_string(*v, "$.out");
  obj.finish();
  return config;
}

SimulateConfig parse_simulate_config(const json& root) {
  SimulateConfig config;
  StrictObject obj(root, "$");
  config.dgp = parse_dgp(obj.require("dgp"), "$.dgp");
  if (const json* v = obj.get("out")) config.out = as_string(*v, "$.out");
  obj.finish();
  return config;
}

ReplicateConfig parse_replicate_config(const json& root) {
  ReplicateConfig config;
  StrictObject obj(root, "$");
  std::string task = as_string(obj.require("task"), "$.task");
  if (task == "fit") {
    config.task = ReplicateConfig::Task::Fit;
  } else if (task == "detect") {
    config.task = ReplicateConfig::Task::Detect;
  } else if (task == "coverage") {
    config.task = ReplicateConfig::Task::Coverage;
  } else {
    throw ConfigError("$.task: expected 'fit', 'detect' or 'coverage'");
  }
  config.dgp = parse_dgp(obj.require("dgp"), "$.dgp");
  std::uint64_t seed = config.dgp.seed;
  config.model = parse_model(obj.get("model"), "$.model", &seed);
  config.dgp.seed = seed;
  if (config.task == ReplicateConfig::Task::Detect)
    config.candidates = parse_candidates(obj.require("candidates"), "$.candidates");
  if (config.task == ReplicateConfig::Task::Coverage) {
    const json& active = obj.require("fixed_active");
    if (!active.is_array() || active.empty())
      throw ConfigError("$.fixed_active: expected a nonempty array of 1-based indices");
    for (const auto& v : active) {
      int idx = as_int(v, "$.fixed_active");
      if (idx < 1) throw ConfigError("$.fixed_active: indices are 1-based");
      config.fixed_active.push_back(idx - 1);
    }
  }
  if (const json* v = obj.get("level")) config.level = as_number(*v, "$.level");
  if (const json* v = obj.get("hist")) {
    StrictObject h(*v, "$.hist");
    if (const json* s = h.get("min")) config.hist.lo = as_number(*s, "$.hist.min");
    if (const json* s = h.get("max")) config.hist.hi = as_number(*s, "$.hist.max");
    if (const json* s = h.get("bins")) config.hist.bins = as_int(*s, "$.hist.bins");
    h.finish();
    config.infer_hist = true;
  }
  if (const json* v = obj.get("reps")) config.reps = as_int(*v, "$.reps");
  if (const json* v = obj.get("workers")) config.workers = as_int(*v, "$.workers");
  if (const json* v = obj.get("out")) config.out = as_string(*v, "$.out");
  obj.finish();
  return config;
}

LoadedData load_panel_data(const DataConfig& config, bool need_basis) {
  CsvTable table = read_csv(config.panel_path, /*has_header=*/true);
  if (table.header.size() < 3 || table.header[0] != "t" || table.header[1] != "unit" ||
      table.header[2] != "y")
    throw DataError(config.panel_path + ": header must start with t,unit,y");

  int r = 0, s = 0;
  std::size_t col = 3;
  while (col < table.header.size() && table.header[col] == "x" + std::to_string(r + 1)) {
    ++r;
    ++col;
  }
  while (col < table.header.size() && table.header[col] == "u" + std::to_string(s + 1)) {
    ++s;
    ++col;
  }
  if (col != table.header.size())
    throw DataError(config.panel_path + ": unexpected column '" + table.header[col] + "'");

  // Infer the panel dimensions from the sorted long layout.
  int d = 0;
  while (static_cast<std::size_t>(d) < table.rows.size() &&
         parse_int_cell(table.rows[static_cast<std::size_t>(d)][0], config.panel_path,
                        static_cast<std::size_t>(d) + 2) == 1)
    ++d;
  if (d == 0) throw DataError(config.panel_path + ": no rows for t=1");
  if (table.rows.size() % static_cast<std::size_t>(d) != 0)
    throw DataError(config.panel_path + ": row count is not a multiple of the unit count");
  int T = static_cast<int>(table.rows.size()) / d;

  LoadedData out;
  out.panel.y.resize(d, T);
  out.panel.X.assign(static_cast<std::size_t>(T), Matrix(d, r));
  if (s > 0) out.panel.U.assign(static_cast<std::size_t>(T), Matrix(d, s));
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < d; ++i) {
      std::size_t row_idx = static_cast<std::size_t>(t) * d + i;
      const auto& row = table.rows[row_idx];
      std::size_t line = row_idx + 2;  // header occupies line 1
      if (static_cast<int>(row.size()) != 3 + r + s)
        throw DataError(config.panel_path + ":" + std::to_string(line) + ": wrong cell count");
      long long tt = parse_int_cell(row[0], config.panel_path, line);
      long long unit = parse_int_cell(row[1], config.panel_path, line);
      if (tt != t + 1 || unit != i + 1)
        throw DataError(config.panel_path + ":" + std::to_string(line) +
                        ": rows must be sorted by (t, unit) over a full grid");
      out.panel.y(i, t) = parse_double_cell(row[2], config.panel_path, line);
      for (int c = 0; c < r; ++c)
        out.panel.X[static_cast<std::size_t>(t)](i, c) =
            parse_double_cell(row[static_cast<std::size_t>(3 + c)], config.panel_path, line);
      for (int c = 0; c < s; ++c)
        out.panel.U[static_cast<std::size_t>(t)](i, c) =
            parse_double_cell(row[static_cast<std::size_t>(3 + r + c)], config.panel_path, line);
    }
  }
  if (config.instruments_from_covariates) {
    if (s > 0)
      throw ConfigError(config.panel_path +
                        ": instruments='covariates' conflicts with u columns in the panel");
    out.panel.U = out.panel.X;
  }
  out.panel.validate();

  for (const auto& path : config.weight_paths)
    out.weights.matrices.push_back(
        load_weight_matrix(path, config.weight_format, d, config.normalize_weights));
  out.weights.validate();

  if (!need_basis) return out;

  const int p = out.weights.p();
  if (config.basis_csv.empty()) {
    out.basis = DynamicBasis::constants_only(p, T);
    return out;
  }
  CsvTable basis = read_csv(config.basis_csv, /*has_header=*/true);
  if (basis.header.empty() || basis.header[0] != "t")
    throw DataError(config.basis_csv + ": first column must be t");
  if (static_cast<int>(basis.rows.size()) != T)
    throw DataError(config.basis_csv + ": expected " + std::to_string(T) + " rows");
  std::vector<int> l(static_cast<std::size_t>(p), 0);
  std::vector<std::pair<int, int>> columns;  // (j, k) per csv column
  for (std::size_t c = 1; c < basis.header.size(); ++c) {
    const std::string& name = basis.header[c];
    int j = 0, k = 0;
    if (std::sscanf(name.c_str(), "z_%d_%d", &j, &k) != 2 || j < 1 || j > p || k < 1)
      throw DataError(config.basis_csv + ": column '" + name +
                      "' is not of the form z_<j>_<k> with valid indices");
    if (k != l[static_cast<std::size_t>(j - 1)] + 1)
      throw DataError(config.basis_csv + ": column '" + name + "' out of order");
    l[static_cast<std::size_t>(j - 1)] = k;
    columns.emplace_back(j - 1, k - 1);
  }
  std::vector<Matrix> per_matrix;
  for (int j = 0; j < p; ++j) per_matrix.emplace_back(T, l[static_cast<std::size_t>(j)]);
  for (int t = 0; t < T; ++t) {
    const auto& row = basis.rows[static_cast<std::size_t>(t)];
    std::size_t line = static_cast<std::size_t>(t) + 2;
    if (row.size() != basis.header.size())
      throw DataError(config.basis_csv + ":" + std::to_string(line) + ": wrong cell count");
    long long tt = parse_int_cell(row[0], config.basis_csv, line);
    if (tt != t + 1)
      throw DataError(config.basis_csv + ":" + std::to_string(line) + ": rows must follow t order");
    for (std::size_t c = 1; c < row.size(); ++c) {
      auto [j, k] = columns[c - 1];
      per_matrix[static_cast<std::size_t>(j)](t, k) =
          parse_double_cell(row[c], config.basis_csv, line);
    }
  }
  out.basis = DynamicBasis::from_columns(std::move(per_matrix));
  return out;
}

}  // namespace dsar::cli
