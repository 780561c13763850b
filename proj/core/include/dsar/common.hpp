#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace dsar {

// Base class for all library errors. Subclasses distinguish bad inputs from
// numerically unidentifiable problems so callers can map them to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments (missing instruments, bad grids, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input data (file parse failures, dimension mismatches, NaNs).
class DataError : public Error {
 public:
  using Error::Error;
};

// The model is empirically unidentifiable (singular Gram / normal matrix).
class IdentificationError : public Error {
 public:
  using Error::Error;
};

// No feasible point satisfying the stationarity constraints could be found.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Covariance assembly failed (rank-deficient active design, degenerate CI).
class InferenceError : public Error {
 public:
  using Error::Error;
};

// Data generation failed (singular system at some time step).
class DgpError : public Error {
 public:
  using Error::Error;
};

using WarningHandler = std::function<void(const std::string&)>;

// Non-fatal diagnostics (zeroed diagonals, BIC fallback, PSD clipping, ...).
// Default handler writes to stderr; tests may install a capturing handler.
void warn(const std::string& message);
WarningHandler set_warning_handler(WarningHandler handler);

// Inverse standard normal CDF, |error| < 1e-14 after one Halley polish step.
double normal_quantile(double p);

}  // namespace dsar
