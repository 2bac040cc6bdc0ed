#pragma once

// Shared error types, numeric constants and small helpers used across the
// library.  Everything here is header-only and dependency-free.

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace covdec {

using Complex = std::complex<double>;

// ---------------------------------------------------------------------------
// Error hierarchy.  All library failures derive from covdec::Error so callers
// can catch one type; the subclasses distinguish recoverable configuration
// mistakes from genuine numerical trouble.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument values (out of mathematical domain: negative u, NaN input).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Violated structural preconditions (non-PSD matrix, unnormalized state,
// mismatched dimensions).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// A computation produced non-finite intermediates or ran away.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Adaptive quadrature could not reach the requested tolerance.  Carries the
// best estimate obtained so the caller can decide whether it is usable.
class AccuracyError : public Error {
 public:
  AccuracyError(const std::string& msg, double best_estimate, double error_estimate)
      : Error(msg), best_estimate_(best_estimate), error_estimate_(error_estimate) {}

  double best_estimate() const { return best_estimate_; }
  double error_estimate() const { return error_estimate_; }

 private:
  double best_estimate_;
  double error_estimate_;
};

// Rejection sampling stalled (acceptance collapsed); message carries
// diagnostics about the proposal state.
class SamplerError : public Error {
 public:
  using Error::Error;
};

// Too many trajectory failures inside an ensemble run.
class EnsembleError : public Error {
 public:
  using Error::Error;
};

// Bad run configuration (CLI / JSON layer).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Constants and checks
// ---------------------------------------------------------------------------

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrtPi = 1.7724538509055160273;  // sqrt(pi)
inline constexpr double kTwoOverSqrtPi = 1.1283791670955125739;

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw PreconditionError(msg);
}

inline void require_domain(bool cond, const std::string& msg) {
  if (!cond) throw DomainError(msg);
}

inline void require_finite(double v, const std::string& name) {
  if (!std::isfinite(v)) throw DomainError(name + " must be finite");
}

// ---------------------------------------------------------------------------
// Deterministic pairwise summation.
//
// Fixed-order recursive halving: the result depends only on the contents of
// the array, never on thread count or chunking.  Used for all ensemble
// reductions so serial and parallel runs produce bit-identical statistics.
// ---------------------------------------------------------------------------

namespace detail {
inline double pairwise_sum_range(const double* data, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += data[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_range(data, half) + pairwise_sum_range(data + half, n - half);
}
}  // namespace detail

inline double pairwise_sum(const std::vector<double>& v) {
  return detail::pairwise_sum_range(v.data(), v.size());
}

inline double pairwise_sum(const double* data, std::size_t n) {
  return detail::pairwise_sum_range(data, n);
}

}  // namespace covdec
