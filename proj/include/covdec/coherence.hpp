#pragma once

// Discrete 1D sections of the position density matrix and their evolution
// under a Levy-Khintchine exponent.
//
// Translation covariance makes the evolution diagonal in the separation
// variable: rho(X, X', t) = Phi(t, X - X') rho(X, X', 0).  A CoherenceGrid
// holds sample points X_j along a line and the matrix rho(X_j, X_k); evolve()
// multiplies each entry by Phi evaluated at the pair separation (the diagonal
// is copied verbatim -- populations are exactly preserved).

#include <cmath>
#include <complex>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "covdec/common.hpp"
#include "covdec/levy.hpp"
#include "covdec/vec3.hpp"

namespace covdec::coherence {

using Complex = std::complex<double>;

class CoherenceGrid {
 public:
  // Validating constructor: axis strictly increasing, rho Hermitian to 1e-12,
  // positive semi-definite to -N*1e-10 (both relative to the matrix scale)
  // and positive trace.  Non-uniform axes are accepted but flagged.
  static CoherenceGrid create(std::vector<double> axis, Eigen::MatrixXcd rho) {
    CoherenceGrid g(std::move(axis), std::move(rho));
    g.validate();
    return g;
  }

  std::size_t size() const { return axis_.size(); }
  const std::vector<double>& axis() const { return axis_; }
  const Eigen::MatrixXcd& matrix() const { return rho_; }

  // Uniform spacing if the axis is (numerically) equally spaced.
  std::optional<double> uniform_spacing() const {
    if (axis_.size() < 2) return std::nullopt;
    const double h = axis_[1] - axis_[0];
    for (std::size_t j = 1; j + 1 < axis_.size(); ++j)
      if (std::fabs(axis_[j + 1] - axis_[j] - h) > 1e-12 * std::max(1.0, std::fabs(h)))
        return std::nullopt;
    return h;
  }

  // Trace with the grid quadrature weight (trapezoid weights on non-uniform
  // axes); positive for a physical state.
  double trace() const {
    double t = 0.0;
    const std::size_t n = axis_.size();
    if (n == 1) return rho_(0, 0).real();
    for (std::size_t j = 0; j < n; ++j) {
      const double wl = j > 0 ? 0.5 * (axis_[j] - axis_[j - 1]) : 0.0;
      const double wr = j + 1 < n ? 0.5 * (axis_[j + 1] - axis_[j]) : 0.0;
      t += (wl + wr) * rho_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)).real();
    }
    return t;
  }

  void validate() const {
    require(!axis_.empty(), "CoherenceGrid: axis must be non-empty");
    for (double v : axis_) require(std::isfinite(v), "CoherenceGrid: axis must be finite");
    for (std::size_t j = 0; j + 1 < axis_.size(); ++j)
      require(axis_[j] < axis_[j + 1], "CoherenceGrid: axis must be strictly increasing");
    const Eigen::Index n = static_cast<Eigen::Index>(axis_.size());
    require(rho_.rows() == n && rho_.cols() == n,
            "CoherenceGrid: matrix dimensions must match the axis");
    require(rho_.allFinite(), "CoherenceGrid: matrix must be finite");

    const double scale = std::max(1.0, rho_.cwiseAbs().maxCoeff());
    const double herm_defect = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
    require(herm_defect <= 1e-12 * scale, "CoherenceGrid: matrix must be Hermitian");

    const Eigen::MatrixXcd herm = 0.5 * (rho_ + rho_.adjoint());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm);
    require(es.eigenvalues().minCoeff() >=
                -static_cast<double>(n) * 1e-10 * scale,
            "CoherenceGrid: matrix must be positive semi-definite");
    require(trace() > 0.0, "CoherenceGrid: trace must be positive");
  }

 private:
  CoherenceGrid(std::vector<double> axis, Eigen::MatrixXcd rho)
      : axis_(std::move(axis)), rho_(std::move(rho)) {}

  friend CoherenceGrid evolve(const CoherenceGrid&, const levy::LevyTriplet&, double, Vec3);

  std::vector<double> axis_;
  Eigen::MatrixXcd rho_;
};

// Evolves a coherence grid for `time` under the triplet, with the grid axis
// oriented along `direction` in space.  Entry (j,k) is multiplied by
// Phi(time, (X_j - X_k) * direction); the conjugate half is filled by
// Hermitian symmetry (exact, since Psi(-x) = conj Psi(x)).  The result is not
// re-validated: the Schur product with a Bochner factor preserves positivity
// up to quadrature accuracy.
inline CoherenceGrid evolve(const CoherenceGrid& grid, const levy::LevyTriplet& triplet,
                            double time, Vec3 direction) {
  triplet.validate();
  require_domain(std::isfinite(time) && time >= 0.0, "evolve: time must be nonnegative");
  const Vec3 dir = normalized(direction);

  const std::size_t n = grid.size();
  Eigen::MatrixXcd out = grid.matrix();

  const std::optional<double> h = grid.uniform_spacing();
  if (h) {
    // One Phi evaluation per distinct separation.
    std::vector<Complex> phi_by_offset(n);
    for (std::size_t d = 1; d < n; ++d)
      phi_by_offset[d] = levy::characteristic_function(triplet, time, (*h * static_cast<double>(d)) * dir);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < j; ++k) {
        const Complex f = phi_by_offset[j - k];
        out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) *= f;
        out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) *= std::conj(f);
      }
    return CoherenceGrid(grid.axis(), std::move(out));
  }

  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < j; ++k) {
      const double sep = grid.axis()[j] - grid.axis()[k];
      const Complex f = levy::characteristic_function(triplet, time, sep * dir);
      out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) *= f;
      out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) *= std::conj(f);
    }
  return CoherenceGrid(grid.axis(), std::move(out));
}

// Interference visibility |Phi(time, separation * direction)| for a two-path
// superposition separated by `separation` along `direction`.
inline double visibility(const levy::LevyTriplet& triplet, double time, double separation,
                         Vec3 direction) {
  require_domain(std::isfinite(separation), "visibility: separation must be finite");
  return std::abs(
      levy::characteristic_function(triplet, time, separation * normalized(direction)));
}

}  // namespace covdec::coherence
