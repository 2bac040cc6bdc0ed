#pragma once

// Recoil-free position decoherence of a massive tracer.
//
// When the tracer is so heavy that momentum kicks barely move it, coherences
// decay without transport:
//
//   D(x, t) = exp( -Lambda0 (2/sqrt(pi)) [1 - Phi_S(x)] t )
//
// where Phi_S is the normalized Fourier transform of the collision kernel
// sigma S(Q, P0) over the momentum transfer,  Phi_S(0) = 1.  For a slow
// tracer (|P0| << M v_mp) Phi_S approaches the closed profile
// 1F1(1, 3/2; -4 pi x^2 / lambda_th^2), so the decoherence saturation scale
// is the thermal de Broglie wavelength.
//
// The quadrature path here (angular reduction of sigma S, normalized by the
// independently computed total rate) deliberately shares no derivation with
// the hypergeometric profile; comparing the two is a cross-validation of
// both routes.

#include <cmath>
#include <complex>

#include "covdec/common.hpp"
#include "covdec/qlbe.hpp"
#include "covdec/specfun.hpp"
#include "covdec/vec3.hpp"

namespace covdec::posdec {

using Complex = std::complex<double>;

struct RecoillessModel {
  qlbe::GasModel gas;
  Vec3 p0;  // frozen tracer momentum

  void validate() const {
    gas.validate();
    require(is_finite(p0), "RecoillessModel: P0 must be finite");
    require(gas.sigma.is_constant(),
            "recoilless curves are defined for constant cross-sections");
  }

  // Dimensionless speed s0 = |P0| / (M v_mp).
  double s0() const {
    const qlbe::DerivedScales sc = qlbe::DerivedScales::from(gas);
    return norm(p0) / (gas.M * sc.v_mp);
  }

  // The slow-particle closed profile applies when |P0| <= 0.1 M v_mp.
  bool slow_particle_regime() const { return s0() <= 0.1; }
};

// Normalized Fourier transform of the collision kernel:
//   Phi_S(x) = [ integral d^3Q sigma S(Q,P0) e^{iQ.x/hbar} ] / [ integral d^3Q sigma S(Q,P0) ]
// The denominator comes from total_rate (independent code path), the
// numerator from the spherical/axial angular reduction.
inline Complex phi_s(const RecoillessModel& model, Vec3 x) {
  model.validate();
  require(is_finite(x), "phi_s: x must be finite");
  if (x.x == 0.0 && x.y == 0.0 && x.z == 0.0) return {1.0, 0.0};  // normalization

  const qlbe::GasModel& g = model.gas;
  const qlbe::detail::Frame fr(g);
  const double invh = 1.0 / g.hbar;
  const double sigma0 = g.sigma.constant_value();
  const double mstar = g.m * g.M / (g.m + g.M);

  // Denominator integral d^3Q sigma S = m*^2 Lambda(P0) / n_gas.
  const double denom = mstar * mstar * qlbe::total_rate(g, model.p0) / g.n_gas;

  const double p0n = norm(model.p0);
  const double s0 = p0n * fr.s_of_p;
  const double r = fr.r;

  if (p0n == 0.0) {
    // Isotropic kernel: numerator = integral dQ 2 pi Q sigma sqrt(bm/2pi)
    //   * (integral du e^{-(A' q)^2}) * sinc(Q|x|/hbar) ... with the u
    // integral equal to 2 exp(-(A'q)^2) at s0 = 0.
    const double xn = norm(x);
    const auto f = [&](double qd) {
      const double q = qd * fr.kappa;
      const double e = fr.ap * qd;
      return qd * std::exp(-e * e) * specfun::sinc(q * xn * invh);
    };
    const double tail = 8.0 * std::sqrt(2.0) / (1.0 + r);
    // Prefactor: 2 pi sqrt(bm/2pi) kappa^2 sigma * 2, matching total_rate's
    // frame constants (q^2 * 1/q * kappa^2 from dQ and 1/Q).
    const double pref =
        2.0 * kPi * std::sqrt(g.beta * g.m / (2.0 * kPi)) * fr.kappa * fr.kappa * sigma0 * 2.0;
    const double num = pref * specfun::integrate_radial(f, tail).value;
    return {num / denom, 0.0};
  }

  // Axially symmetric case: reduce over the azimuth around P0.
  const Vec3 axis = model.p0 / p0n;
  Vec3 e1, e2;
  orthonormal_frame(axis, e1, e2);
  const double x_par = dot(x, axis);
  const double x_perp = std::hypot(dot(x, e1), dot(x, e2));
  const double tail = std::max(4.0, (s0 + 6.0) * 2.0 * std::sqrt(2.0) / (1.0 + r));
  const double pref =
      2.0 * kPi * std::sqrt(g.beta * g.m / (2.0 * kPi)) * fr.kappa * fr.kappa * sigma0;

  // Nested tolerances: the outer quadrature must sit well above the inner
  // one's noise floor, with the inner degrading to its best estimate on
  // oscillatory panels rather than failing.  The absolute term (expressed in
  // outer-integral units via denom/pref) keeps genuinely tiny components --
  // Im Phi_S as s0 -> 0, both parts at large |x| -- from chasing noise; the
  // resulting Phi_S components are accurate to ~1e-9 absolute.
  const double abs_floor = 1e-9 * denom / pref;
  const auto outer = [&](auto part) {
    return specfun::integrate_radial(
               [&](double qd) {
                 const double q = qd * fr.kappa;
                 const auto inner = [&](double u) {
                   const double ex = fr.ap * qd + s0 * u;
                   const double phase = q * u * x_par * invh;
                   const double bess = std::cyl_bessel_j(
                       0.0, q * std::sqrt(std::max(0.0, 1.0 - u * u)) * x_perp * invh);
                   const Complex val(std::cos(phase) * bess, std::sin(phase) * bess);
                   return std::exp(-ex * ex) * part(val);
                 };
                 // Small panel budget: noise-floor panels would otherwise
                 // burn the full default budget before every fallback.
                 double iv;
                 try {
                   iv = specfun::integrate_finite(inner, -1.0, 1.0, 1e-12, 1e-300, 250).value;
                 } catch (const AccuracyError& e) {
                   iv = e.best_estimate();
                 }
                 return qd * iv;
               },
               tail, 3e-8, abs_floor)
        .value;
  };

  const double re = pref * outer([](Complex v) { return v.real(); });
  const double im = pref * outer([](Complex v) { return v.imag(); });
  return Complex{re, im} / denom;
}

// Recoil-free decoherence factor D(x, t).
inline Complex decoherence_factor(const RecoillessModel& model, Vec3 x, double time) {
  require_domain(std::isfinite(time) && time >= 0.0,
                 "decoherence_factor: time must be nonnegative");
  const qlbe::DerivedScales sc = qlbe::DerivedScales::from(model.gas);
  const Complex phi = phi_s(model, x);
  const Complex exponent = *sc.lambda0 * kTwoOverSqrtPi * (Complex{1.0, 0.0} - phi) * time;
  return std::exp(-exponent);
}

// Slow-particle closed profile 1F1(1, 3/2; -4 pi x^2 / lambda_th^2).
inline double slow_limit_phi_s(double lambda_th, double x_norm) {
  require_domain(std::isfinite(lambda_th) && lambda_th > 0.0,
                 "slow_limit_phi_s: lambda_th must be positive");
  require_domain(std::isfinite(x_norm), "slow_limit_phi_s: x must be finite");
  const double u = 4.0 * kPi * x_norm * x_norm / (lambda_th * lambda_th);
  return specfun::hyp1f1_dec(u);
}

}  // namespace covdec::posdec
