// Tests for the recoil-free position-decoherence curves: the normalized
// collision profile Phi_S, the decoherence factor D(x, t), and the
// slow-tracer confluent-hypergeometric profile.
//
// Oracles: the defining integrals re-evaluated independently in 30-digit
// arithmetic (tracer at rest: single radial quadrature; moving tracer
// on-axis: inner angular integral reduced to complex-erf closed form;
// off-axis: nested high-precision quadrature with the Bessel factor).
// Frozen values below carry ~16 correct digits.

#include <cmath>
#include <complex>

#include <gtest/gtest.h>

#include "covdec/levy.hpp"
#include "covdec/posdec.hpp"
#include "covdec/qlbe.hpp"

using covdec::DomainError;
using covdec::PreconditionError;
using covdec::Vec3;
namespace posdec = covdec::posdec;
namespace qlbe = covdec::qlbe;
namespace levy = covdec::levy;

namespace {

using Complex = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoOverSqrtPi = 1.1283791670955125739;

// Heavy tracer in a light gas (m/M = 1e-3), constant cross-section.
// lambda_th = sqrt(2 pi * 1.7) ~ 3.2682, v_mp = sqrt(2/1.7) ~ 1.0847.
qlbe::GasModel heavy_tracer_gas() {
  qlbe::GasModel g;
  g.n_gas = 0.8;
  g.m = 1.0;
  g.M = 1000.0;
  g.beta = 1.7;
  g.sigma = qlbe::CrossSection::constant(0.6);
  return g;
}

posdec::RecoillessModel at_rest() { return {heavy_tracer_gas(), Vec3{0.0, 0.0, 0.0}}; }

// Tracer moving along +z with dimensionless speed s0 = |P0| / (M v_mp).
posdec::RecoillessModel moving(double s0) {
  qlbe::GasModel g = heavy_tracer_gas();
  const auto sc = qlbe::DerivedScales::from(g);
  return {g, Vec3{0.0, 0.0, s0 * g.M * sc.v_mp}};
}

double lambda_th() { return qlbe::DerivedScales::from(heavy_tracer_gas()).lambda_th; }

double lambda0() { return *qlbe::DerivedScales::from(heavy_tracer_gas()).lambda0; }

// Frozen profile values for heavy_tracer_gas (30-digit quadrature oracles).
// Tracer at rest:
constexpr double kPhiRestHalfLth = 0.20000164851085759;  // |x| = lambda_th / 2
constexpr double kPhiRestTwoLth = 0.010069560990458613;  // |x| = 2 lambda_th
// s0 = 0.7, x = 0.9 lambda_th along the motion (complex-erf reduction):
constexpr double kPhiAxialRe = 0.052647275968388011;
constexpr double kPhiAxialIm = -0.02383075528959695;
// s0 = 0.7, x_par = 0.8 lambda_th, x_perp = 0.6 lambda_th (nested quadrature):
constexpr double kPhiOffAxisRe = 0.037207265217179948;
constexpr double kPhiOffAxisIm = -0.0092698358062871244;
// 1F1(1, 3/2; -4 pi), the profile one thermal wavelength out:
constexpr double kProfileAtLth = 0.041616629535668894;

// ---------------------------------------------------------------------------
// Model validation
// ---------------------------------------------------------------------------

TEST(RecoillessModelValidation, RejectsNonConstantCrossSection) {
  qlbe::GasModel g = heavy_tracer_gas();
  g.sigma = qlbe::CrossSection::gaussian_radial(0.6, 2.0);
  const posdec::RecoillessModel m{g, Vec3{0.0, 0.0, 0.0}};
  EXPECT_THROW(m.validate(), PreconditionError);
  EXPECT_THROW(posdec::phi_s(m, Vec3{1.0, 0.0, 0.0}), PreconditionError);
}

TEST(RecoillessModelValidation, RejectsNonFiniteMomentum) {
  const double nan = std::nan("");
  const posdec::RecoillessModel m{heavy_tracer_gas(), Vec3{nan, 0.0, 0.0}};
  EXPECT_THROW(m.validate(), PreconditionError);
}

TEST(RecoillessModelValidation, RejectsInvalidGas) {
  qlbe::GasModel g = heavy_tracer_gas();
  g.beta = -1.0;
  const posdec::RecoillessModel m{g, Vec3{0.0, 0.0, 0.0}};
  EXPECT_THROW(m.validate(), PreconditionError);
}

TEST(RecoillessModelValidation, SpeedRatioAndRegimeFlag) {
  EXPECT_EQ(at_rest().s0(), 0.0);
  EXPECT_TRUE(at_rest().slow_particle_regime());

  const posdec::RecoillessModel slow = moving(0.05);
  EXPECT_NEAR(slow.s0(), 0.05, 1e-15);
  EXPECT_TRUE(slow.slow_particle_regime());

  const posdec::RecoillessModel fast = moving(0.2);
  EXPECT_NEAR(fast.s0(), 0.2, 1e-15);
  EXPECT_FALSE(fast.slow_particle_regime());
}

// ---------------------------------------------------------------------------
// Phi_S
// ---------------------------------------------------------------------------

TEST(PhiS, UnitAtZeroSeparation) {
  for (const auto& m : {at_rest(), moving(0.7)}) {
    const Complex phi = posdec::phi_s(m, Vec3{0.0, 0.0, 0.0});
    EXPECT_EQ(phi.real(), 1.0);
    EXPECT_EQ(phi.imag(), 0.0);
  }
}

TEST(PhiS, RestingTracerIsRealAndEven) {
  const posdec::RecoillessModel m = at_rest();
  const Vec3 x{0.4, -1.1, 0.25};
  const Complex plus = posdec::phi_s(m, x);
  const Complex minus = posdec::phi_s(m, Vec3{-x.x, -x.y, -x.z});
  EXPECT_EQ(plus.imag(), 0.0);
  EXPECT_EQ(minus.real(), plus.real());
  EXPECT_EQ(minus.imag(), plus.imag());
}

TEST(PhiS, RestingTracerIsDirectionIndependent) {
  // 3-4-5 triple scaled by an exact power of two: |x| is bitwise identical
  // for both directions, so the isotropic profile must agree bitwise.
  const posdec::RecoillessModel m = at_rest();
  const double w = 0.5;
  const Complex a = posdec::phi_s(m, Vec3{3.0 * w, 4.0 * w, 0.0});
  const Complex b = posdec::phi_s(m, Vec3{0.0, 0.0, 5.0 * w});
  EXPECT_EQ(a.real(), b.real());
  EXPECT_EQ(a.imag(), b.imag());
}

TEST(PhiS, RestingTracerMatchesIndependentQuadrature) {
  const posdec::RecoillessModel m = at_rest();
  const double lth = lambda_th();
  const Complex half = posdec::phi_s(m, Vec3{0.0, 0.5 * lth, 0.0});
  const Complex two = posdec::phi_s(m, Vec3{2.0 * lth, 0.0, 0.0});
  EXPECT_NEAR(half.real(), kPhiRestHalfLth, 1e-8);
  EXPECT_NEAR(two.real(), kPhiRestTwoLth, 1e-8);
}

TEST(PhiS, MovingTracerMatchesIndependentQuadrature) {
  const posdec::RecoillessModel m = moving(0.7);
  const double lth = lambda_th();

  const Complex ax = posdec::phi_s(m, Vec3{0.0, 0.0, 0.9 * lth});
  EXPECT_NEAR(ax.real(), kPhiAxialRe, 1e-7);
  EXPECT_NEAR(ax.imag(), kPhiAxialIm, 1e-7);

  const Complex off = posdec::phi_s(m, Vec3{0.6 * lth, 0.0, 0.8 * lth});
  EXPECT_NEAR(off.real(), kPhiOffAxisRe, 1e-7);
  EXPECT_NEAR(off.imag(), kPhiOffAxisIm, 1e-7);
}

TEST(PhiS, MovingTracerConjugatesUnderReflection) {
  // S(Q, P0) is real, so Phi_S(-x) = conj(Phi_S(x)).  The reduction maps
  // x -> -x to an exact sign flip of the axial phase, so the equality is
  // exact in floating point as well.
  const posdec::RecoillessModel m = moving(0.7);
  const double lth = lambda_th();
  const Vec3 x{0.15 * lth, -0.35 * lth, 0.55 * lth};
  const Complex plus = posdec::phi_s(m, x);
  const Complex minus = posdec::phi_s(m, Vec3{-x.x, -x.y, -x.z});
  EXPECT_EQ(minus.real(), plus.real());
  EXPECT_EQ(minus.imag(), -plus.imag());
}

TEST(PhiS, MagnitudeBounded) {
  const double lth = lambda_th();
  const posdec::RecoillessModel rest = at_rest();
  for (double f : {1e-3, 0.3, 1.0, 3.0, 10.0}) {
    const Complex phi = posdec::phi_s(rest, Vec3{0.0, 0.0, f * lth});
    EXPECT_LE(std::abs(phi), 1.0 + 1e-8);
    if (f >= 0.3) {
      EXPECT_LT(std::abs(phi), 1.0);
    }
  }
  const posdec::RecoillessModel mov = moving(0.7);
  EXPECT_LT(std::abs(posdec::phi_s(mov, Vec3{0.0, 0.0, 0.9 * lth})), 1.0);
  EXPECT_LT(std::abs(posdec::phi_s(mov, Vec3{0.6 * lth, 0.0, 0.8 * lth})), 1.0);
  EXPECT_LT(std::abs(posdec::phi_s(moving(2.0), Vec3{0.0, 0.0, 0.5 * lth})), 1.0);
}

TEST(PhiS, ContinuousAcrossZeroMomentum) {
  // The axially-reduced moving path must join the isotropic resting path.
  const double lth = lambda_th();
  const Complex tiny = posdec::phi_s(moving(1e-7), Vec3{0.0, 0.0, 0.5 * lth});
  const Complex rest = posdec::phi_s(at_rest(), Vec3{0.0, 0.0, 0.5 * lth});
  EXPECT_NEAR(tiny.real(), rest.real(), 1e-6);
  EXPECT_NEAR(tiny.imag(), 0.0, 1e-6);
}

TEST(PhiS, SlowTracerMatchesClosedProfile) {
  // m/M = 1e-3 resting tracer against 1F1(1, 3/2; -4 pi x^2/lambda_th^2);
  // the expected residual (finite mass ratio) peaks near 6.4e-4.
  const posdec::RecoillessModel m = at_rest();
  const double lth = lambda_th();
  for (int k = 0; k <= 20; ++k) {
    const double x = 0.25 * static_cast<double>(k) * lth;
    const Complex phi = posdec::phi_s(m, Vec3{x, 0.0, 0.0});
    const double closed = posdec::slow_limit_phi_s(lth, x);
    EXPECT_NEAR(phi.real(), closed, 1e-3) << "x/lambda_th = " << 0.25 * k;
  }
}

TEST(PhiS, SaturatesMonotonically) {
  // 1 - Phi_S rises monotonically towards 1: distant coherences all decay
  // at the same saturated rate.
  const posdec::RecoillessModel m = at_rest();
  const double lth = lambda_th();
  double prev = -1.0;
  for (double f : {1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0}) {
    const double loss = 1.0 - posdec::phi_s(m, Vec3{0.0, f * lth, 0.0}).real();
    EXPECT_GT(loss, prev) << "x/lambda_th = " << f;
    EXPECT_LE(loss, 1.0);
    prev = loss;
  }
  EXPECT_GE(prev, 0.999);
}

// ---------------------------------------------------------------------------
// Consistency with the jump-exponent route
// ---------------------------------------------------------------------------

TEST(PhiSJumpConsistency, RestingKernelMatchesJumpExponent) {
  // The collision kernel doubles as a jump measure: its characteristic
  // exponent Psi obeys Phi_S = 1 - Psi / Lambda(P0).  Both sides come from
  // different code paths (finite-measure exponent vs normalized profile).
  const qlbe::GasModel g = heavy_tracer_gas();
  levy::LevyTriplet t;
  t.jumps = levy::JumpMeasure::structure_factor_kernel(g, Vec3{0.0, 0.0, 0.0});
  const double rate = qlbe::total_rate(g, Vec3{0.0, 0.0, 0.0});
  const posdec::RecoillessModel m = at_rest();
  const double lth = lambda_th();
  for (double f : {0.4, 1.2}) {
    const Vec3 x{0.0, f * lth, 0.0};
    const Complex psi = levy::characteristic_exponent(t, x);
    EXPECT_EQ(psi.imag(), 0.0);
    EXPECT_NEAR(1.0 - psi.real() / rate, posdec::phi_s(m, x).real(), 1e-8);
  }
}

TEST(PhiSJumpConsistency, MovingKernelMatchesJumpExponent) {
  // Tiny Q0 turns the compensator off, exposing the raw jump integral;
  // then Psi / Lambda(P0) = 1 - Phi_S holds for both components.
  const posdec::RecoillessModel m = moving(0.7);
  levy::LevyTriplet t;
  t.jumps = levy::JumpMeasure::structure_factor_kernel(m.gas, m.p0, 1e-100);
  const double rate = qlbe::total_rate(m.gas, m.p0);
  const double lth = lambda_th();
  for (const Vec3& x : {Vec3{0.0, 0.0, 0.9 * lth}, Vec3{0.6 * lth, 0.0, 0.8 * lth}}) {
    const Complex psi = levy::characteristic_exponent(t, x);
    const Complex phi = posdec::phi_s(m, x);
    EXPECT_NEAR(1.0 - psi.real() / rate, phi.real(), 1e-6);
    EXPECT_NEAR(-psi.imag() / rate, phi.imag(), 1e-6);
  }
}

TEST(PhiSJumpConsistency, RestingDecoherenceEqualsJumpEvolution) {
  // At rest Lambda(0) = Lambda0 * 2/sqrt(pi) exactly, so the decoherence
  // factor coincides with the characteristic function e^{-t Psi}.
  const qlbe::GasModel g = heavy_tracer_gas();
  levy::LevyTriplet t;
  t.jumps = levy::JumpMeasure::structure_factor_kernel(g, Vec3{0.0, 0.0, 0.0});
  const posdec::RecoillessModel m = at_rest();
  const Vec3 x{0.0, 0.0, 0.7 * lambda_th()};
  const double time = 1.0 / lambda0();
  const Complex d = posdec::decoherence_factor(m, x, time);
  const Complex viaJumps = std::exp(-time * levy::characteristic_exponent(t, x));
  EXPECT_NEAR(d.real(), viaJumps.real(), 1e-8);
  EXPECT_NEAR(d.imag(), viaJumps.imag(), 1e-8);
}

// ---------------------------------------------------------------------------
// Decoherence factor
// ---------------------------------------------------------------------------

TEST(DecoherenceFactor, UnitAtZeroTime) {
  const Complex d = posdec::decoherence_factor(at_rest(), Vec3{0.0, 0.8 * lambda_th(), 0.0}, 0.0);
  EXPECT_EQ(d.real(), 1.0);
  EXPECT_EQ(d.imag(), 0.0);
}

TEST(DecoherenceFactor, UnitAtZeroSeparation) {
  const Complex d = posdec::decoherence_factor(moving(0.7), Vec3{0.0, 0.0, 0.0}, 2.5);
  EXPECT_EQ(d.real(), 1.0);
  EXPECT_EQ(d.imag(), 0.0);
}

TEST(DecoherenceFactor, RejectsBadTime) {
  const posdec::RecoillessModel m = at_rest();
  EXPECT_THROW(posdec::decoherence_factor(m, Vec3{1.0, 0.0, 0.0}, -1.0), DomainError);
  EXPECT_THROW(posdec::decoherence_factor(m, Vec3{1.0, 0.0, 0.0}, std::nan("")), DomainError);
}

TEST(DecoherenceFactor, MagnitudeBounded) {
  const double lth = lambda_th();
  const double tau = 1.0 / lambda0();
  for (double f : {0.3, 1.0, 3.0}) {
    for (double lt : {0.5, 2.0, 5.0}) {
      const double mag =
          std::abs(posdec::decoherence_factor(at_rest(), Vec3{f * lth, 0.0, 0.0}, lt * tau));
      EXPECT_LE(mag, 1.0);
      EXPECT_GT(mag, 0.0);
    }
  }
  EXPECT_LE(std::abs(posdec::decoherence_factor(moving(0.7), Vec3{0.0, 0.0, 0.9 * lth}, tau)),
            1.0);
}

TEST(DecoherenceFactor, MatchesRateFormula) {
  // D = exp(-Lambda0 (2/sqrt(pi)) [1 - Phi_S] t), with the resting-rate
  // prefactor kept even for a moving tracer.
  const double lth = lambda_th();
  const double time = 1.3 / lambda0();
  for (const auto& m : {at_rest(), moving(0.7)}) {
    const Vec3 x{0.0, 0.0, 0.6 * lth};
    const Complex phi = posdec::phi_s(m, x);
    const Complex expected =
        std::exp(-(lambda0() * kTwoOverSqrtPi * time) * (Complex{1.0, 0.0} - phi));
    const Complex d = posdec::decoherence_factor(m, x, time);
    EXPECT_NEAR(d.real(), expected.real(), 1e-13);
    EXPECT_NEAR(d.imag(), expected.imag(), 1e-13);
  }
}

TEST(DecoherenceFactor, DistantSeparationDecaysAtSaturatedRate) {
  // Ten thermal wavelengths out the profile is ~4e-4, so |D| tracks the
  // saturated envelope exp(-2 Lambda0 t / sqrt(pi)) within 1%.
  const posdec::RecoillessModel m = at_rest();
  const Vec3 x{0.0, 0.0, 10.0 * lambda_th()};
  const double tau = 1.0 / lambda0();
  for (double lt : {0.0, 1.0, 2.5, 5.0}) {
    const double mag = std::abs(posdec::decoherence_factor(m, x, lt * tau));
    const double envelope = std::exp(-kTwoOverSqrtPi * lt);
    EXPECT_NEAR(mag / envelope, 1.0, 0.01) << "Lambda0 t = " << lt;
  }
}

TEST(DecoherenceFactor, SlowLimitFormulaAgrees) {
  // Closed slow-tracer law exp(-Lambda0 (2/sqrt(pi)) [1 - 1F1] t) against
  // the quadrature-backed factor, m/M = 1e-3.
  const posdec::RecoillessModel m = at_rest();
  const double lth = lambda_th();
  const double tau = 1.0 / lambda0();
  for (double f : {0.3, 0.7, 1.0, 2.0}) {
    for (double lt : {0.5, 1.8, 5.0}) {
      const Complex d = posdec::decoherence_factor(m, Vec3{f * lth, 0.0, 0.0}, lt * tau);
      const double closed =
          std::exp(-kTwoOverSqrtPi * lt * (1.0 - posdec::slow_limit_phi_s(lth, f * lth)));
      EXPECT_NEAR(d.real(), closed, 1e-3) << "x/lambda_th = " << f << ", Lambda0 t = " << lt;
      EXPECT_NEAR(d.imag(), 0.0, 1e-12);
    }
  }
}

// ---------------------------------------------------------------------------
// Slow-tracer closed profile
// ---------------------------------------------------------------------------

TEST(SlowLimitProfile, UnitAtZeroSeparation) {
  EXPECT_EQ(posdec::slow_limit_phi_s(3.2, 0.0), 1.0);
}

TEST(SlowLimitProfile, ThermalWavelengthValue) {
  // One thermal wavelength out the profile is 1F1(1, 3/2; -4 pi), within
  // 5% of the leading asymptotic 1/(8 pi).
  const double v = posdec::slow_limit_phi_s(2.5, 2.5);
  EXPECT_NEAR(v, kProfileAtLth, 1e-12);
  EXPECT_NEAR(v * 8.0 * kPi, 1.0, 0.05);
}

TEST(SlowLimitProfile, MonotoneDecreasingAndBounded) {
  const double lth = 1.75;
  double prev = 2.0;
  for (int k = 0; k <= 40; ++k) {
    const double v = posdec::slow_limit_phi_s(lth, 0.125 * static_cast<double>(k) * lth);
    EXPECT_LT(v, prev);
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
    prev = v;
  }
  EXPECT_LT(posdec::slow_limit_phi_s(lth, 100.0 * lth), 1e-4);
}

TEST(SlowLimitProfile, ScaleInvariance) {
  // Only x / lambda_th matters.
  EXPECT_DOUBLE_EQ(posdec::slow_limit_phi_s(2.0, 1.0), posdec::slow_limit_phi_s(4.0, 2.0));
}

TEST(SlowLimitProfile, RejectsBadArguments) {
  EXPECT_THROW(posdec::slow_limit_phi_s(0.0, 1.0), DomainError);
  EXPECT_THROW(posdec::slow_limit_phi_s(-2.0, 1.0), DomainError);
  EXPECT_THROW(posdec::slow_limit_phi_s(std::nan(""), 1.0), DomainError);
  EXPECT_THROW(posdec::slow_limit_phi_s(2.0, std::nan("")), DomainError);
}

}  // namespace
