#pragma once

// Special functions and one-dimensional quadrature.
//
// Contents:
//   * erf / erfc wrappers with domain checks
//   * hyp1f1_dec(u) = 1F1(1, 3/2; -u), the confluent-hypergeometric profile
//     that appears in slow-particle decoherence curves
//   * adaptive Gauss-Kronrod (G7,K15) quadrature on finite intervals and on
//     [0, inf) via the rational stretch q = L s/(1-s)
//   * a doubling-window probe that classifies semi-infinite integrals of
//     nonnegative integrands as convergent / divergent / indeterminate
//
// All routines are deterministic: identical inputs produce identical results
// (refinement order is a pure function of the computed panel errors).

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "covdec/common.hpp"

namespace covdec::specfun {

// ---------------------------------------------------------------------------
// Error function wrappers
// ---------------------------------------------------------------------------

inline double erf(double x) {
  require_finite(x, "erf argument");
  return std::erf(x);
}

inline double erfc(double x) {
  require_finite(x, "erfc argument");
  return std::erfc(x);
}

// sin(z)/z with a series near zero (relative accuracy ~1e-16).
inline double sinc(double z) {
  if (std::fabs(z) < 1e-4) {
    const double z2 = z * z;
    return 1.0 - z2 / 6.0 + z2 * z2 / 120.0;
  }
  return std::sin(z) / z;
}

// ---------------------------------------------------------------------------
// hyp1f1_dec(u) = 1F1(1, 3/2; -u)
//
// Three regimes:
//   u <= 1/2   alternating Kummer series  sum_n (-2u)^n / (2n+1)!!
//   u <  36    Kummer transform 1F1(1,3/2;-u) = e^-u 1F1(1/2,3/2;u), whose
//              series sum_n u^n / ((2n+1) n!) has all-positive terms, so no
//              cancellation at moderate u
//   u >= 36    asymptotic series (1/(2u)) sum_k (2k-1)!!/(2u)^k, truncated at
//              the smallest term
// Relative accuracy ~1e-13 across the domain.
// ---------------------------------------------------------------------------

inline double hyp1f1_dec(double u) {
  require_domain(std::isfinite(u) && u >= 0.0, "hyp1f1_dec requires finite u >= 0");
  constexpr double eps = 1e-17;
  constexpr int max_terms = 500;

  if (u == 0.0) return 1.0;

  if (u <= 0.5) {
    double term = 1.0, sum = 1.0;
    for (int n = 0; n < max_terms; ++n) {
      term *= -2.0 * u / static_cast<double>(2 * n + 3);
      sum += term;
      if (std::fabs(term) < eps * std::fabs(sum)) return sum;
    }
    throw NumericError("hyp1f1_dec: Kummer series failed to converge");
  }

  if (u < 36.0) {
    double term = 1.0, sum = 1.0;
    for (int n = 0; n < max_terms; ++n) {
      term *= u * static_cast<double>(2 * n + 1) /
              (static_cast<double>(2 * n + 3) * static_cast<double>(n + 1));
      sum += term;
      if (term < eps * sum) return std::exp(-u) * sum;
    }
    throw NumericError("hyp1f1_dec: positive series failed to converge");
  }

  // Asymptotic branch: terms shrink until k ~ u, far below eps by then.
  double term = 1.0, sum = 1.0;
  for (int k = 0; k < max_terms; ++k) {
    const double next = term * static_cast<double>(2 * k + 1) / (2.0 * u);
    if (next >= term) break;  // series started diverging; stop at the minimum
    term = next;
    sum += term;
    if (term < eps * sum) break;
  }
  return sum / (2.0 * u);
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod quadrature
// ---------------------------------------------------------------------------

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

namespace detail {

// (G7, K15) nodes and weights on [-1, 1] (QUADPACK values).  Rows 0-3 carry
// the shared Gauss nodes, rows 4-7 the Kronrod-only nodes.
struct Gk15Row {
  double x;   // abscissa (used as +-x)
  double gw;  // Gauss-7 weight (0 for Kronrod-only nodes)
  double kw;  // Kronrod-15 weight
};

inline constexpr Gk15Row kGk15[8] = {
    {0.000000000000000000000000000000000, 0.417959183673469387755102040816327,
     0.209482141084727828012999174891714},
    {0.405845151377397166906606412076961, 0.381830050505118944950369775488975,
     0.190350578064785409913256402421014},
    {0.741531185599394439863864773280788, 0.279705391489276667901467771423780,
     0.140653259715525918745189590510238},
    {0.949107912342758524526189684047851, 0.129484966168869693270611432679082,
     0.063092092629978553290700663189204},
    {0.207784955007898467600689403773245, 0.0, 0.204432940075298892414161999234649},
    {0.586087235467691130294144838258730, 0.0, 0.169004726639267902826583426598550},
    {0.864864423359769072789712788640926, 0.0, 0.104790010322250183839876322541518},
    {0.991455371120812639206854697526329, 0.0, 0.022935322010529224963732008058970},
};

// One (G7, K15) evaluation over [a, b].  The error bound follows QUADPACK:
// the raw |K15 - G7| difference is rescaled against the integral of
// |f - mean| (resasc), which inflates the bound on panels where f is rough
// (endpoint singularities fool the raw difference) and tightens it on smooth
// panels where K15 is far more accurate than |K15 - G7| suggests.
template <class F>
inline void gk15_panel(F&& f, double a, double b, double& value, double& err) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double fval[8][2];
  double gauss = 0.0, kronrod = 0.0, resabs = 0.0;
  for (int i = 0; i < 8; ++i) {
    const auto& row = kGk15[i];
    double fsum;
    if (row.x == 0.0) {
      fval[i][0] = fval[i][1] = f(c);
      fsum = fval[i][0];
      resabs += row.kw * std::fabs(fval[i][0]);
    } else {
      fval[i][0] = f(c - h * row.x);
      fval[i][1] = f(c + h * row.x);
      fsum = fval[i][0] + fval[i][1];
      resabs += row.kw * (std::fabs(fval[i][0]) + std::fabs(fval[i][1]));
    }
    gauss += row.gw * fsum;
    kronrod += row.kw * fsum;
  }
  const double reskh = 0.5 * kronrod;
  double resasc = kGk15[0].kw * std::fabs(fval[0][0] - reskh);
  for (int i = 1; i < 8; ++i)
    resasc += kGk15[i].kw *
              (std::fabs(fval[i][0] - reskh) + std::fabs(fval[i][1] - reskh));
  resasc *= std::fabs(h);
  resabs *= std::fabs(h);

  value = kronrod * h;
  err = std::fabs((kronrod - gauss) * h);
  if (resasc != 0.0 && err != 0.0)
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  constexpr double eps50 = 50.0 * 2.220446049250313e-16;
  err = std::max(err, eps50 * resabs);  // roundoff floor
  if (!std::isfinite(value))
    throw NumericError("quadrature: integrand produced a non-finite panel value");
}

struct Panel {
  double a, b, value, err;
};

// Heap order: largest error first; ties broken by position so the refinement
// sequence is a total order (bitwise deterministic).
struct PanelLess {
  bool operator()(const Panel& p, const Panel& q) const {
    if (p.err != q.err) return p.err < q.err;
    return p.a > q.a;
  }
};

}  // namespace detail

// Globally adaptive quadrature of f over [a, b]: repeatedly bisects the panel
// with the largest |K15 - G7| until the summed bound meets
// max(abs_tol, rel_tol * |integral|) or the panel budget runs out, in which
// case an AccuracyError carrying the best estimate is thrown.
template <class F>
inline QuadratureResult integrate_finite(F&& f, double a, double b,
                                         double rel_tol = 1e-10,
                                         double abs_tol = 1e-300,
                                         int max_panels = 4000) {
  require_finite(a, "integration bound");
  require_finite(b, "integration bound");
  require(rel_tol > 0.0 && abs_tol >= 0.0, "quadrature tolerances must be positive");
  if (a == b) return {0.0, 0.0};

  std::vector<detail::Panel> heap;
  const detail::PanelLess less{};
  double total_value = 0.0;
  double total_err = 0.0;
  auto push = [&](double lo, double hi) {
    detail::Panel p{lo, hi, 0.0, 0.0};
    detail::gk15_panel(f, lo, hi, p.value, p.err);
    total_value += p.value;
    total_err += p.err;
    heap.push_back(p);
    std::push_heap(heap.begin(), heap.end(), less);
  };

  push(a, b);

  // Panels narrower than double spacing cannot be split further; they move to
  // the frozen totals (their error is irreducible) while others keep refining.
  double frozen_value = 0.0, frozen_err = 0.0;

  while (total_err + frozen_err >
         std::max(abs_tol, rel_tol * std::fabs(total_value + frozen_value))) {
    if (heap.empty() || static_cast<int>(heap.size()) >= max_panels) {
      throw AccuracyError("quadrature: panel budget exhausted at error " +
                              std::to_string(total_err + frozen_err),
                          total_value + frozen_value, total_err + frozen_err);
    }
    std::pop_heap(heap.begin(), heap.end(), less);
    const detail::Panel worst = heap.back();
    heap.pop_back();
    total_value -= worst.value;
    total_err -= worst.err;
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      frozen_value += worst.value;
      frozen_err += worst.err;
      continue;
    }
    push(worst.a, mid);
    push(mid, worst.b);
  }

  // Recompute totals from the surviving panels in deterministic (heap array)
  // order; avoids drift from the incremental +/- updates above.
  double value = frozen_value, err = frozen_err;
  for (const auto& p : heap) {
    value += p.value;
    err += p.err;
  }
  return {value, err};
}

// Quadrature of f over [0, inf).  `tail_scale` sets the stretch of the
// rational map q = L s/(1-s): roughly the q beyond which f should be in its
// tail regime.  The integrand must decay fast enough for the mapped function
// to vanish as s -> 1 (exponential tails and algebraic tails faster than
// q^-2 both work; the map sends c/q^2 tails to smooth bounded functions).
template <class F>
inline QuadratureResult integrate_radial(F&& f, double tail_scale,
                                         double rel_tol = 1e-10,
                                         double abs_tol = 1e-300,
                                         int max_panels = 4000) {
  require(std::isfinite(tail_scale) && tail_scale > 0.0,
          "integrate_radial: tail_scale must be positive and finite");
  const double L = tail_scale;
  auto mapped = [&](double s) {
    const double om = 1.0 - s;
    const double q = L * s / om;
    if (!std::isfinite(q)) return 0.0;  // s rounded to 1: treat as infinite tail
    const double fv = f(q);
    return fv * L / (om * om);
  };
  QuadratureResult out = integrate_finite(mapped, 0.0, 1.0, rel_tol, abs_tol, max_panels);

  // The map cannot represent q beyond ~ L / ulp; panels there see zeros, so
  // mass in a very heavy (slower than q^-2) tail would go missing silently.
  // Charge a first-order bound on that truncated mass to the error estimate
  // and fail honestly if it breaks the requested tolerance.  For the
  // exponential and ~q^-2 tails this library integrates, the bound is ~0.
  const double q_far = L * 9.007199254740992e15;  // L * 2^53
  double f_far = f(q_far);
  if (!std::isfinite(f_far)) f_far = 0.0;
  const double tail_bound = 4.0 * std::fabs(f_far) * q_far;
  out.error_estimate += tail_bound;
  if (out.error_estimate > std::max(abs_tol, rel_tol * std::fabs(out.value)))
    throw AccuracyError("integrate_radial: unresolved tail beyond the map's range",
                        out.value, out.error_estimate);
  return out;
}

// ---------------------------------------------------------------------------
// Convergence probe for semi-infinite integrals of nonnegative integrands
// ---------------------------------------------------------------------------

enum class TailVerdict { converged, diverging, indeterminate };

struct TailProbe {
  TailVerdict verdict = TailVerdict::indeterminate;
  double total = 0.0;           // accumulated integral over the probed windows
  double last_increment = 0.0;  // final window contribution on the worst side
  std::string note;
};

// Classifies the integral of f >= 0 over (0, inf) by summing doubling windows
// outward from `scale` in both directions.  Convergence means both the outer
// windows [L 2^k, L 2^{k+1}] and the inner windows [L 2^{-k-1}, L 2^{-k}]
// decay geometrically; stagnating or growing increments (log- or power-law
// divergence) on either side yield `diverging`.
template <class F>
inline TailProbe probe_nonnegative_integral(F&& f, double scale,
                                            int max_windows = 48,
                                            double rel_floor = 1e-10) {
  require(std::isfinite(scale) && scale > 0.0, "probe: scale must be positive");
  TailProbe out;
  double total = 0.0;

  auto window_value = [&](double lo, double hi) {
    // Loose per-window tolerance; the classification only needs magnitudes.
    // A window that exhausts its panel budget still yields a usable estimate.
    double v;
    try {
      v = integrate_finite(f, lo, hi, 1e-8, 1e-300, 800).value;
    } catch (const AccuracyError& e) {
      v = e.best_estimate();
    }
    return std::max(v, 0.0);  // clamp roundoff; integrand is nonnegative by contract
  };

  // side = +1 probes outward (towards infinity), side = -1 inward (towards 0).
  auto probe_side = [&](int side) -> TailVerdict {
    std::vector<double> incs, side_totals;
    double side_total = 0.0;
    int quiet = 0;
    for (int k = 0; k < max_windows; ++k) {
      const double lo = side > 0 ? scale * std::ldexp(1.0, k) : scale * std::ldexp(1.0, -k - 1);
      const double hi = side > 0 ? scale * std::ldexp(1.0, k + 1) : scale * std::ldexp(1.0, -k);
      const double inc = window_value(std::min(lo, hi), std::max(lo, hi));
      total += inc;
      side_total += inc;
      incs.push_back(inc);
      side_totals.push_back(side_total);
      out.last_increment = inc;
      if (inc <= rel_floor * std::max(total, 1e-300)) {
        // Two consecutive negligible windows, after covering at least a
        // 16-fold range, count as convergence on this side.
        if (++quiet >= 2 && k >= 4) return TailVerdict::converged;
      } else {
        quiet = 0;
      }
      const double floor_abs = rel_floor * std::max(total, 1e-300);
      // Power-law divergence: six consecutive non-decreasing window values.
      if (k >= 8) {
        bool growing = incs[static_cast<std::size_t>(k)] > floor_abs;
        for (int j = k - 5; growing && j <= k; ++j)
          if (incs[static_cast<std::size_t>(j)] <
              0.999 * incs[static_cast<std::size_t>(j - 1)])
            growing = false;
        if (growing) return TailVerdict::diverging;
      }
      // Logarithmic divergence: doubling the window count keeps adding a
      // fixed fraction of the side total.  (A convergent side, however slow,
      // has side totals approaching a limit, so this ratio tends to 1.)
      if (k >= 12 && k % 2 == 0) {
        const double half = side_totals[static_cast<std::size_t>(k / 2)];
        if (half > 0.0 && side_total > 1.25 * half && side_total - half > floor_abs)
          return TailVerdict::diverging;
      }
    }
    return TailVerdict::indeterminate;
  };

  const TailVerdict outer = probe_side(+1);
  if (outer == TailVerdict::diverging) {
    out.verdict = TailVerdict::diverging;
    out.total = total;
    out.note = "outer windows do not decay";
    return out;
  }
  const TailVerdict inner = probe_side(-1);
  out.total = total;
  if (inner == TailVerdict::diverging) {
    out.verdict = TailVerdict::diverging;
    out.note = "inner windows do not decay";
  } else if (outer == TailVerdict::converged && inner == TailVerdict::converged) {
    out.verdict = TailVerdict::converged;
  } else {
    out.verdict = TailVerdict::indeterminate;
    out.note = "window budget exhausted before classification";
  }
  return out;
}

}  // namespace covdec::specfun
