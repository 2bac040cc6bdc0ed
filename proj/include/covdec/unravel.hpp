#pragma once

// Monte Carlo jump unraveling of the quantum linear Boltzmann equation for a
// superposition of momentum eigenstates.
//
// Between jumps each branch amplitude decays as exp(-Lambda(P_i) t / 2) (the
// state is renormalized, so only rate differences matter); jump waiting times
// follow the mixture survival law  sum_i |alpha_i|^2 exp(-Lambda_i tau),
// inverted by a bracketed root find.  At a jump a branch is selected with
// probability proportional to |alpha_i|^2 Lambda_i, one momentum transfer Q
// is drawn from that branch's collision kernel, every branch receives the
// same kick, and amplitudes are reweighted by sqrt(sigma S(Q, P_i)) and
// renormalized.  The two-branch coherence observable is
//   C(t) = E |alpha_1 alpha_2^*(t)| / |alpha_1 alpha_2^*(0)|.
//
// Reproducibility: trajectory j consumes stream j of the master seed, and all
// ensemble reductions are fixed-order pairwise sums, so results are identical
// for any thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "covdec/common.hpp"
#include "covdec/qlbe.hpp"
#include "covdec/rng.hpp"
#include "covdec/vec3.hpp"

namespace covdec::unravel {

using Complex = std::complex<double>;

// ---------------------------------------------------------------------------
// State types
// ---------------------------------------------------------------------------

struct Branch {
  Complex amplitude;
  Vec3 momentum;
};

struct MomentumSuperposition {
  std::vector<Branch> branches;

  // Structural checks: nonempty, finite, normalized to 1e-12.  Equal branch
  // momenta are allowed (the degenerate superposition keeps C(t) = 1).
  void validate() const {
    require(!branches.empty(), "superposition must have at least one branch");
    double norm_sq = 0.0;
    for (const auto& b : branches) {
      require(std::isfinite(b.amplitude.real()) && std::isfinite(b.amplitude.imag()),
              "superposition: amplitudes must be finite");
      require(is_finite(b.momentum), "superposition: momenta must be finite");
      norm_sq += std::norm(b.amplitude);
    }
    require(std::fabs(norm_sq - 1.0) <= 1e-12,
            "superposition must be normalized to unit norm (1e-12)");
  }
};

struct JumpEvent {
  double time = 0.0;
  Vec3 transfer;      // momentum kick Q (common to all branches)
  std::size_t branch = 0;  // branch whose kernel generated the kick
};

struct Snapshot {
  double time = 0.0;
  std::vector<Branch> branches;  // normalized amplitudes, current momenta
};

struct TrajectoryRecord {
  std::vector<Snapshot> snapshots;  // one per requested sample time
  std::vector<JumpEvent> jumps;
};

// ---------------------------------------------------------------------------
// Jump kernel interface
//
// The engine is generic over a kernel supplying rates, transfer draws and
// reweighting factors; QlbeKernel is the production implementation and test
// doubles (e.g. constant-rate kernels for Poisson statistics) plug in here.
// ---------------------------------------------------------------------------

class QlbeKernel {
 public:
  explicit QlbeKernel(const qlbe::GasDynamics& dyn) : dyn_(&dyn) {}

  double rate(Vec3 p) const { return dyn_->rate(p); }

  Vec3 sample(Vec3 p, Rng& rng) const { return dyn_->sample_transfer(p, rng); }

  // log(sigma(|Q|) S(Q, P)); exponent-shifted by the caller.
  double log_branch_factor(Vec3 q, Vec3 p) const {
    const qlbe::GasModel& g = dyn_->model();
    const double qn = norm(q);
    require_domain(qn > 0.0, "log_branch_factor: zero transfer");
    const double r = g.mass_ratio();
    const double arg = qn * (1.0 + r) + 2.0 * r * dot(q, p) / qn;
    return std::log(g.sigma(qn)) + 0.5 * std::log(g.beta * g.m / (2.0 * kPi)) -
           std::log(qn) - g.beta / (8.0 * g.m) * arg * arg;
  }

 private:
  const qlbe::GasDynamics* dyn_;
};

namespace detail {

// Solves  sum_i w_i exp(-rate_i * tau) = xi  for tau >= 0 (weights normalized,
// xi in (0,1)) by safeguarded Newton on a hard bracket; absolute accuracy
// better than 1e-12 relative in tau.  Equal rates short-circuit to the exact
// single-exponential inverse.
inline double mixture_waiting_time(const std::vector<double>& weights,
                                   const std::vector<double>& rates, double xi) {
  double rmin = rates[0], rmax = rates[0];
  for (double r : rates) {
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
  }
  require(rmin > 0.0 && std::isfinite(rmax), "waiting time: rates must be positive and finite");
  const double log_xi = std::log(xi);
  if (rmax - rmin <= 1e-14 * rmax) return -log_xi / rmax;

  double lo = -log_xi / rmax, hi = -log_xi / rmin;
  double tau = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    double s = 0.0, ds = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const double e = weights[i] * std::exp(-rates[i] * tau);
      s += e;
      ds -= rates[i] * e;
    }
    const double g = s - xi;
    if (g > 0.0)
      lo = tau;
    else
      hi = tau;
    if (hi - lo <= 1e-13 * std::max(hi, 1e-300)) break;
    const double newton = tau - g / ds;
    tau = (newton > lo && newton < hi) ? newton : 0.5 * (lo + hi);
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trajectory simulation
// ---------------------------------------------------------------------------

// Simulates one trajectory with an arbitrary jump kernel.  `sample_times`
// must be strictly increasing within [0, t_final].
template <class Kernel>
inline TrajectoryRecord simulate_trajectory_with(const Kernel& kernel,
                                                 const MomentumSuperposition& psi0,
                                                 double t_final,
                                                 const std::vector<double>& sample_times,
                                                 Rng& rng) {
  psi0.validate();
  require_domain(std::isfinite(t_final) && t_final >= 0.0, "t_final must be nonnegative");
  for (std::size_t i = 0; i < sample_times.size(); ++i) {
    require(std::isfinite(sample_times[i]) && sample_times[i] >= 0.0 &&
                sample_times[i] <= t_final,
            "sample times must lie in [0, t_final]");
    if (i > 0)
      require(sample_times[i] > sample_times[i - 1], "sample times must be strictly increasing");
  }

  const std::size_t nb = psi0.branches.size();
  constexpr std::int64_t max_jumps = 50'000'000;

  std::vector<Complex> amp(nb);
  std::vector<Vec3> mom(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    amp[i] = psi0.branches[i].amplitude;
    mom[i] = psi0.branches[i].momentum;
  }

  std::vector<double> rates(nb), weights(nb), logf(nb);
  auto refresh_rates = [&] {
    for (std::size_t i = 0; i < nb; ++i) rates[i] = kernel.rate(mom[i]);
  };
  auto refresh_weights = [&] {
    for (std::size_t i = 0; i < nb; ++i) weights[i] = std::norm(amp[i]);
  };
  auto renormalize = [&] {
    double n2 = 0.0;
    for (const auto& a : amp) n2 += std::norm(a);
    if (!(n2 > 0.0) || !std::isfinite(n2))
      throw NumericError("trajectory: state norm collapsed (" + std::to_string(n2) + ")");
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& a : amp) a *= inv;
  };

  renormalize();
  refresh_rates();
  refresh_weights();

  TrajectoryRecord rec;
  rec.snapshots.reserve(sample_times.size());

  // Amplitudes at t0 + dt given decay rates frozen since the last event.
  auto emit_snapshot = [&](double t_abs, double dt) {
    Snapshot snap;
    snap.time = t_abs;
    snap.branches.resize(nb);
    double n2 = 0.0;
    std::vector<Complex> a(nb);
    for (std::size_t i = 0; i < nb; ++i) {
      a[i] = amp[i] * std::exp(-0.5 * rates[i] * dt);
      n2 += std::norm(a[i]);
    }
    if (!(n2 > 0.0) || !std::isfinite(n2))
      throw NumericError("trajectory: snapshot norm collapsed");
    const double inv = 1.0 / std::sqrt(n2);
    for (std::size_t i = 0; i < nb; ++i) {
      snap.branches[i].amplitude = a[i] * inv;
      snap.branches[i].momentum = mom[i];
    }
    rec.snapshots.push_back(std::move(snap));
  };

  double t0 = 0.0;
  std::size_t next_sample = 0;
  std::int64_t n_jumps = 0;

  while (true) {
    const double xi = rng.uniform_pos();
    const double tau = detail::mixture_waiting_time(weights, rates, xi);
    const double t_jump = t0 + tau;

    const double horizon = std::min(t_jump, t_final);
    while (next_sample < sample_times.size() && sample_times[next_sample] <= horizon) {
      emit_snapshot(sample_times[next_sample], sample_times[next_sample] - t0);
      ++next_sample;
    }
    if (t_jump > t_final) break;

    // Advance amplitudes to the jump time and renormalize.
    for (std::size_t i = 0; i < nb; ++i) amp[i] *= std::exp(-0.5 * rates[i] * tau);
    renormalize();
    refresh_weights();

    // Branch selection with probability ~ w_i Lambda_i.
    double total = 0.0;
    for (std::size_t i = 0; i < nb; ++i) total += weights[i] * rates[i];
    if (!(total > 0.0) || !std::isfinite(total))
      throw NumericError("trajectory: total jump rate underflowed");
    double pick = rng.uniform01() * total;
    std::size_t chosen = nb - 1;
    for (std::size_t i = 0; i < nb; ++i) {
      pick -= weights[i] * rates[i];
      if (pick < 0.0) {
        chosen = i;
        break;
      }
    }

    const Vec3 q = kernel.sample(mom[chosen], rng);

    // Reweight by sqrt(sigma S) per branch, exponent-shifted for stability.
    double lmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nb; ++i) {
      logf[i] = kernel.log_branch_factor(q, mom[i]);
      lmax = std::max(lmax, logf[i]);
    }
    if (!std::isfinite(lmax))
      throw NumericError("trajectory: all branch reweighting factors vanished");
    for (std::size_t i = 0; i < nb; ++i) amp[i] *= std::exp(0.5 * (logf[i] - lmax));
    renormalize();

    for (std::size_t i = 0; i < nb; ++i) mom[i] = mom[i] + q;

    rec.jumps.push_back({t_jump, q, chosen});
    if (++n_jumps > max_jumps)
      throw NumericError("trajectory: jump count exceeded the runaway guard");

    t0 = t_jump;
    refresh_rates();
    refresh_weights();
  }

  return rec;
}

// Production entry point: trajectory under a gas's QLBE kernel.
inline TrajectoryRecord simulate_trajectory(const qlbe::GasDynamics& dyn,
                                            const MomentumSuperposition& psi0, double t_final,
                                            const std::vector<double>& sample_times, Rng& rng) {
  return simulate_trajectory_with(QlbeKernel(dyn), psi0, t_final, sample_times, rng);
}

// Convenience overload resolving a shared engine for the gas model.
inline TrajectoryRecord simulate_trajectory(const qlbe::GasModel& g,
                                            const MomentumSuperposition& psi0, double t_final,
                                            const std::vector<double>& sample_times, Rng& rng) {
  return simulate_trajectory_with(QlbeKernel(*qlbe::shared_dynamics(g)), psi0, t_final,
                                  sample_times, rng);
}

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

struct EnsembleOptions {
  std::size_t n_trajectories = 0;
  std::uint64_t master_seed = 0;
  int n_threads = 0;                 // 0: hardware concurrency
  double failure_tolerance = 0.01;   // abort above this failed fraction
};

struct EnsembleStats {
  std::vector<double> times;
  std::vector<double> coherence;         // C_hat(t); NaN for single-branch input
  std::vector<double> coherence_stderr;
  std::vector<double> mean_kinetic;      // sum_i w_i |P_i|^2 / 2M, averaged
  std::vector<double> kinetic_stderr;
  std::vector<Vec3> mean_momentum;       // sum_i w_i P_i, averaged
  std::size_t n_requested = 0;
  std::size_t n_failed = 0;
  std::uint64_t master_seed = 0;
};

// Runs `n_trajectories` independent trajectories (stream j of the master
// seed drives trajectory j) and reduces the coherence / momentum / energy
// observables with deterministic pairwise sums.  Trajectories that throw are
// excluded; more than failure_tolerance of them aborts with EnsembleError.
inline EnsembleStats run_ensemble(const qlbe::GasDynamics& dyn,
                                  const MomentumSuperposition& psi0, double t_final,
                                  const std::vector<double>& sample_times,
                                  const EnsembleOptions& opt) {
  psi0.validate();
  require(opt.n_trajectories > 0, "ensemble: need at least one trajectory");
  require(!sample_times.empty(), "ensemble: need at least one sample time");

  const std::size_t n = opt.n_trajectories;
  const std::size_t k = sample_times.size();
  const std::size_t nb = psi0.branches.size();

  const bool track_coherence = nb >= 2;
  double c0 = 0.0;
  if (track_coherence) {
    // Normalize the reference coherence from the (validated) initial state.
    c0 = std::abs(psi0.branches[0].amplitude) * std::abs(psi0.branches[1].amplitude);
  }
  const bool coherence_defined = track_coherence && c0 > 0.0;

  std::vector<double> c_all(n * k, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> ke_all(n * k, 0.0);
  std::vector<double> px_all(n * k, 0.0), py_all(n * k, 0.0), pz_all(n * k, 0.0);
  std::vector<std::uint8_t> failed(n, 0);

  const double inv_2M = 1.0 / (2.0 * dyn.model().M);

  auto worker_body = [&](std::size_t j) {
    Rng rng(opt.master_seed, j);
    try {
      const TrajectoryRecord rec =
          simulate_trajectory(dyn, psi0, t_final, sample_times, rng);
      for (std::size_t t = 0; t < k; ++t) {
        const Snapshot& snap = rec.snapshots[t];
        double ke = 0.0;
        Vec3 pm{};
        for (const auto& b : snap.branches) {
          const double w = std::norm(b.amplitude);
          ke += w * norm2(b.momentum) * inv_2M;
          pm = pm + w * b.momentum;
        }
        ke_all[j * k + t] = ke;
        px_all[j * k + t] = pm.x;
        py_all[j * k + t] = pm.y;
        pz_all[j * k + t] = pm.z;
        if (coherence_defined) {
          c_all[j * k + t] = std::abs(snap.branches[0].amplitude) *
                             std::abs(snap.branches[1].amplitude) / c0;
        }
      }
    } catch (const Error&) {
      failed[j] = 1;
    }
  };

  int threads = opt.n_threads > 0 ? opt.n_threads
                                  : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (threads == 1) {
    for (std::size_t j = 0; j < n; ++j) worker_body(j);
  } else {
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (std::size_t j = cursor.fetch_add(1); j < n; j = cursor.fetch_add(1)) worker_body(j);
      });
    for (auto& th : pool) th.join();
  }

  std::size_t n_failed = 0;
  for (auto f : failed) n_failed += f;
  if (static_cast<double>(n_failed) > opt.failure_tolerance * static_cast<double>(n))
    throw EnsembleError("ensemble: " + std::to_string(n_failed) + " of " + std::to_string(n) +
                        " trajectories failed");
  const std::size_t n_ok = n - n_failed;
  require(n_ok > 0, "ensemble: all trajectories failed");

  EnsembleStats stats;
  stats.times = sample_times;
  stats.n_requested = n;
  stats.n_failed = n_failed;
  stats.master_seed = opt.master_seed;
  stats.coherence.resize(k);
  stats.coherence_stderr.resize(k);
  stats.mean_kinetic.resize(k);
  stats.kinetic_stderr.resize(k);
  stats.mean_momentum.resize(k);

  // Deterministic reduction: compact per-time columns in trajectory order.
  std::vector<double> col(n_ok), col_sq(n_ok);
  auto reduce = [&](const std::vector<double>& all, std::size_t t, double& mean, double* stderr_out) {
    std::size_t idx = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (!failed[j]) col[idx++] = all[j * k + t];
    const double sum = pairwise_sum(col.data(), n_ok);
    mean = sum / static_cast<double>(n_ok);
    if (stderr_out) {
      for (std::size_t i = 0; i < n_ok; ++i) {
        const double d = col[i] - mean;
        col_sq[i] = d * d;
      }
      const double ss = pairwise_sum(col_sq.data(), n_ok);
      *stderr_out = n_ok > 1 ? std::sqrt(ss / (static_cast<double>(n_ok) *
                                               static_cast<double>(n_ok - 1)))
                             : 0.0;
    }
  };

  for (std::size_t t = 0; t < k; ++t) {
    if (coherence_defined) {
      reduce(c_all, t, stats.coherence[t], &stats.coherence_stderr[t]);
    } else {
      stats.coherence[t] = std::numeric_limits<double>::quiet_NaN();
      stats.coherence_stderr[t] = std::numeric_limits<double>::quiet_NaN();
    }
    reduce(ke_all, t, stats.mean_kinetic[t], &stats.kinetic_stderr[t]);
    double mx, my, mz;
    reduce(px_all, t, mx, nullptr);
    reduce(py_all, t, my, nullptr);
    reduce(pz_all, t, mz, nullptr);
    stats.mean_momentum[t] = {mx, my, mz};
  }
  return stats;
}

inline EnsembleStats run_ensemble(const qlbe::GasModel& g, const MomentumSuperposition& psi0,
                                  double t_final, const std::vector<double>& sample_times,
                                  const EnsembleOptions& opt) {
  return run_ensemble(*qlbe::shared_dynamics(g), psi0, t_final, sample_times, opt);
}

// ---------------------------------------------------------------------------
// Analytic two-branch decay rate
// ---------------------------------------------------------------------------

// Decoherence rate of a symmetric two-branch superposition with separation
// dp = P1 - P2 (branches at +-dp/2 about their mean):
//
//   gamma = Lambda(|dp|/2) - Lambda0 erf(sg)/sg,   sg = |dp| / (2 M v_mp),
//
// i.e. the mean branch collision rate minus the kernel-overlap rate.  The
// momentum argument is half the separation: gamma(0) = 0 exactly, and for a
// slow heavy tracer C(t) from the unraveling decays at this rate.  Constant
// cross-sections only (Lambda0 is otherwise undefined).
inline double analytic_decay_rate(const qlbe::GasModel& g, Vec3 p1, Vec3 p2) {
  g.validate();
  require(is_finite(p1) && is_finite(p2), "analytic_decay_rate: momenta must be finite");
  require(g.sigma.is_constant(),
          "analytic_decay_rate supports constant cross-sections only");
  const qlbe::DerivedScales sc = qlbe::DerivedScales::from(g);
  const Vec3 half = 0.5 * (p1 - p2);
  const double sg = norm(half) / (g.M * sc.v_mp);
  if (sg == 0.0) return 0.0;
  const double lam_half = qlbe::total_rate(g, half);
  const double overlap = *sc.lambda0 * std::erf(sg) / sg;
  return std::max(0.0, lam_half - overlap);
}

}  // namespace covdec::unravel
