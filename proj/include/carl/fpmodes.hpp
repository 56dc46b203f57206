#pragma once

// Fourier-harmonic form of the Fokker-Planck/field system.
//
// With P(theta) = (1/2pi) sum_n B_n e^{i n theta}:
//
//     dB_n/dtau = i n (a B_{n-1} + a* B_{n+1}) - n^2 D B_n
//     da/dtau   = B_1 - kappa a
//
// B_0 = 1 and B_{-n} = B_n*. The hierarchy is closed by B_{n_max+1} = 0.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "carl/error.hpp"

namespace carl {

using cplx = std::complex<double>;

struct FourierState {
  std::vector<cplx> modes;  ///< B_0 .. B_{n_max}
  cplx field{};             ///< a
  double tau = 0.0;

  int n_max() const { return static_cast<int>(modes.size()) - 1; }
  double bunching() const { return std::abs(modes[1]); }
  /// <p> = -2 Re(a B_1*).
  double mean_momentum() const { return -2.0 * (field * std::conj(modes[1])).real(); }
  double tail() const { return std::abs(modes.back()); }
};

struct FourierDerivative {
  std::vector<cplx> modes;
  cplx field{};
};

inline FourierState new_state(int n_max, cplx a0) {
  if (n_max < 2) throw DomainError("new_state: n_max must be >= 2, got " + std::to_string(n_max));
  FourierState s;
  s.modes.assign(static_cast<std::size_t>(n_max) + 1, cplx{});
  s.modes[0] = 1.0;
  s.field = a0;
  return s;
}

namespace detail {

// Works on raw spans so the RK stages can reuse buffers.
inline void mode_rhs(std::span<const cplx> B, cplx a, double kappa, double D,
                     std::span<cplx> dB, cplx& da) {
  const std::size_t n_max = B.size() - 1;
  const cplx ac = std::conj(a);
  dB[0] = 0.0;
  for (std::size_t n = 1; n <= n_max; ++n) {
    const double dn = static_cast<double>(n);
    const cplx upper = n < n_max ? B[n + 1] : cplx{};
    const cplx coupling = a * B[n - 1] + ac * upper;
    dB[n] = cplx(-dn * coupling.imag(), dn * coupling.real()) - dn * dn * D * B[n];
  }
  da = B[1] - kappa * a;
}

}  // namespace detail

inline void derivative(const FourierState& state, double kappa, double D, FourierDerivative& out) {
  out.modes.resize(state.modes.size());
  detail::mode_rhs(state.modes, state.field, kappa, D, out.modes, out.field);
}

inline FourierDerivative derivative(const FourierState& state, double kappa, double D) {
  FourierDerivative d;
  derivative(state, kappa, D, d);
  return d;
}

struct TrajectorySample {
  double tau;
  cplx field;
  double abs_a_sq;
  double bunching;
  double mean_p;
  double omega_inst;  ///< d arg(a) / dtau = Im(B_1 / a), from the field equation
};

inline TrajectorySample observe(const FourierState& s) {
  TrajectorySample o{};
  o.tau = s.tau;
  o.field = s.field;
  o.abs_a_sq = std::norm(s.field);
  o.bunching = s.bunching();
  o.mean_p = s.mean_momentum();
  o.omega_inst = std::abs(s.field) > 0.0 ? (s.modes[1] / s.field).imag() : 0.0;
  return o;
}

struct Trajectory {
  std::vector<TrajectorySample> samples;
  bool under_resolved = false;  ///< tail exceeded tolerance at the n_max cap
  bool steady = false;          ///< steady-state criterion met before t_end
  double max_tail = 0.0;        ///< largest |B_{n_max}| seen after the last resize
  int n_max_final = 0;
  int substeps = 1;             ///< RK4 substeps per dt actually used
};

struct IntegrateOptions {
  double dt = 0.01;
  double t_end = 100.0;
  int sample_every = 10;
  /// Double n_max whenever |B_{n_max}| rises above tail_tolerance.
  bool adaptive = true;
  double tail_tolerance = 1e-8;
  int n_max_cap = 1024;
  /// Stop once b and |a| change by less than steady_tolerance (relative) over steady_window.
  bool stop_at_steady = false;
  double steady_tolerance = 1e-9;
  double steady_window = 10.0;
};

struct IntegrationResult {
  Trajectory trajectory;
  FourierState final_state;
};

/// RK4 stability bound on the negative real axis is ~2.78; keep dt n^2 D under 2.5.
inline int stiffness_substeps(double dt, int n_max, double D) {
  const double stiff = static_cast<double>(n_max) * n_max * D;
  if (stiff <= 0.0) return 1;
  return std::max(1, static_cast<int>(std::ceil(dt * stiff / 2.5 * (1.0 + 1e-12))));
}

/// Fixed-step classical RK4. Each output step dt is split into the minimum
/// number of equal substeps that satisfies the stiffness bound for the current n_max.
inline IntegrationResult integrate(FourierState state, double kappa, double D,
                                   const IntegrateOptions& opt) {
  if (!(kappa > 0.0) || !(D >= 0.0)) throw DomainError("integrate: need kappa > 0, D >= 0");
  if (!(opt.dt > 0.0) || !(opt.t_end > 0.0) || opt.sample_every < 1)
    throw DomainError("integrate: dt, t_end and sample_every must be positive");
  if (state.modes.size() < 3) throw DomainError("integrate: state has n_max < 2");

  IntegrationResult out;
  Trajectory& traj = out.trajectory;

  std::vector<cplx> k1, k2, k3, k4, tmp;
  auto resize_buffers = [&](std::size_t n) {
    for (auto* v : {&k1, &k2, &k3, &k4, &tmp}) v->assign(n, cplx{});
  };
  resize_buffers(state.modes.size());

  int substeps = stiffness_substeps(opt.dt, state.n_max(), D);
  traj.substeps = substeps;

  auto rk4 = [&](double h) {
    const std::size_t n = state.modes.size();
    cplx ka1, ka2, ka3, ka4;
    auto& B = state.modes;
    const cplx a = state.field;
    detail::mode_rhs(B, a, kappa, D, k1, ka1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = B[i] + 0.5 * h * k1[i];
    detail::mode_rhs(tmp, a + 0.5 * h * ka1, kappa, D, k2, ka2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = B[i] + 0.5 * h * k2[i];
    detail::mode_rhs(tmp, a + 0.5 * h * ka2, kappa, D, k3, ka3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = B[i] + h * k3[i];
    detail::mode_rhs(tmp, a + h * ka3, kappa, D, k4, ka4);
    for (std::size_t i = 1; i < n; ++i) B[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    state.field += h / 6.0 * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4);
  };

  const double tau0 = state.tau;
  const auto n_steps = static_cast<long long>(std::llround(opt.t_end / opt.dt));
  const auto window_steps =
      std::max<long long>(1, static_cast<long long>(std::llround(opt.steady_window / opt.dt)));
  std::vector<std::pair<double, double>> history;  // (b, |a|) at every step, for steady detection

  traj.samples.push_back(observe(state));
  if (opt.stop_at_steady) history.emplace_back(state.bunching(), std::abs(state.field));

  for (long long step = 1; step <= n_steps; ++step) {
    const double h = opt.dt / substeps;
    for (int s = 0; s < substeps; ++s) rk4(h);
    state.tau = tau0 + static_cast<double>(step) * opt.dt;

    if (!std::isfinite(state.field.real()) || !std::isfinite(state.field.imag()) ||
        !std::isfinite(std::abs(state.modes[1])))
      throw NumericalError("integrate: non-finite state at tau = " + std::to_string(state.tau) +
                           " (n_max = " + std::to_string(state.n_max()) +
                           ", substeps = " + std::to_string(substeps) + ")");

    const double tail = state.tail();
    traj.max_tail = std::max(traj.max_tail, tail);
    if (tail > opt.tail_tolerance) {
      if (opt.adaptive && state.n_max() * 2 <= opt.n_max_cap) {
        state.modes.resize(state.modes.size() * 2 - 1, cplx{});
        resize_buffers(state.modes.size());
        substeps = stiffness_substeps(opt.dt, state.n_max(), D);
        traj.substeps = std::max(traj.substeps, substeps);
        traj.max_tail = state.tail();
      } else {
        traj.under_resolved = true;
      }
    }

    const bool sample_now = step % opt.sample_every == 0 || step == n_steps;
    bool done = false;
    if (opt.stop_at_steady) {
      const double b = state.bunching();
      const double amp = std::abs(state.field);
      history.emplace_back(b, amp);
      if (static_cast<long long>(history.size()) > window_steps) {
        const auto& [b_old, amp_old] = history[history.size() - 1 - static_cast<std::size_t>(window_steps)];
        auto rel = [](double now, double then) {
          return std::abs(now - then) / std::max(std::abs(now), 1e-300);
        };
        done = amp > 0.0 && rel(b, b_old) < opt.steady_tolerance &&
               rel(amp, amp_old) < opt.steady_tolerance;
      }
    }
    if (sample_now || done) traj.samples.push_back(observe(state));
    if (done) {
      traj.steady = true;
      break;
    }
  }
  traj.n_max_final = state.n_max();
  out.final_state = std::move(state);
  return out;
}

/// Least-squares slope of the unwrapped field phase over samples [first, last).
inline double instantaneous_frequency(const Trajectory& traj, std::size_t first, std::size_t last,
                                      double min_amplitude = 1e-10) {
  if (first >= last || last > traj.samples.size() || last - first < 2)
    throw DomainError("instantaneous_frequency: window must hold at least two samples");
  std::vector<double> phase;
  phase.reserve(last - first);
  double prev = 0.0;
  double offset = 0.0;
  for (std::size_t i = first; i < last; ++i) {
    const auto& s = traj.samples[i];
    if (std::abs(s.field) < min_amplitude)
      throw DomainError("instantaneous_frequency: |a| below " + std::to_string(min_amplitude) +
                        " at tau = " + std::to_string(s.tau) + "; phase undefined");
    const double raw = std::arg(s.field);
    if (i > first) {
      double jump = raw - prev;
      if (jump > std::numbers::pi) offset -= 2.0 * std::numbers::pi;
      if (jump < -std::numbers::pi) offset += 2.0 * std::numbers::pi;
    }
    prev = raw;
    phase.push_back(raw + offset);
  }
  double st = 0, sp = 0, stt = 0, stp = 0;
  const double n = static_cast<double>(phase.size());
  for (std::size_t i = 0; i < phase.size(); ++i) {
    const double t = traj.samples[first + i].tau;
    st += t;
    sp += phase[i];
    stt += t * t;
    stp += t * phase[i];
  }
  return (n * stp - st * sp) / (n * stt - st * st);
}

struct DensityProfile {
  std::vector<double> values;
  double min_value = 0.0;
  bool truncation_failure = false;  ///< some value fell below -1e-6
};

/// P(theta) = (1/2pi) [1 + 2 sum_{n>=1} Re(B_n e^{i n theta})].
inline DensityProfile reconstruct_density(const FourierState& state,
                                          std::span<const double> theta_grid) {
  DensityProfile out;
  out.values.reserve(theta_grid.size());
  out.min_value = theta_grid.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  for (double th : theta_grid) {
    double sum = state.modes[0].real();
    for (std::size_t n = 1; n < state.modes.size(); ++n)
      sum += 2.0 * (state.modes[n] * std::polar(1.0, static_cast<double>(n) * th)).real();
    const double p = sum / (2.0 * std::numbers::pi);
    out.values.push_back(p);
    out.min_value = std::min(out.min_value, p);
  }
  out.truncation_failure = out.min_value < -1e-6;
  return out;
}

}  // namespace carl
