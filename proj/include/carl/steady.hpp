#pragma once

// Rotating steady states a = alpha e^{i omega tau}, B_n = beta_n e^{i n omega tau}.
//
// Substituting into the mode hierarchy gives the three-term recurrence
//
//     (omega - i n D) beta_n = alpha beta_{n-1} + alpha* beta_{n+1},   n != 0
//
// with alpha = beta_1 / (kappa + i omega). The minimal solution ratio
// r_n = beta_n / beta_{n-1} is the continued fraction
//
//     r_n = alpha / [(omega - i n D) - alpha* r_{n+1}].
//
// Fixing the gauge beta_1 = b >= 0, self-consistency r_1 = b reduces to
//
//     F(s, omega) = (kappa + i omega) den_1(|alpha|^2, omega) - 1 = 0,
//     s = b^2,  |alpha|^2 = s / (kappa^2 + omega^2),
//
// where den_1 = (omega - i D) - alpha* r_2 depends on alpha only through
// |alpha|^2. F is smooth through s = 0, and F(0, omega) = 0 is the dispersion
// relation on the imaginary axis, i.e. the instability threshold.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "carl/error.hpp"
#include "carl/params.hpp"
#include "carl/stability.hpp"

namespace carl {

using cplx = std::complex<double>;

struct PerfectBunching {
  double mean_p;  ///< negative: atoms recoil against the scattered field
  double a_sq;
  double omega;   ///< -mean_p
};

/// Unique real root of <p>(kappa^2 + <p>^2) = -2 kappa.
inline PerfectBunching perfect_bunching(double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa))
    throw DomainError("perfect_bunching: kappa must be positive");
  // x = -<p> solves x^3 + kappa^2 x - 2 kappa = 0, increasing in x; f((2 kappa)^{1/3}) > 0.
  auto f = [kappa](double x) { return x * x * x + kappa * kappa * x - 2.0 * kappa; };
  double lo = 0.0;
  double hi = std::cbrt(2.0 * kappa);
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  const double x = 0.5 * (lo + hi);
  return {-x, 1.0 / (kappa * kappa + x * x), x};
}

namespace detail {

inline double positive_cubic_root(double kappa, double rhs) {
  // x^3 + kappa^2 x = rhs, rhs >= 0.
  if (rhs <= 0.0) return 0.0;
  auto f = [&](double x) { return x * x * x + kappa * kappa * x - rhs; };
  double lo = 0.0;
  double hi = std::max(std::cbrt(rhs), 1e-300);
  while (f(hi) < 0.0) hi *= 2.0;
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// den_1 = d_1 - q / (d_2 - q / (d_3 - ...)), d_n = omega - i n D, truncated after `depth` levels.
inline cplx level_one_denominator(double q, double omega, double D, int depth) {
  cplx tail = 0.0;  // alpha* r_{n+1}
  for (int n = depth; n >= 1; --n) {
    const cplx den = cplx(omega, -static_cast<double>(n) * D) - tail;
    if (n == 1) return den;
    if (std::abs(den) < 1e-300)
      throw NumericalError("continued fraction: vanishing denominator at level " +
                           std::to_string(n));
    tail = q / den;
  }
  return {};
}

struct AdaptiveDenominator {
  cplx value;
  int depth;
};

inline AdaptiveDenominator converged_denominator(double q, double omega, double D,
                                                 int start_depth = 64, int max_depth = 4096) {
  int depth = start_depth;
  cplx prev = level_one_denominator(q, omega, D, depth);
  while (depth < max_depth) {
    const int next_depth = depth * 2;
    const cplx next = level_one_denominator(q, omega, D, next_depth);
    if (std::abs(next - prev) < 1e-12 * std::max(1.0, std::abs(next))) return {next, next_depth};
    prev = next;
    depth = next_depth;
  }
  throw ConvergenceError("continued fraction not converged at depth " + std::to_string(max_depth),
                         0.0);
}

}  // namespace detail

/// r_1 = beta_1 / beta_0 by downward recursion from r_{depth+1} = 0.
inline cplx continued_fraction_ratio(cplx alpha, double omega, double D, int depth) {
  if (depth < 2) throw DomainError("continued_fraction_ratio: depth must be >= 2");
  if (!(D > 0.0)) throw DomainError("continued_fraction_ratio: D must be positive");
  cplx r = 0.0;
  const cplx ac = std::conj(alpha);
  for (int n = depth; n >= 1; --n) {
    const cplx den = cplx(omega, -static_cast<double>(n) * D) - ac * r;
    if (std::abs(den) < 1e-300)
      throw NumericalError("continued fraction: vanishing denominator at level " +
                           std::to_string(n));
    r = alpha / den;
  }
  return r;
}

struct SteadyStateSolution {
  double bunching = 0.0;  ///< b = beta_1 >= 0 (gauge)
  double omega = 0.0;     ///< rotation frequency; linear-theory Im(lambda_+) on the trivial branch
  cplx alpha{};
  std::vector<cplx> beta;  ///< beta_0 .. beta_depth
  double mean_p = 0.0;     ///< -2 kappa b^2 / (kappa^2 + omega^2)
  bool converged = false;
  bool below_threshold = false;
  double residual = 0.0;   ///< max recurrence / field-relation residual
  int iterations = 0;
  int depth = 0;

  double a_sq() const { return std::norm(alpha); }
};

struct SteadyOptions {
  /// Starting point (b, omega) for Newton; overrides the built-in guess.
  std::optional<std::array<double, 2>> guess;
  double tolerance = 1e-12;
  int max_iterations = 200;
};

namespace detail {

struct SelfConsistency {
  double kappa;
  double D;

  std::array<double, 2> operator()(double s, double omega) const {
    const double q = s / (kappa * kappa + omega * omega);
    const cplx den = converged_denominator(q, omega, D).value;
    const cplx F = cplx(kappa, omega) * den - 1.0;
    return {F.real(), F.imag()};
  }
};

struct NewtonOutcome {
  double s;
  double omega;
  double residual;
  int iterations;
  bool converged;
};

/// Damped Newton on (s, omega) with a central-difference Jacobian.
inline NewtonOutcome newton_self_consistency(const SelfConsistency& F, double s, double omega,
                                             double tol, int max_iter) {
  auto norm2 = [](const std::array<double, 2>& v) { return std::hypot(v[0], v[1]); };
  std::array<double, 2> f = F(s, omega);
  double res = norm2(f);
  int it = 0;
  for (; it < max_iter && res > tol; ++it) {
    const double hs = 1e-6 * std::max(std::abs(s), 1e-3);
    const double hw = 1e-6 * std::max(std::abs(omega), 1e-3);
    const auto fs_p = F(s + hs, omega), fs_m = F(s - hs, omega);
    const auto fw_p = F(s, omega + hw), fw_m = F(s, omega - hw);
    const double j00 = (fs_p[0] - fs_m[0]) / (2 * hs), j10 = (fs_p[1] - fs_m[1]) / (2 * hs);
    const double j01 = (fw_p[0] - fw_m[0]) / (2 * hw), j11 = (fw_p[1] - fw_m[1]) / (2 * hw);
    const double det = j00 * j11 - j01 * j10;
    if (!std::isfinite(det) || det == 0.0) break;
    const double ds = -(j11 * f[0] - j01 * f[1]) / det;
    const double dw = -(-j10 * f[0] + j00 * f[1]) / det;

    double step = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
      const double s_new = s + step * ds;
      const double w_new = omega + step * dw;
      try {
        const auto f_new = F(s_new, w_new);
        const double r_new = norm2(f_new);
        if (std::isfinite(r_new) && r_new < res) {
          s = s_new;
          omega = w_new;
          f = f_new;
          res = r_new;
          accepted = true;
          break;
        }
      } catch (const NumericalError&) {
      } catch (const ConvergenceError&) {
      }
    }
    if (!accepted) break;
  }
  return {s, omega, res, it, res <= tol};
}

}  // namespace detail

namespace detail {

inline SteadyStateSolution assemble_solution(double kappa, double D, double s, double omega) {
  SteadyStateSolution sol;
  sol.bunching = std::sqrt(std::max(s, 0.0));
  sol.omega = omega;
  const cplx rotor(kappa, omega);
  sol.alpha = sol.bunching / rotor;
  const double q = std::norm(sol.alpha);
  const int depth = converged_denominator(q, omega, D).depth;
  sol.depth = depth;

  // Downward pass for the ratios, then beta_n = r_n beta_{n-1}.
  std::vector<cplx> ratio(static_cast<std::size_t>(depth) + 2, cplx{});
  const cplx ac = std::conj(sol.alpha);
  for (int n = depth; n >= 1; --n) {
    const cplx den = cplx(omega, -static_cast<double>(n) * D) - ac * ratio[n + 1];
    ratio[n] = sol.alpha / den;
  }
  sol.beta.assign(static_cast<std::size_t>(depth) + 1, cplx{});
  sol.beta[0] = 1.0;
  for (int n = 1; n <= depth; ++n) sol.beta[n] = ratio[n] * sol.beta[n - 1];
  // Pin the gauge exactly: beta_1 real and equal to b.
  sol.beta[1] = sol.bunching;

  double res = std::abs(sol.alpha - sol.beta[1] / rotor);
  for (int n = 1; n <= depth; ++n) {
    const cplx next = n < depth ? sol.beta[n + 1] : cplx{};
    const cplx r = cplx(omega, -static_cast<double>(n) * D) * sol.beta[n] -
                   sol.alpha * sol.beta[n - 1] - ac * next;
    res = std::max(res, std::abs(r));
  }
  sol.residual = res;
  sol.mean_p = -2.0 * kappa * s / (kappa * kappa + omega * omega);
  return sol;
}

inline SteadyStateSolution trivial_branch(double kappa, double D) {
  SteadyStateSolution sol;
  sol.bunching = 0.0;
  sol.omega = dispersion_roots(kappa, D).lambda_plus.imag();
  sol.alpha = 0.0;
  sol.beta = {cplx(1.0)};
  sol.mean_p = 0.0;
  sol.converged = true;
  sol.below_threshold = true;
  return sol;
}

}  // namespace detail

/// Exact rotating steady state. Below threshold (margin >= 1, or Newton
/// settling on b < 1e-10) the unbunched branch is returned with
/// below_threshold set.
inline SteadyStateSolution solve_steady(double kappa, double D, const SteadyOptions& opt = {}) {
  if (!(kappa > 0.0) || !(D > 0.0) || !std::isfinite(kappa) || !std::isfinite(D))
    throw DomainError("solve_steady: need kappa > 0 and D > 0");
  if (threshold_margin(kappa, D) >= 1.0) return detail::trivial_branch(kappa, D);

  const detail::SelfConsistency F{kappa, D};
  const double D_th = threshold_D(kappa);

  auto finish = [&](const detail::NewtonOutcome& n) {
    if (n.s < 1e-20) return detail::trivial_branch(kappa, D);
    auto sol = detail::assemble_solution(kappa, D, n.s, n.omega);
    sol.converged = true;
    sol.iterations = n.iterations;
    return sol;
  };
  auto plausible = [](const detail::NewtonOutcome& n) {
    return n.converged && n.s > -1e-14 && n.s <= 1.0 + 1e-9 && n.omega > 0.0;
  };

  int total_iterations = 0;
  if (opt.guess || D < 0.5 * D_th) {
    double b0 = 1.0;
    double w0 = perfect_bunching(kappa).omega;
    if (opt.guess) {
      b0 = (*opt.guess)[0];
      w0 = (*opt.guess)[1];
    }
    auto n = detail::newton_self_consistency(F, b0 * b0, w0, opt.tolerance, opt.max_iterations);
    total_iterations += n.iterations;
    if (plausible(n)) return finish(n);
  }

  // Continuation in D from a point where the perfect-bunching guess is reliable.
  const double D_start = std::min(0.25 * D_th, D);
  double s = 1.0;
  double w = perfect_bunching(kappa).omega;
  detail::NewtonOutcome last{};
  const int legs = 24;
  for (int i = 0; i <= legs; ++i) {
    const double Di = D_start + (D - D_start) * static_cast<double>(i) / legs;
    const detail::SelfConsistency Fi{kappa, Di};
    last = detail::newton_self_consistency(Fi, s, w, opt.tolerance, opt.max_iterations);
    total_iterations += last.iterations;
    if (!last.converged)
      throw ConvergenceError("solve_steady: Newton stalled during continuation at D = " +
                                 std::to_string(Di) + ", residual " + std::to_string(last.residual),
                             last.residual);
    s = last.s;
    w = last.omega;
  }
  auto sol = finish(last);
  sol.iterations = total_iterations;
  return sol;
}

struct GaussianApprox {
  double bunching;
  double omega;
  int iterations;
};

/// Steady state under a Gaussian-profile ansatz:
///   omega = 2 kappa b^2 / (kappa^2 + omega^2),
///   b     = exp(-D sqrt(kappa) / (2 sqrt(2 omega - kappa omega^2))).
/// Damped fixed-point iteration from the perfect-bunching point.
inline GaussianApprox gaussian_approx(double kappa, double D, double tol = 1e-13,
                                      int max_iter = 100000) {
  if (!(kappa > 0.0) || !(D >= 0.0)) throw DomainError("gaussian_approx: need kappa > 0, D >= 0");
  double b = 1.0;
  double omega = perfect_bunching(kappa).omega;
  for (int it = 1; it <= max_iter; ++it) {
    const double w = detail::positive_cubic_root(kappa, 2.0 * kappa * b * b);
    const double arg = 2.0 * w - kappa * w * w;
    if (!(arg > 0.0))
      throw DomainError("gaussian_approx: iteration left the domain 2 omega - kappa omega^2 > 0 (b = " +
                        std::to_string(b) + ")");
    const double b_next = std::exp(-D * std::sqrt(kappa) / (2.0 * std::sqrt(arg)));
    const double b_new = 0.5 * (b + b_next);
    const bool done = std::abs(b_new - b) < tol && std::abs(w - omega) < tol;
    b = b_new;
    omega = w;
    if (done) return {b, detail::positive_cubic_root(kappa, 2.0 * kappa * b * b), it};
  }
  throw ConvergenceError("gaussian_approx: fixed point not reached", std::abs(b));
}

struct SweepPoint {
  double D;
  std::optional<SteadyStateSolution> exact;
  std::optional<GaussianApprox> gaussian;
  std::string exact_error;
  std::string gaussian_error;
  /// Bunching rose with D relative to the previous point, i.e. continuation may have jumped branches.
  bool branch_jump = false;
};

/// Exact and Gaussian steady states along an ascending D grid, continuing
/// the exact solver from the previous nontrivial point.
inline std::vector<SweepPoint> sweep_D(double kappa, std::span<const double> D_grid) {
  if (D_grid.empty()) throw DomainError("sweep_D: empty grid");
  for (std::size_t i = 0; i < D_grid.size(); ++i) {
    if (!(D_grid[i] > 0.0)) throw DomainError("sweep_D: D values must be positive");
    if (i > 0 && !(D_grid[i] > D_grid[i - 1])) throw DomainError("sweep_D: grid must ascend");
  }
  std::vector<SweepPoint> out;
  std::optional<std::array<double, 2>> previous;
  double previous_b = 2.0;
  for (double D : D_grid) {
    SweepPoint pt{D, std::nullopt, std::nullopt, {}, {}, false};
    try {
      SteadyOptions opt;
      opt.guess = previous;
      auto sol = solve_steady(kappa, D, opt);
      if (!sol.below_threshold) {
        previous = std::array<double, 2>{sol.bunching, sol.omega};
        pt.branch_jump = sol.bunching > previous_b + 1e-9;
        previous_b = sol.bunching;
      }
      pt.exact = std::move(sol);
    } catch (const std::exception& e) {
      pt.exact_error = e.what();
    }
    try {
      pt.gaussian = gaussian_approx(kappa, D);
    } catch (const std::exception& e) {
      pt.gaussian_error = e.what();
    }
    out.push_back(std::move(pt));
  }
  return out;
}

struct RampPoint {
  double ratio;
  double kappa;
  double D;
  double bunching;
  double omega_over_kappa;
  double a_sq;
  bool below_threshold;
};

/// Steady response along a pump ramp P0 / P_T.
inline std::vector<RampPoint> ramp_scan(const PhysicalParams& phys, std::span<const double> ratios) {
  const double rho_th = rho_at_threshold(phys);
  std::vector<RampPoint> out;
  out.reserve(ratios.size());
  for (double r : ratios) {
    if (!(r > 0.0)) throw DomainError("ramp_scan: ratios must be positive");
    const auto s = derive_scaled(phys, rho_th * std::cbrt(r));
    const auto sol = solve_steady(s.kappa, s.D);
    out.push_back({r, s.kappa, s.D, sol.bunching, sol.omega / s.kappa, sol.a_sq(),
                   sol.below_threshold});
  }
  return out;
}

}  // namespace carl
