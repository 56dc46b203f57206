#pragma once

// Linear stability of the unbunched state: a = 0, B_n = 0 for n != 0.
//
// Small perturbations of (B_1, a) grow as exp(lambda tau) with
//
//     (lambda + kappa) (lambda + D) = i,
//
// so the system is unstable whenever the root with the larger real part has
// Re lambda > 0, which happens exactly when kappa D (D + kappa)^2 < 1.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "carl/error.hpp"

namespace carl {

using cplx = std::complex<double>;

struct DispersionResult {
  cplx lambda_plus;     ///< root with the larger real part
  cplx lambda_minus;
  double gain_over_kc;  ///< G / kappa_c = Re(lambda_plus) / kappa
  double shift_over_kc; ///< delta omega / kappa_c = Im(lambda_plus) / kappa
  double margin;        ///< kappa D (D + kappa)^2
  bool unstable;
};

namespace detail {

inline void require_kappa_D(double kappa, double D) {
  if (!(kappa > 0.0) || !std::isfinite(kappa))
    throw DomainError("kappa must be positive and finite, got " + std::to_string(kappa));
  if (!(D >= 0.0) || !std::isfinite(D))
    throw DomainError("D must be non-negative and finite, got " + std::to_string(D));
}

}  // namespace detail

inline double threshold_margin(double kappa, double D) {
  detail::require_kappa_D(kappa, D);
  const double s = D + kappa;
  return kappa * D * s * s;
}

/// Growth rate of the unstable mode from the explicit real/imaginary formulas
/// written in terms of C = (kappa - D) / 2. Used to cross-check the quadratic roots.
inline cplx closed_form_rate(double kappa, double D) {
  detail::require_kappa_D(kappa, D);
  const double c = 0.5 * (kappa - D);
  const double c2 = c * c;
  const double root = std::sqrt(1.0 + c2 * c2);
  const double re = std::sqrt(0.5 * (c2 + root)) - 0.5 * (kappa + D);
  const double im = 1.0 / (std::sqrt(2.0) * std::sqrt(root + c2));
  return {re, im};
}

inline DispersionResult dispersion_roots(double kappa, double D) {
  detail::require_kappa_D(kappa, D);

  // lambda^2 + (kappa + D) lambda + (kappa D - i) = 0.
  // Take the large-magnitude root without cancellation, get the other from
  // the product of roots.
  const double half_sum = 0.5 * (kappa + D);
  const double c = 0.5 * (kappa - D);
  const cplx s = std::sqrt(cplx(c * c, 1.0));  // principal branch, Re s >= 0
  const cplx big = -half_sum - s;
  const cplx small = cplx(kappa * D, -1.0) / big;

  DispersionResult r{};
  if (small.real() >= big.real()) {
    r.lambda_plus = small;
    r.lambda_minus = big;
  } else {
    r.lambda_plus = big;
    r.lambda_minus = small;
  }
  r.gain_over_kc = r.lambda_plus.real() / kappa;
  r.shift_over_kc = r.lambda_plus.imag() / kappa;
  r.margin = threshold_margin(kappa, D);
  r.unstable = r.lambda_plus.real() > 0.0;

  const cplx closed = closed_form_rate(kappa, D);
  const double scale = std::max(1.0, kappa + D);
  if (std::abs(closed - r.lambda_plus) > 1e-10 * scale)
    throw NumericalError("dispersion root disagrees with closed form at kappa=" +
                         std::to_string(kappa) + ", D=" + std::to_string(D));
  return r;
}

/// Diffusion at which the margin equals one. The margin is increasing in D,
/// and D_th <= min(kappa^{-1/3}, kappa^{-3}) bounds the bracket from above.
inline double threshold_D(double kappa) {
  detail::require_kappa_D(kappa, 0.0);
  double lo = 0.0;
  double hi = std::min(std::cbrt(1.0 / kappa), 1.0 / (kappa * kappa * kappa));
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double m = threshold_margin(kappa, mid);
    if (std::abs(m - 1.0) < 1e-12) return mid;
    (m < 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct InstabilityCell {
  double kappa;
  double D;
  DispersionResult result;
};

/// Row-major over (kappa, D): cell index = i_kappa * D_grid.size() + i_D.
inline std::vector<InstabilityCell> instability_map(std::span<const double> kappa_grid,
                                                    std::span<const double> D_grid) {
  if (kappa_grid.empty() || D_grid.empty()) throw DomainError("instability_map: empty grid");
  std::vector<InstabilityCell> cells;
  cells.reserve(kappa_grid.size() * D_grid.size());
  for (double k : kappa_grid)
    for (double d : D_grid) cells.push_back({k, d, dispersion_roots(k, d)});
  return cells;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) throw DomainError("linspace: n must be positive");
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  for (std::size_t i = 0; i < n; ++i)
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  v.back() = hi;
  return v;
}

inline std::vector<double> logspace(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi > 0.0)) throw DomainError("logspace: bounds must be positive");
  auto v = linspace(std::log(lo), std::log(hi), n);
  for (auto& x : v) x = std::exp(x);
  v.front() = lo;
  if (n > 1) v.back() = hi;
  return v;
}

}  // namespace carl
