#pragma once

// Power-law checks of the threshold against laboratory knobs.
//
// At fixed N and detuning the pump power follows rho^3 / N (rho ~ (P0 N)^{1/3}),
// so rho_th^3 / N serves as a threshold-pump proxy. Only exponents are
// meaningful; prefactors are never reported.

#include <algorithm>
#include <cmath>
#include <span>
#include <tuple>
#include <utility>
#include <string>
#include <vector>

#include "carl/error.hpp"
#include "carl/params.hpp"
#include "carl/stability.hpp"

namespace carl {

enum class ScalingSweep { temperature, kappa_c, gamma_f, atom_count };
enum class CavityRegime { good, bad };
enum class ScalingObservable { threshold_pump, threshold_shift };

/// kappa_th must stay below this across the sweep to count as a good cavity...
inline constexpr double kGoodCavityMaxKappa = 0.05;
/// ...and above this for a bad cavity.
inline constexpr double kBadCavityMinKappa = 20.0;

struct ScalingFit {
  double exponent = 0.0;
  double intercept = 0.0;
  std::vector<double> factor;       // multiplier applied to the swept parameter
  std::vector<double> observable;   // pump proxy or delta omega_th / kappa_c
  std::vector<double> kappa_th;
  std::vector<double> D_th;
};

inline std::string to_string(ScalingSweep s) {
  switch (s) {
    case ScalingSweep::temperature: return "temperature";
    case ScalingSweep::kappa_c: return "kappa_c";
    case ScalingSweep::gamma_f: return "gamma_f";
    case ScalingSweep::atom_count: return "atom_count";
  }
  return "?";
}

/// Least-squares slope of log(y) against log(x).
inline std::pair<double, double> loglog_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("loglog_fit: need >= 2 paired points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, (sy - slope * sx) / n};
}

inline ScalingFit verify_scaling(const PhysicalParams& base, ScalingSweep sweep,
                                 CavityRegime regime, ScalingObservable observable,
                                 std::span<const double> factors) {
  base.validate();
  if (factors.size() < 2) throw DomainError("verify_scaling: need at least two sweep points");
  double fmin = factors[0], fmax = factors[0];
  for (double f : factors) {
    if (!(f > 0.0)) throw DomainError("verify_scaling: sweep factors must be positive");
    fmin = std::min(fmin, f);
    fmax = std::max(fmax, f);
  }
  if (fmax / fmin < 10.0 * (1.0 - 1e-12))
    throw DomainError("verify_scaling: sweep must span at least one decade");

  ScalingFit fit;
  for (double f : factors) {
    PhysicalParams p = base;
    switch (sweep) {
      case ScalingSweep::temperature: p.temperature *= f; break;
      case ScalingSweep::kappa_c: p.kappa_c *= f; break;
      case ScalingSweep::gamma_f: p.gamma_f *= f; break;
      case ScalingSweep::atom_count: p.atom_count *= f; break;
    }
    const double rho = rho_at_threshold(p);
    const auto s = derive_scaled(p, rho);
    const bool ok = regime == CavityRegime::good ? s.kappa <= kGoodCavityMaxKappa
                                                 : s.kappa >= kBadCavityMinKappa;
    if (!ok)
      throw RegimeError("verify_scaling: kappa_th = " + std::to_string(s.kappa) + " at " +
                        to_string(sweep) + " factor " + std::to_string(f) + " is outside the " +
                        (regime == CavityRegime::good ? "good" : "bad") + "-cavity regime");
    fit.factor.push_back(f);
    fit.kappa_th.push_back(s.kappa);
    fit.D_th.push_back(s.D);
    if (observable == ScalingObservable::threshold_pump)
      fit.observable.push_back(rho * rho * rho / p.atom_count);
    else
      fit.observable.push_back(dispersion_roots(s.kappa, s.D).shift_over_kc);
  }
  std::tie(fit.exponent, fit.intercept) = loglog_fit(fit.factor, fit.observable);
  return fit;
}

}  // namespace carl
