#pragma once

// Laboratory parameters and their reduction to the dimensionless (kappa, D)
// plane.
//
// Everything is normalised to the collective bandwidth omega_r * rho, where
// omega_r = 2 hbar k^2 / m is the recoil frequency:
//
//     K     = kappa_c / (omega_r rho)        gamma_bar = gamma_f / (omega_r rho)
//     sigma = c_sigma k v_T / (omega_r rho)  v_T = sqrt(k_B T / m), c_sigma = 2
//     kappa = sqrt(gamma_bar) K              D = sigma^2 / sqrt(gamma_bar)
//
// Both kappa and D therefore scale as rho^{-3/2}, and the threshold margin
// kappa D (D + kappa)^2 as rho^{-6}.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "carl/error.hpp"
#include "carl/stability.hpp"

namespace carl {

namespace constants {
inline constexpr double hbar = 1.05457181765e-34;        // J s
inline constexpr double k_boltzmann = 1.380649e-23;      // J / K
inline constexpr double rb87_mass = 1.44316060e-25;      // kg
inline constexpr double rb87_d2_wavelength = 780.0e-9;   // m
}  // namespace constants

/// Pump-side quantities that only enter rho through proportionality. They are
/// carried for bookkeeping; no implemented equation consumes them.
struct PumpGroup {
  double detuning = 0.0;        // rad/s
  double rabi_frequency = 0.0;  // rad/s
  double dipole = 0.0;          // C m
  double mode_volume = 0.0;     // m^3
  double pump_power = 0.0;      // W
};

struct PhysicalParams {
  double kappa_c = 0.0;      // cavity loss rate, rad/s
  double gamma_f = 0.0;      // molasses friction rate, rad/s
  double temperature = 0.0;  // K
  double atom_mass = 0.0;    // kg
  double wavenumber = 0.0;   // 1/m
  double atom_count = 1.0;
  /// sigma = sigma_prefactor * k * v_T / (omega_r rho).
  double sigma_prefactor = 2.0;
  std::optional<PumpGroup> pump;

  double recoil_frequency() const {
    return 2.0 * constants::hbar * wavenumber * wavenumber / atom_mass;
  }

  double thermal_velocity() const {
    return std::sqrt(constants::k_boltzmann * temperature / atom_mass);
  }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw DomainError(std::string("PhysicalParams.") + name + " must be positive, got " +
                          std::to_string(v));
    };
    positive(kappa_c, "kappa_c");
    positive(gamma_f, "gamma_f");
    positive(temperature, "temperature");
    positive(atom_mass, "atom_mass");
    positive(wavenumber, "wavenumber");
    positive(atom_count, "atom_count");
    positive(sigma_prefactor, "sigma_prefactor");
    positive(recoil_frequency(), "recoil_frequency");
  }

  /// Cavity/molasses setup of the Rb-87 threshold measurement:
  /// kappa_c = 2 pi 22 kHz, gamma_f = 9 kappa_c, T = 150 uK, 780 nm.
  static PhysicalParams rb87_reference() {
    PhysicalParams p;
    p.kappa_c = 2.0 * std::numbers::pi * 22.0e3;
    p.gamma_f = 9.0 * p.kappa_c;
    p.temperature = 150.0e-6;
    p.atom_mass = constants::rb87_mass;
    p.wavenumber = 2.0 * std::numbers::pi / constants::rb87_d2_wavelength;
    p.atom_count = 1.0e6;
    return p;
  }
};

struct ScaledParams {
  double rho = 0.0;
  double omega_r_rho = 0.0;  // rad/s
  double K = 0.0;
  double gamma_bar = 0.0;
  double sigma = 0.0;
  double kappa = 0.0;
  double D = 0.0;

  /// Momentum diffusion D_p = gamma_bar sigma^2 (noise strength in the t_bar frame).
  double momentum_diffusion() const { return gamma_bar * sigma * sigma; }
  /// Spatial diffusion D_theta = sigma^2 / gamma_bar.
  double space_diffusion() const { return sigma * sigma / gamma_bar; }

  /// Builds the (K, sigma) pair that reproduces a given (kappa, D) at friction gamma_bar.
  static ScaledParams from_kappa_D(double kappa, double D, double gamma_bar) {
    if (!(kappa > 0.0) || !(D >= 0.0) || !(gamma_bar > 0.0))
      throw DomainError("from_kappa_D: need kappa > 0, D >= 0, gamma_bar > 0");
    ScaledParams s;
    s.gamma_bar = gamma_bar;
    const double root = std::sqrt(gamma_bar);
    s.K = kappa / root;
    s.sigma = std::sqrt(D * root);
    s.kappa = root * s.K;
    s.D = s.sigma * s.sigma / root;
    return s;
  }

  bool self_consistent(double rel_tol = 1e-12) const {
    const double root = std::sqrt(gamma_bar);
    auto close = [rel_tol](double a, double b) {
      return std::abs(a - b) <= rel_tol * std::max(std::abs(a), std::abs(b));
    };
    return kappa > 0.0 && D >= 0.0 && gamma_bar > 0.0 && close(kappa, root * K) &&
           close(D, sigma * sigma / root);
  }
};

inline ScaledParams derive_scaled(const PhysicalParams& phys, double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho))
    throw DomainError("derive_scaled: rho must be positive, got " + std::to_string(rho));
  phys.validate();
  ScaledParams s;
  s.rho = rho;
  s.omega_r_rho = phys.recoil_frequency() * rho;
  s.K = phys.kappa_c / s.omega_r_rho;
  s.gamma_bar = phys.gamma_f / s.omega_r_rho;
  s.sigma = phys.sigma_prefactor * phys.wavenumber * phys.thermal_velocity() / s.omega_r_rho;
  const double root = std::sqrt(s.gamma_bar);
  s.kappa = root * s.K;
  s.D = s.sigma * s.sigma / root;
  return s;
}

/// rho at which kappa D (D + kappa)^2 = 1. The margin falls monotonically as
/// rho^{-6}; bisection in log rho over [1e-3, 1e6].
inline double rho_at_threshold(const PhysicalParams& phys) {
  phys.validate();
  auto margin_minus_one = [&](double rho) {
    const auto s = derive_scaled(phys, rho);
    return threshold_margin(s.kappa, s.D) - 1.0;
  };
  double lo = std::log(1e-3);
  double hi = std::log(1e6);
  if (!(margin_minus_one(std::exp(lo)) > 0.0 && margin_minus_one(std::exp(hi)) < 0.0))
    throw ConvergenceError("rho_at_threshold: no sign change of the margin in [1e-3, 1e6]",
                           margin_minus_one(std::exp(lo)));
  for (int it = 0; it < 200 && (hi - lo) > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    (margin_minus_one(std::exp(mid)) > 0.0 ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

/// Pump power enters as rho ~ P0^{1/3}, so P0 / P_T = r maps to rho = rho_th r^{1/3}.
inline ScaledParams pump_ratio_to_params(const PhysicalParams& phys, double p_ratio) {
  if (!(p_ratio > 0.0) || !std::isfinite(p_ratio))
    throw DomainError("pump_ratio_to_params: ratio must be positive, got " +
                      std::to_string(p_ratio));
  return derive_scaled(phys, rho_at_threshold(phys) * std::cbrt(p_ratio));
}

}  // namespace carl
