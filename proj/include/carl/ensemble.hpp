#pragma once

// Particle simulation of the friction + noise equations.
//
// Full model, in (t_bar, A) units:
//     dtheta = p_bar dt_bar
//     dp_bar = [-(A e^{i theta} + c.c.) - gamma_bar p_bar] dt_bar + sqrt(2 gamma_bar sigma^2) dW
//     dA     = [<e^{-i theta}> - K A] dt_bar
//
// Overdamped limit, in (tau, a) units with a = A / sqrt(gamma_bar), tau = t_bar / sqrt(gamma_bar):
//     dtheta = -(a e^{i theta} + c.c.) dtau + sqrt(2 D) dW
//     da     = [<e^{-i theta}> - kappa a] dtau
//
// Both are stepped with Euler-Maruyama. Normal deviates come from one
// std::mt19937_64 per block of kStreamBlock particles, seeded from
// (seed, block), so the sequence seen by a particle does not depend on how
// the loop is partitioned.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "carl/error.hpp"
#include "carl/params.hpp"

namespace carl {

using cplx = std::complex<double>;

inline constexpr std::size_t kStreamBlock = 1024;

enum class PhaseInit { uniform_random, evenly_spaced };

struct ParticleEnsemble {
  std::vector<double> theta;  ///< unwrapped phases
  std::vector<double> p_bar;  ///< empty for overdamped runs
  std::uint64_t seed = 0;
  std::vector<std::mt19937_64> streams;
  std::vector<double> noise;  ///< scratch, one deviate per particle

  std::size_t size() const { return theta.size(); }
};

namespace detail {

inline std::vector<std::mt19937_64> make_streams(std::size_t n, std::uint64_t seed) {
  const std::size_t blocks = (n + kStreamBlock - 1) / kStreamBlock;
  std::vector<std::mt19937_64> streams;
  streams.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(b), 0x43a21u};
    streams.emplace_back(seq);
  }
  return streams;
}

inline void check_finite(cplx v, const char* where) {
  if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
    throw NumericalError(std::string(where) + ": non-finite field");
}

}  // namespace detail

/// Fills ens.noise with one standard normal per particle.
inline void draw_normals(ParticleEnsemble& ens) {
  ens.noise.resize(ens.size());
  for (std::size_t b = 0; b < ens.streams.size(); ++b) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t end = std::min(ens.size(), (b + 1) * kStreamBlock);
    for (std::size_t j = b * kStreamBlock; j < end; ++j) ens.noise[j] = normal(ens.streams[b]);
  }
}

inline ParticleEnsemble init_ensemble(std::size_t n, double sigma, std::uint64_t seed,
                                      PhaseInit phases = PhaseInit::uniform_random,
                                      bool with_momentum = true) {
  if (n < 1) throw DomainError("init_ensemble: need at least one particle");
  if (!(sigma >= 0.0)) throw DomainError("init_ensemble: sigma must be non-negative");
  ParticleEnsemble ens;
  ens.seed = seed;
  ens.streams = detail::make_streams(n, seed);
  ens.theta.resize(n);
  const double two_pi = 2.0 * std::numbers::pi;
  if (phases == PhaseInit::evenly_spaced) {
    for (std::size_t j = 0; j < n; ++j)
      ens.theta[j] = two_pi * (static_cast<double>(j) + 0.5) / static_cast<double>(n);
  } else {
    for (std::size_t b = 0; b < ens.streams.size(); ++b) {
      std::uniform_real_distribution<double> uni(0.0, two_pi);
      const std::size_t end = std::min(n, (b + 1) * kStreamBlock);
      for (std::size_t j = b * kStreamBlock; j < end; ++j) ens.theta[j] = uni(ens.streams[b]);
    }
  }
  if (with_momentum) {
    ens.p_bar.assign(n, 0.0);
    if (sigma > 0.0) {
      draw_normals(ens);
      for (std::size_t j = 0; j < n; ++j) ens.p_bar[j] = sigma * ens.noise[j];
    }
  }
  return ens;
}

/// Deterministic ("quiet start") phases distributed according to the density
/// with Fourier coefficients B_0..B_nmax: theta_j = CDF^{-1}((j + 1/2) / n).
inline ParticleEnsemble init_from_density(std::size_t n, std::span<const cplx> modes,
                                          std::uint64_t seed, std::size_t table_size = 1 << 16) {
  if (n < 1) throw DomainError("init_from_density: need at least one particle");
  if (modes.empty()) throw DomainError("init_from_density: no modes");
  ParticleEnsemble ens;
  ens.seed = seed;
  ens.streams = detail::make_streams(n, seed);
  ens.theta.resize(n);

  // CDF(theta) = theta/2pi + (1/pi) sum_{n>=1} Re[B_n (e^{i n theta} - 1) / (i n)].
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> grid(table_size + 1), cdf(table_size + 1);
  for (std::size_t g = 0; g <= table_size; ++g) {
    const double th = two_pi * static_cast<double>(g) / static_cast<double>(table_size);
    double c = th / two_pi;
    for (std::size_t m = 1; m < modes.size(); ++m) {
      const double dm = static_cast<double>(m);
      const cplx term = modes[m] * (std::polar(1.0, dm * th) - 1.0) / cplx(0.0, dm);
      c += term.real() / std::numbers::pi;
    }
    grid[g] = th;
    cdf[g] = g == 0 ? 0.0 : std::max(c, cdf[g - 1]);
  }
  const double total = cdf.back();
  std::size_t g = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double target = total * (static_cast<double>(j) + 0.5) / static_cast<double>(n);
    while (g + 1 < table_size && cdf[g + 1] < target) ++g;
    const double span = cdf[g + 1] - cdf[g];
    const double w = span > 0.0 ? (target - cdf[g]) / span : 0.5;
    ens.theta[j] = grid[g] + w * (grid[g + 1] - grid[g]);
  }
  return ens;
}

inline cplx ensemble_bunching(const ParticleEnsemble& ens) {
  double re = 0.0, im = 0.0;
  for (double th : ens.theta) {
    re += std::cos(th);
    im -= std::sin(th);
  }
  const double n = static_cast<double>(ens.size());
  return {re / n, im / n};
}

struct FullModelParams {
  double gamma_bar;
  double sigma;
  double K;  ///< cavity loss in t_bar units
};

namespace detail {

inline cplx step_full_with_noise(ParticleEnsemble& ens, cplx A, const FullModelParams& m,
                                 double dt_bar, std::span<const double> xi) {
  const double kick = std::sqrt(2.0 * m.gamma_bar * m.sigma * m.sigma * dt_bar);
  const double ar = A.real(), ai = A.imag();
  double sum_c = 0.0, sum_s = 0.0;
  for (std::size_t j = 0; j < ens.size(); ++j) {
    const double c = std::cos(ens.theta[j]);
    const double s = std::sin(ens.theta[j]);
    sum_c += c;
    sum_s += s;
    const double force = -2.0 * (ar * c - ai * s);  // -(A e^{i theta} + c.c.)
    double& p = ens.p_bar[j];
    p += (force - m.gamma_bar * p) * dt_bar + kick * xi[j];
    ens.theta[j] += p * dt_bar;
  }
  const double n = static_cast<double>(ens.size());
  const cplx bunch(sum_c / n, -sum_s / n);
  const cplx A_new = A + (bunch - m.K * A) * dt_bar;
  check_finite(A_new, "step_full");
  return A_new;
}

inline cplx step_overdamped_with_noise(ParticleEnsemble& ens, cplx a, double D, double kappa,
                                       double dtau, std::span<const double> xi) {
  const double kick = std::sqrt(2.0 * D * dtau);
  const double ar = a.real(), ai = a.imag();
  double sum_c = 0.0, sum_s = 0.0;
  for (std::size_t j = 0; j < ens.size(); ++j) {
    const double c = std::cos(ens.theta[j]);
    const double s = std::sin(ens.theta[j]);
    sum_c += c;
    sum_s += s;
    ens.theta[j] += -2.0 * (ar * c - ai * s) * dtau + kick * xi[j];
  }
  const double n = static_cast<double>(ens.size());
  const cplx bunch(sum_c / n, -sum_s / n);
  const cplx a_new = a + (bunch - kappa * a) * dtau;
  check_finite(a_new, "step_overdamped");
  return a_new;
}

}  // namespace detail

/// One Euler-Maruyama step of the full model; returns the updated field A.
inline cplx step_full(ParticleEnsemble& ens, cplx A, const FullModelParams& m, double dt_bar) {
  if (!(dt_bar > 0.0)) throw DomainError("step_full: dt_bar must be positive");
  if (ens.p_bar.size() != ens.size()) throw DomainError("step_full: ensemble has no momenta");
  draw_normals(ens);
  return detail::step_full_with_noise(ens, A, m, dt_bar, ens.noise);
}

/// One Euler-Maruyama step of the overdamped model; returns the updated field a.
inline cplx step_overdamped(ParticleEnsemble& ens, cplx a, double D, double kappa, double dtau) {
  if (!(dtau > 0.0)) throw DomainError("step_overdamped: dtau must be positive");
  draw_normals(ens);
  return detail::step_overdamped_with_noise(ens, a, D, kappa, dtau, ens.noise);
}

struct EnsembleSample {
  double tau;
  cplx field;      ///< scaled a
  cplx bunching;   ///< <e^{-i theta}>
  double mean_p;   ///< mean dtheta/dtau
  double omega_inst;
  double var_p;    ///< Var(p_bar); NaN for overdamped runs
  double var_theta;

  double abs_a_sq() const { return std::norm(field); }
  double b() const { return std::abs(bunching); }
};

struct EnsembleTrajectory {
  std::vector<EnsembleSample> samples;
  std::size_t n_particles = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size() - 1);
}

inline EnsembleSample observe_ensemble(const ParticleEnsemble& ens, double tau, cplx a,
                                       double gamma_bar) {
  EnsembleSample s{};
  s.tau = tau;
  s.field = a;
  s.bunching = ensemble_bunching(ens);
  s.omega_inst = std::abs(a) > 0.0 ? (s.bunching / a).imag() : 0.0;
  s.var_theta = sample_variance(ens.theta);
  if (ens.p_bar.empty()) {
    s.mean_p = -2.0 * (a * std::conj(s.bunching)).real();
    s.var_p = std::numeric_limits<double>::quiet_NaN();
  } else {
    double mean = 0.0;
    for (double p : ens.p_bar) mean += p;
    s.mean_p = std::sqrt(gamma_bar) * mean / static_cast<double>(ens.size());
    s.var_p = sample_variance(ens.p_bar);
  }
  return s;
}

}  // namespace detail

inline EnsembleTrajectory simulate_overdamped(ParticleEnsemble& ens, cplx a0, double kappa,
                                              double D, double dtau, double t_end,
                                              int sample_every) {
  if (!(kappa > 0.0) || !(D >= 0.0) || !(dtau > 0.0) || !(t_end > 0.0) || sample_every < 1)
    throw DomainError("simulate_overdamped: invalid parameters");
  EnsembleTrajectory traj;
  traj.n_particles = ens.size();
  traj.seed = ens.seed;
  cplx a = a0;
  traj.samples.push_back(detail::observe_ensemble(ens, 0.0, a, 1.0));
  const auto steps = static_cast<long long>(std::llround(t_end / dtau));
  for (long long k = 1; k <= steps; ++k) {
    a = step_overdamped(ens, a, D, kappa, dtau);
    if (k % sample_every == 0 || k == steps)
      traj.samples.push_back(detail::observe_ensemble(ens, static_cast<double>(k) * dtau, a, 1.0));
  }
  return traj;
}

/// Full-model run at friction gamma_bar, parametrised by the overdamped
/// (kappa, D) it maps to. Input/output fields and times are in (tau, a) units.
inline EnsembleTrajectory simulate_full(ParticleEnsemble& ens, cplx a0, double kappa, double D,
                                        double gamma_bar, double dt_bar, double tau_end,
                                        int sample_every) {
  if (!(gamma_bar > 0.0) || !(dt_bar > 0.0) || !(tau_end > 0.0) || sample_every < 1)
    throw DomainError("simulate_full: invalid parameters");
  if (ens.p_bar.size() != ens.size()) throw DomainError("simulate_full: ensemble has no momenta");
  const auto sp = ScaledParams::from_kappa_D(kappa, D, gamma_bar);
  const FullModelParams m{sp.gamma_bar, sp.sigma, sp.K};
  const double root = std::sqrt(gamma_bar);
  EnsembleTrajectory traj;
  traj.n_particles = ens.size();
  traj.seed = ens.seed;
  cplx A = a0 * root;
  traj.samples.push_back(detail::observe_ensemble(ens, 0.0, a0, gamma_bar));
  const auto steps = static_cast<long long>(std::llround(tau_end * root / dt_bar));
  for (long long k = 1; k <= steps; ++k) {
    A = step_full(ens, A, m, dt_bar);
    if (k % sample_every == 0 || k == steps)
      traj.samples.push_back(
          detail::observe_ensemble(ens, static_cast<double>(k) * dt_bar / root, A / root, gamma_bar));
  }
  return traj;
}

struct AdiabaticComparison {
  double gamma_bar;
  int substeps;           ///< full-model steps per overdamped step
  double b_full;          ///< time-averaged |<e^{-i theta}>|
  double b_overdamped;
  double a_sq_full;       ///< time-averaged |a|^2
  double a_sq_overdamped;

  double discrepancy() const {
    return std::abs(b_full - b_overdamped) + std::abs(a_sq_full - a_sq_overdamped);
  }
};

/// Runs the full model at friction gamma_bar side by side with the overdamped
/// model at the same (kappa, D), from identical phases, with common noise: the
/// overdamped increment over dtau is the normalised sum of the full-model
/// deviates over the matching substeps. Observables are averaged over
/// [average_from, t_end].
inline AdiabaticComparison compare_adiabatic_limit(std::span<const double> theta0, cplx a0,
                                                   double kappa, double D, double gamma_bar,
                                                   double dtau, double t_end, double average_from,
                                                   std::uint64_t seed,
                                                   double max_friction_step = 0.05) {
  if (theta0.empty()) throw DomainError("compare_adiabatic_limit: no particles");
  if (!(average_from < t_end)) throw DomainError("compare_adiabatic_limit: empty averaging window");
  const auto sp = ScaledParams::from_kappa_D(kappa, D, gamma_bar);
  const FullModelParams m{sp.gamma_bar, sp.sigma, sp.K};
  const double root = std::sqrt(gamma_bar);
  const int M = std::max(1, static_cast<int>(std::ceil(gamma_bar * root * dtau / max_friction_step)));
  const double dt_bar = dtau * root / M;

  const std::size_t n = theta0.size();
  ParticleEnsemble full;
  full.seed = seed;
  full.streams = detail::make_streams(n, seed);
  full.theta.assign(theta0.begin(), theta0.end());
  ParticleEnsemble over;
  over.seed = seed;
  over.theta = full.theta;

  cplx A = a0 * root;
  cplx a = a0;
  // Momenta start at the drag-balanced value plus thermal spread.
  draw_normals(full);
  full.p_bar.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double force = -2.0 * (A * std::polar(1.0, full.theta[j])).real();
    full.p_bar[j] = force / gamma_bar + sp.sigma * full.noise[j];
  }

  std::vector<double> accumulated(n);
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(M));
  const auto steps = static_cast<long long>(std::llround(t_end / dtau));
  const auto first_avg = static_cast<long long>(std::llround(average_from / dtau));
  double sb_f = 0, sb_o = 0, sa_f = 0, sa_o = 0;
  long long count = 0;
  for (long long k = 1; k <= steps; ++k) {
    std::fill(accumulated.begin(), accumulated.end(), 0.0);
    for (int sub = 0; sub < M; ++sub) {
      draw_normals(full);
      for (std::size_t j = 0; j < n; ++j) accumulated[j] += full.noise[j];
      A = detail::step_full_with_noise(full, A, m, dt_bar, full.noise);
    }
    for (auto& w : accumulated) w *= inv_sqrt_m;
    a = detail::step_overdamped_with_noise(over, a, D, kappa, dtau, accumulated);
    if (k >= first_avg) {
      sb_f += std::abs(ensemble_bunching(full));
      sb_o += std::abs(ensemble_bunching(over));
      sa_f += std::norm(A / root);
      sa_o += std::norm(a);
      ++count;
    }
  }
  const double c = static_cast<double>(count);
  return {gamma_bar, M, sb_f / c, sb_o / c, sa_f / c, sa_o / c};
}

}  // namespace carl
