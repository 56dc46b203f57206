#pragma once

// Command-line driver. Every subcommand resolves a RunConfig
// (defaults < figure preset < --config file < CARL_OUTPUT_DIR < flags), runs the
// mapped solver, and writes CSV files plus <subcommand>_meta.json into the
// output directory.
//
// Exit status: 0 success, 1 solver failure, 2 usage or configuration error.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "carl/config.hpp"
#include "carl/csv.hpp"
#include "carl/ensemble.hpp"
#include "carl/error.hpp"
#include "carl/fpmodes.hpp"
#include "carl/params.hpp"
#include "carl/scaling.hpp"
#include "carl/stability.hpp"
#include "carl/steady.hpp"

#ifndef CARL_VERSION
#define CARL_VERSION "0.0.0"
#endif

namespace carl::cli {

inline constexpr int kMetadataSchemaVersion = 1;

struct Context {
  RunConfig cfg;
  std::filesystem::path dir;
  std::ostream& out;
  std::vector<std::string> files;
  nlohmann::ordered_json results = nlohmann::ordered_json::object();

  std::ofstream open(const std::string& name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    files.push_back(name);
    return f;
  }
};

struct Command {
  std::string name;
  std::string description;
  std::vector<std::pair<std::string, ConfigValue>> preset;
  std::function<void(Context&)> body;
};

namespace detail {

inline std::string iso8601_utc(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::size_t count_of(const RunConfig& cfg, const char* key) {
  return static_cast<std::size_t>(cfg.integer(key));
}

inline std::vector<double> ascending_linspace(const RunConfig& cfg, const char* lo, const char* hi,
                                              const char* count) {
  if (!(cfg.real(lo) < cfg.real(hi)))
    throw ConfigError(std::string("'") + lo + "' must be below '" + hi + "'");
  return linspace(cfg.real(lo), cfg.real(hi), count_of(cfg, count));
}

inline std::vector<double> ascending_logspace(const RunConfig& cfg, const char* lo, const char* hi,
                                              const char* count) {
  if (!(cfg.real(lo) <= cfg.real(hi)))
    throw ConfigError(std::string("'") + lo + "' must not exceed '" + hi + "'");
  return logspace(cfg.real(lo), cfg.real(hi), count_of(cfg, count));
}

inline IntegrateOptions integrate_options(const RunConfig& cfg) {
  IntegrateOptions o;
  o.dt = cfg.real("dt");
  o.t_end = cfg.real("t_end");
  o.sample_every = static_cast<int>(cfg.integer("sample_every"));
  o.tail_tolerance = cfg.real("tail_tolerance");
  o.stop_at_steady = cfg.boolean("stop_at_steady");
  o.steady_tolerance = cfg.real("steady_tolerance");
  o.steady_window = cfg.real("steady_window");
  return o;
}

inline std::vector<double> periodic_grid(std::size_t n) {
  std::vector<double> theta(n);
  for (std::size_t j = 0; j < n; ++j) theta[j] = 2.0 * std::numbers::pi * static_cast<double>(j) / n;
  return theta;
}

inline IntegrationResult run_fp(Context& ctx) {
  const auto& c = ctx.cfg;
  auto res = integrate(new_state(static_cast<int>(c.integer("n_max")), c.real("a0")),
                       c.real("kappa"), c.real("D"), integrate_options(c));
  const auto& t = res.trajectory;
  ctx.results["result.final_tau"] = res.final_state.tau;
  ctx.results["result.n_max_final"] = t.n_max_final;
  ctx.results["result.substeps"] = t.substeps;
  ctx.results["result.max_tail"] = t.max_tail;
  ctx.results["result.under_resolved"] = t.under_resolved;
  ctx.results["result.steady"] = t.steady;
  if (t.under_resolved)
    ctx.out << "warning: tail |B_nmax| reached " << csv::format_double(t.max_tail)
            << " at the n_max cap\n";
  return res;
}

inline DensityProfile density_of(Context& ctx, const FourierState& s, std::vector<double>& theta) {
  theta = periodic_grid(count_of(ctx.cfg, "density_points"));
  auto prof = reconstruct_density(s, theta);
  ctx.results["result.density_min"] = prof.min_value;
  ctx.results["result.truncation_failure"] = prof.truncation_failure;
  return prof;
}

inline void write_density(std::ostream& os, std::span<const double> theta, const DensityProfile& p) {
  csv::Writer w(os, {"theta", "density"});
  for (std::size_t j = 0; j < theta.size(); ++j) w.write(csv::Row() << theta[j] << p.values[j]);
}

inline void write_stability_row(csv::Writer& w, double kappa, double D, const DispersionResult& r) {
  w.write(csv::Row() << kappa << D << r.margin << r.lambda_plus.real() << r.lambda_plus.imag()
                     << r.lambda_minus.real() << r.lambda_minus.imag() << r.gain_over_kc
                     << r.shift_over_kc << r.unstable);
}

// -- subcommands ------------------------------------------------------------

inline void cmd_stability(Context& ctx) {
  const double kappa = ctx.cfg.real("kappa");
  const double D = ctx.cfg.real("D");
  const auto r = dispersion_roots(kappa, D);
  auto f = ctx.open("stability.csv");
  csv::Writer w(f, {"kappa", "D", "margin", "re_lambda", "im_lambda", "re_lambda_minus",
                    "im_lambda_minus", "gain_over_kc", "shift_over_kc", "unstable"});
  write_stability_row(w, kappa, D, r);
  ctx.out << "kappa=" << csv::format_double(kappa) << " D=" << csv::format_double(D)
          << " margin=" << csv::format_double(r.margin)
          << " G/kappa_c=" << csv::format_double(r.gain_over_kc)
          << " dw/kappa_c=" << csv::format_double(r.shift_over_kc)
          << (r.unstable ? " unstable\n" : " stable\n");
  ctx.results["result.margin"] = r.margin;
  ctx.results["result.gain_over_kc"] = r.gain_over_kc;
  ctx.results["result.shift_over_kc"] = r.shift_over_kc;
}

inline void cmd_threshold(Context& ctx) {
  const double kappa = ctx.cfg.real("kappa");
  const double D_th = threshold_D(kappa);
  const auto r = dispersion_roots(kappa, D_th);
  {
    auto f = ctx.open("threshold.csv");
    csv::Writer w(f, {"kappa", "D_th", "margin", "re_lambda", "shift_over_kc"});
    w.write(csv::Row() << kappa << D_th << r.margin << r.lambda_plus.real() << r.shift_over_kc);
  }
  const auto phys = physical_from(ctx.cfg);
  const double rho = rho_at_threshold(phys);
  const auto s = derive_scaled(phys, rho);
  {
    auto f = ctx.open("threshold_physical.csv");
    csv::Writer w(f, {"rho_th", "omega_r", "omega_r_rho", "K", "gamma_bar", "sigma", "kappa", "D"});
    w.write(csv::Row() << rho << phys.recoil_frequency() << s.omega_r_rho << s.K << s.gamma_bar
                       << s.sigma << s.kappa << s.D);
  }
  ctx.out << "kappa=" << csv::format_double(kappa) << " D_th=" << csv::format_double(D_th)
          << " dw/kappa_c=" << csv::format_double(r.shift_over_kc) << "\n"
          << "physical: rho_th=" << csv::format_double(rho)
          << " kappa=" << csv::format_double(s.kappa) << " D=" << csv::format_double(s.D) << "\n";
  ctx.results["result.D_th"] = D_th;
  ctx.results["result.rho_th"] = rho;
}

inline void cmd_simulate_fp(Context& ctx) {
  auto res = run_fp(ctx);
  {
    auto f = ctx.open("fp_trajectory.csv");
    csv::write_trajectory(f, res.trajectory);
  }
  std::vector<double> theta;
  const auto prof = density_of(ctx, res.final_state, theta);
  {
    auto f = ctx.open("fp_density.csv");
    write_density(f, theta, prof);
  }
  auto f = ctx.open("fp_modes.csv");
  csv::Writer w(f, {"n", "re_B", "im_B"});
  for (std::size_t n = 0; n < res.final_state.modes.size(); ++n)
    w.write(csv::Row() << n << res.final_state.modes[n].real() << res.final_state.modes[n].imag());
  const auto last = res.trajectory.samples.back();
  ctx.out << "tau=" << csv::format_double(last.tau) << " b=" << csv::format_double(last.bunching)
          << " |a|^2=" << csv::format_double(last.abs_a_sq)
          << " omega=" << csv::format_double(last.omega_inst) << "\n";
}

inline void cmd_simulate_sde(Context& ctx) {
  const auto& c = ctx.cfg;
  const double kappa = c.real("kappa");
  const double D = c.real("D");
  const auto n = count_of(c, "n_particles");
  const auto seed = static_cast<std::uint64_t>(c.integer("seed"));
  const auto phases = c.text("phase_init") == "evenly_spaced" ? PhaseInit::evenly_spaced
                                                              : PhaseInit::uniform_random;
  const int every = static_cast<int>(c.integer("sde_sample_every"));
  EnsembleTrajectory traj;
  if (c.text("mode") == "full") {
    const double gamma_bar = c.real("gamma_bar");
    const auto sp = ScaledParams::from_kappa_D(kappa, D, gamma_bar);
    auto ens = init_ensemble(n, sp.sigma, seed, phases, true);
    traj = simulate_full(ens, c.real("a0"), kappa, D, gamma_bar, c.real("dt_bar"),
                         c.real("sde_t_end"), every);
  } else {
    auto ens = init_ensemble(n, 0.0, seed, phases, false);
    traj = simulate_overdamped(ens, c.real("a0"), kappa, D, c.real("dtau"), c.real("sde_t_end"),
                               every);
  }
  auto f = ctx.open("sde_trajectory.csv");
  csv::write_ensemble_trajectory(f, traj);
  const auto& last = traj.samples.back();
  ctx.results["result.final_bunching"] = last.b();
  ctx.results["result.final_abs_a_sq"] = last.abs_a_sq();
  ctx.out << "tau=" << csv::format_double(last.tau) << " b=" << csv::format_double(last.b())
          << " |a|^2=" << csv::format_double(last.abs_a_sq()) << "\n";
}

inline void cmd_steady(Context& ctx) {
  const double kappa = ctx.cfg.real("kappa");
  const double D = ctx.cfg.real("D");
  SteadyOptions opt;
  opt.tolerance = ctx.cfg.real("newton_tolerance");
  opt.max_iterations = static_cast<int>(ctx.cfg.integer("newton_max_iterations"));
  const auto sol = solve_steady(kappa, D, opt);
  if (!sol.converged)
    throw ConvergenceError("steady: self-consistency not reached at kappa=" +
                               csv::format_double(kappa) + " D=" + csv::format_double(D),
                           sol.residual);
  {
    auto f = ctx.open("steady.csv");
    csv::Writer w(f, {"kappa", "D", "bunching", "omega", "omega_over_kappa", "re_alpha",
                      "im_alpha", "abs_a_sq", "mean_p", "below_threshold", "residual", "depth",
                      "iterations"});
    w.write(csv::Row() << kappa << D << sol.bunching << sol.omega << sol.omega / kappa
                       << sol.alpha.real() << sol.alpha.imag() << sol.a_sq() << sol.mean_p
                       << sol.below_threshold << sol.residual << sol.depth << sol.iterations);
  }
  auto f = ctx.open("steady_modes.csv");
  csv::Writer w(f, {"n", "re_beta", "im_beta"});
  for (std::size_t n = 0; n < sol.beta.size(); ++n)
    w.write(csv::Row() << n << sol.beta[n].real() << sol.beta[n].imag());
  ctx.results["result.bunching"] = sol.bunching;
  ctx.results["result.omega"] = sol.omega;
  ctx.results["result.residual"] = sol.residual;
  ctx.results["result.below_threshold"] = sol.below_threshold;
  ctx.out << "b=" << csv::format_double(sol.bunching) << " omega=" << csv::format_double(sol.omega)
          << " |a|^2=" << csv::format_double(sol.a_sq()) << " <p>=" << csv::format_double(sol.mean_p)
          << " residual=" << csv::format_double(sol.residual)
          << (sol.below_threshold ? " (below threshold)\n" : "\n");
}

inline std::vector<SweepPoint> run_sweep(Context& ctx) {
  const double kappa = ctx.cfg.real("kappa");
  const auto grid = ascending_linspace(ctx.cfg, "d_min", "d_max", "d_count");
  auto pts = sweep_D(kappa, grid);
  int failures = 0, jumps = 0;
  for (const auto& p : pts) {
    failures += p.exact ? 0 : 1;
    jumps += p.branch_jump ? 1 : 0;
  }
  ctx.results["result.D_th"] = threshold_D(kappa);
  ctx.results["result.exact_failures"] = failures;
  ctx.results["result.branch_jumps"] = jumps;
  if (jumps) ctx.out << "warning: " << jumps << " point(s) flagged as possible branch jumps\n";
  return pts;
}

inline double nan_or(const std::optional<double>& v) {
  return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

inline void cmd_sweep_d(Context& ctx) {
  const double kappa = ctx.cfg.real("kappa");
  const auto pts = run_sweep(ctx);
  auto f = ctx.open("sweep_d.csv");
  csv::Writer w(f, {"D", "bunching", "omega_over_kappa", "minus_p_over_kappa", "abs_a_sq",
                    "below_threshold", "gaussian_bunching", "gaussian_omega_over_kappa",
                    "branch_jump", "exact_error", "gaussian_error"});
  for (const auto& p : pts) {
    const auto& e = p.exact;
    w.write(csv::Row() << p.D << nan_or(e ? std::optional(e->bunching) : std::nullopt)
                       << nan_or(e ? std::optional(e->omega / kappa) : std::nullopt)
                       << nan_or(e ? std::optional(-e->mean_p / kappa) : std::nullopt)
                       << nan_or(e ? std::optional(e->a_sq()) : std::nullopt)
                       << (e && e->below_threshold)
                       << nan_or(p.gaussian ? std::optional(p.gaussian->bunching) : std::nullopt)
                       << nan_or(p.gaussian ? std::optional(p.gaussian->omega / kappa) : std::nullopt)
                       << p.branch_jump << std::string_view(p.exact_error)
                       << std::string_view(p.gaussian_error));
  }
}

inline std::vector<RampPoint> run_ramp(Context& ctx) {
  const auto phys = physical_from(ctx.cfg);
  const auto ratios = ascending_linspace(ctx.cfg, "ratio_min", "ratio_max", "ratio_count");
  ctx.results["result.rho_th"] = rho_at_threshold(phys);
  return ramp_scan(phys, ratios);
}

inline void cmd_ramp(Context& ctx) {
  const auto pts = run_ramp(ctx);
  auto f = ctx.open("ramp.csv");
  csv::Writer w(f, {"pump_ratio", "kappa", "D", "bunching", "omega_over_kappa", "abs_a_sq",
                    "below_threshold"});
  for (const auto& p : pts)
    w.write(csv::Row() << p.ratio << p.kappa << p.D << p.bunching << p.omega_over_kappa << p.a_sq
                       << p.below_threshold);
}

inline void cmd_fig1(Context& ctx) {
  const auto kg = ascending_logspace(ctx.cfg, "kappa_min", "kappa_max", "kappa_count");
  const auto dg = ascending_logspace(ctx.cfg, "grid_d_min", "grid_d_max", "grid_d_count");
  const auto cells = instability_map(kg, dg);
  {
    auto f = ctx.open("fig1_instability.csv");
    csv::Writer w(f, {"kappa", "D", "margin", "re_lambda", "unstable"});
    for (const auto& c : cells)
      w.write(csv::Row() << c.kappa << c.D << c.result.margin << c.result.lambda_plus.real()
                         << c.result.unstable);
  }
  auto f = ctx.open("fig1_threshold.csv");
  csv::Writer w(f, {"kappa", "D_th", "shift_over_kc"});
  for (double k : kg) {
    const double d = threshold_D(k);
    w.write(csv::Row() << k << d << dispersion_roots(k, d).shift_over_kc);
  }
}

inline void cmd_fig2(Context& ctx) {
  const double kappa = ctx.cfg.real("kappa");
  auto res = run_fp(ctx);
  const auto& samples = res.trajectory.samples;
  {
    auto f = ctx.open("fig2a_intensity.csv");
    csv::Writer w(f, {"tau", "abs_a_sq"});
    for (const auto& s : samples) w.write(csv::Row() << s.tau << s.abs_a_sq);
  }
  {
    auto f = ctx.open("fig2b_bunching.csv");
    csv::Writer w(f, {"tau", "bunching"});
    for (const auto& s : samples) w.write(csv::Row() << s.tau << s.bunching);
  }
  {
    auto f = ctx.open("fig2c_frequency.csv");
    csv::Writer w(f, {"tau", "omega_over_kappa", "minus_p_over_kappa"});
    for (const auto& s : samples) w.write(csv::Row() << s.tau << s.omega_inst / kappa << -s.mean_p / kappa);
  }
  std::vector<double> theta;
  const auto prof = density_of(ctx, res.final_state, theta);
  auto f = ctx.open("fig2d_density.csv");
  write_density(f, theta, prof);
}

inline void cmd_fig3(Context& ctx) {
  const double kappa = ctx.cfg.real("kappa");
  const auto pts = run_sweep(ctx);
  {
    auto f = ctx.open("fig3a_bunching.csv");
    csv::Writer w(f, {"D", "bunching", "gaussian_bunching"});
    for (const auto& p : pts)
      w.write(csv::Row() << p.D << nan_or(p.exact ? std::optional(p.exact->bunching) : std::nullopt)
                         << nan_or(p.gaussian ? std::optional(p.gaussian->bunching) : std::nullopt));
  }
  auto f = ctx.open("fig3b_frequency.csv");
  csv::Writer w(f, {"D", "omega_over_kappa", "minus_p_over_kappa", "gaussian_omega_over_kappa"});
  for (const auto& p : pts) {
    const auto& e = p.exact;
    w.write(csv::Row() << p.D << nan_or(e ? std::optional(e->omega / kappa) : std::nullopt)
                       << nan_or(e ? std::optional(-e->mean_p / kappa) : std::nullopt)
                       << nan_or(p.gaussian ? std::optional(p.gaussian->omega / kappa) : std::nullopt));
  }
}

inline void cmd_fig4(Context& ctx) {
  const auto pts = run_ramp(ctx);
  {
    auto f = ctx.open("fig4a_frequency.csv");
    csv::Writer w(f, {"pump_ratio", "omega_over_kappa"});
    for (const auto& p : pts) w.write(csv::Row() << p.ratio << p.omega_over_kappa);
  }
  auto f = ctx.open("fig4b_power.csv");
  csv::Writer w(f, {"pump_ratio", "abs_a_sq"});
  for (const auto& p : pts) w.write(csv::Row() << p.ratio << p.a_sq);
}

inline void cmd_verify_scaling(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto phys = physical_from(c);
  const auto factors = ascending_logspace(c, "factor_min", "factor_max", "factor_count");
  const std::string& sw = c.text("scaling_sweep");
  const ScalingSweep sweep = sw == "kappa_c"      ? ScalingSweep::kappa_c
                             : sw == "gamma_f"    ? ScalingSweep::gamma_f
                             : sw == "atom_count" ? ScalingSweep::atom_count
                                                  : ScalingSweep::temperature;
  const auto regime = c.text("scaling_regime") == "bad" ? CavityRegime::bad : CavityRegime::good;
  const auto obs = c.text("scaling_observable") == "shift" ? ScalingObservable::threshold_shift
                                                           : ScalingObservable::threshold_pump;
  const auto fit = verify_scaling(phys, sweep, regime, obs, factors);
  auto f = ctx.open("scaling.csv");
  csv::Writer w(f, {"factor", "observable", "kappa_th", "D_th"});
  for (std::size_t i = 0; i < fit.factor.size(); ++i)
    w.write(csv::Row() << fit.factor[i] << fit.observable[i] << fit.kappa_th[i] << fit.D_th[i]);
  ctx.results["result.exponent"] = fit.exponent;
  ctx.results["result.intercept"] = fit.intercept;
  ctx.out << c.text("scaling_observable") << " vs " << sw << " (" << c.text("scaling_regime")
          << " cavity): exponent " << csv::format_double(fit.exponent) << "\n";
}

}  // namespace detail

inline const std::vector<Command>& commands() {
  using namespace detail;
  static const std::vector<Command> table = {
      {"stability", "dispersion roots and growth rate at (kappa, D)", {}, cmd_stability},
      {"threshold", "D_th(kappa) and rho at threshold for the [physical] setup", {}, cmd_threshold},
      {"simulate-fp", "integrate the Fourier-mode hierarchy", {}, cmd_simulate_fp},
      {"simulate-sde", "stochastic particle simulation (overdamped or full)", {}, cmd_simulate_sde},
      {"steady", "rotating steady state at (kappa, D)", {}, cmd_steady},
      {"sweep-d", "exact and Gaussian steady states over a D grid", {}, cmd_sweep_d},
      {"ramp", "steady response along a pump ramp P0/P_T", {}, cmd_ramp},
      {"fig1", "instability region over kappa, D in [0.05, 5]",
       {{"kappa_min", 0.05}, {"kappa_max", 5.0}, {"kappa_count", 61LL},
        {"grid_d_min", 0.05}, {"grid_d_max", 5.0}, {"grid_d_count", 61LL}},
       cmd_fig1},
      {"fig2", "time evolution at kappa = 0.075, D = 1.49",
       {{"kappa", 0.075}, {"D", 1.49}, {"a0", 1e-5}, {"n_max", 32LL}, {"dt", 0.01},
        {"t_end", 400.0}, {"sample_every", 10LL}, {"stop_at_steady", false},
        {"density_points", 256LL}},
       cmd_fig2},
      {"fig3", "steady bunching and frequency vs D at kappa = 0.1",
       {{"kappa", 0.1}, {"d_min", 0.05}, {"d_max", 2.2}, {"d_count", 87LL}}, cmd_fig3},
      {"fig4", "steady frequency and power vs P0/P_T for the Rb-87 setup",
       {{"ratio_min", 0.5}, {"ratio_max", 4.0}, {"ratio_count", 71LL}}, cmd_fig4},
      {"verify-scaling", "power-law exponent of the threshold against a laboratory knob", {},
       cmd_verify_scaling},
  };
  return table;
}

inline std::string flag_names(const std::string& key) {
  std::string dashed = key;
  for (char& ch : dashed)
    if (ch == '_') ch = '-';
  return dashed == key ? "--" + key : "--" + dashed + ",--" + key;
}

inline int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"CARL threshold, dynamics and steady-state toolkit", "carl"};
  app.set_version_flag("--version", CARL_VERSION);
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "configuration file (key = value, [section] headers)");

  const auto& registry = config_registry();
  std::vector<std::string> flag_text(registry.size());
  std::vector<CLI::Option*> flag_opts(registry.size());
  for (std::size_t i = 0; i < registry.size(); ++i)
    flag_opts[i] = app.add_option(flag_names(registry[i].name), flag_text[i], registry[i].help)
                       ->group(registry[i].section);

  for (const auto& c : commands()) app.add_subcommand(c.name, c.description);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  const Command* cmd = nullptr;
  for (const auto& c : commands())
    if (c.name == name) cmd = &c;

  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  Context ctx{RunConfig{}, {}, out, {}, nlohmann::ordered_json::object()};
  try {
    for (const auto& [key, value] : cmd->preset) ctx.cfg.preset(key, value);
    if (!config_path.empty()) ctx.cfg.load_file(config_path);
    if (const char* env = std::getenv("CARL_OUTPUT_DIR"); env && *env)
      ctx.cfg.set("output_dir", env, "env CARL_OUTPUT_DIR");
    for (std::size_t i = 0; i < registry.size(); ++i)
      if (flag_opts[i]->count())
        ctx.cfg.set(registry[i].name, flag_text[i], "flag --" + registry[i].name);
  } catch (const ConfigError& e) {
    err << "carl: config error: " << e.what() << "\n";
    return 2;
  }

  try {
    ctx.dir = ctx.cfg.text("output_dir");
    std::filesystem::create_directories(ctx.dir);
    cmd->body(ctx);
  } catch (const ConfigError& e) {
    err << "carl: config error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    err << "carl: invalid input: " << e.what() << "\n";
    return 2;
  } catch (const ConvergenceError& e) {
    err << "carl: solver failure: " << e.what() << " (residual " << csv::format_double(e.residual())
        << ")\n";
    return 1;
  } catch (const std::exception& e) {
    err << "carl: solver failure: " << e.what() << "\n";
    return 1;
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::ordered_json meta;
  meta["schema_version"] = kMetadataSchemaVersion;
  meta["subcommand"] = name;
  meta["version"] = CARL_VERSION;
  meta["timestamp"] = detail::iso8601_utc(started);
  meta["wall_time_s"] = wall;
  meta["seed"] = ctx.cfg.integer("seed");
  meta["config_file"] = config_path;
  meta["files"] = ctx.files;
  for (const auto& [key, value] : ctx.cfg.values()) {
    std::visit([&](const auto& v) { meta["config." + key] = v; }, value);
    meta["config_origin." + key] = ctx.cfg.origin(key);
  }
  for (const auto& [key, value] : ctx.results.items()) meta[key] = value;
  const std::string meta_name = name + "_meta.json";
  std::ofstream mf(ctx.dir / meta_name, std::ios::binary);
  if (!mf) {
    err << "carl: cannot write " << (ctx.dir / meta_name).string() << "\n";
    return 1;
  }
  mf << meta.dump(2) << "\n";
  out << "wrote " << ctx.files.size() + 1 << " file(s) to " << ctx.dir.string() << "\n";
  return 0;
}

}  // namespace carl::cli
