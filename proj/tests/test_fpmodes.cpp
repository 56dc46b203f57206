#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "carl/fpmodes.hpp"
#include "carl/stability.hpp"

using namespace carl;

namespace {

FourierState sample_state(int n_max) {
  FourierState s = new_state(n_max, cplx(0.3, -0.2));
  for (int n = 1; n <= n_max; ++n)
    s.modes[n] = std::polar(0.6 / n, 0.7 * n) * std::exp(-0.1 * n * n);
  return s;
}

}  // namespace

TEST(Modes, NewStateIsUniform) {
  const auto s = new_state(8, cplx(1e-5));
  EXPECT_EQ(s.n_max(), 8);
  EXPECT_EQ(s.modes[0], cplx(1.0));
  EXPECT_EQ(s.bunching(), 0.0);
  EXPECT_THROW(new_state(1, cplx(0.0)), DomainError);
}

TEST(Modes, DerivativeMatchesHierarchy) {
  const double kappa = 0.2, D = 0.7;
  const auto s = sample_state(6);
  const auto d = derivative(s, kappa, D);
  const cplx a = s.field;
  EXPECT_EQ(d.modes[0], cplx(0.0));
  for (int n = 1; n <= 6; ++n) {
    const cplx up = n < 6 ? s.modes[n + 1] : cplx{};
    const cplx expect = cplx(0, n) * (a * s.modes[n - 1] + std::conj(a) * up) -
                        double(n * n) * D * s.modes[n];
    EXPECT_NEAR(std::abs(d.modes[n] - expect), 0.0, 1e-15) << n;
  }
  EXPECT_NEAR(std::abs(d.field - (s.modes[1] - kappa * a)), 0.0, 1e-15);
}

TEST(Modes, ObservablesFromFirstHarmonic) {
  const auto s = sample_state(6);
  const auto o = observe(s);
  EXPECT_DOUBLE_EQ(o.bunching, std::abs(s.modes[1]));
  EXPECT_NEAR(o.mean_p, -2.0 * (s.field * std::conj(s.modes[1])).real(), 1e-15);
  EXPECT_NEAR(o.omega_inst, (s.modes[1] / s.field).imag(), 1e-15);
}

TEST(Modes, GaugeCovariance) {
  const double kappa = 0.3, D = 0.5, phi = 1.1;
  const auto s = sample_state(8);
  auto r = s;
  r.field *= std::polar(1.0, phi);
  for (int n = 0; n <= 8; ++n) r.modes[n] *= std::polar(1.0, n * phi);
  const auto ds = derivative(s, kappa, D);
  const auto dr = derivative(r, kappa, D);
  EXPECT_NEAR(std::abs(dr.field - ds.field * std::polar(1.0, phi)), 0.0, 1e-14);
  for (int n = 0; n <= 8; ++n)
    EXPECT_NEAR(std::abs(dr.modes[n] - ds.modes[n] * std::polar(1.0, n * phi)), 0.0, 1e-14);

  IntegrateOptions opt;
  opt.t_end = 20.0;
  const auto ts = integrate(s, kappa, D, opt).trajectory;
  const auto tr = integrate(r, kappa, D, opt).trajectory;
  ASSERT_EQ(ts.samples.size(), tr.samples.size());
  for (std::size_t i = 0; i < ts.samples.size(); ++i) {
    EXPECT_NEAR(ts.samples[i].bunching, tr.samples[i].bunching, 1e-12);
    EXPECT_NEAR(ts.samples[i].abs_a_sq, tr.samples[i].abs_a_sq, 1e-12);
    EXPECT_NEAR(ts.samples[i].mean_p, tr.samples[i].mean_p, 1e-12);
  }
}

TEST(Integrate, ZerothModeConserved) {
  IntegrateOptions opt;
  opt.t_end = 50.0;
  const auto r = integrate(new_state(16, cplx(1e-3)), 0.1, 1.0, opt);
  EXPECT_EQ(r.final_state.modes[0], cplx(1.0));
  EXPECT_GT(r.final_state.bunching(), 0.0);
}

TEST(Integrate, JacobianAtUniformStateMatchesDispersion) {
  // Real Jacobian of the full hierarchy (finite differences of derivative()).
  const double kappa = 0.075, D = 1.49;
  const int n_max = 6;
  const int dim = 2 * (n_max + 1);  // Re/Im of a, B_1..B_nmax
  const auto base = new_state(n_max, cplx(0.0));
  auto pack = [&](const FourierDerivative& d) {
    Eigen::VectorXd v(dim);
    v[0] = d.field.real();
    v[1] = d.field.imag();
    for (int n = 1; n <= n_max; ++n) {
      v[2 * n] = d.modes[n].real();
      v[2 * n + 1] = d.modes[n].imag();
    }
    return v;
  };
  const double h = 1e-7;
  Eigen::MatrixXd J(dim, dim);
  for (int j = 0; j < dim; ++j) {
    auto plus = base, minus = base;
    const cplx e = (j % 2 == 0) ? cplx(h, 0) : cplx(0, h);
    if (j < 2) {
      plus.field += e;
      minus.field -= e;
    } else {
      plus.modes[j / 2] += e;
      minus.modes[j / 2] -= e;
    }
    J.col(j) = (pack(derivative(plus, kappa, D)) - pack(derivative(minus, kappa, D))) / (2 * h);
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(J);
  const auto r = dispersion_roots(kappa, D);
  auto nearest = [&](cplx target) {
    double best = 1e300;
    for (int i = 0; i < dim; ++i) best = std::min(best, std::abs(es.eigenvalues()[i] - target));
    return best;
  };
  EXPECT_LT(nearest(r.lambda_plus), 1e-7);
  EXPECT_LT(nearest(r.lambda_minus), 1e-7);
  double top = -1e300;
  for (int i = 0; i < dim; ++i) top = std::max(top, es.eigenvalues()[i].real());
  EXPECT_NEAR(top, r.lambda_plus.real(), 1e-7);
}

TEST(Integrate, LinearGrowthRate) {
  const double kappa = 0.5, D = 0.3;
  IntegrateOptions opt;
  opt.t_end = 40.0;
  const auto t = integrate(new_state(8, cplx(1e-9)), kappa, D, opt).trajectory;
  const auto& s = t.samples;
  const double slope = (std::log(s[400].abs_a_sq) - std::log(s[200].abs_a_sq)) / (s[400].tau - s[200].tau);
  EXPECT_NEAR(slope, 2.0 * dispersion_roots(kappa, D).lambda_plus.real(), 1e-4);
  const double w = instantaneous_frequency(t, 200, 400);
  EXPECT_NEAR(w, dispersion_roots(kappa, D).lambda_plus.imag(), 1e-4);
}

TEST(Integrate, BelowThresholdDecays) {
  IntegrateOptions opt;
  opt.t_end = 100.0;
  const auto r = integrate(new_state(8, cplx(1e-4)), 0.1, 3.0, opt);
  EXPECT_LT(std::abs(r.final_state.field), 1e-4);
}

TEST(Integrate, StiffnessSubsteps) {
  EXPECT_EQ(stiffness_substeps(0.01, 32, 1.49), 7);
  EXPECT_EQ(stiffness_substeps(0.01, 4, 0.0), 1);
  EXPECT_EQ(stiffness_substeps(0.01, 2, 0.1), 1);
}

TEST(Integrate, TailDoublingExtendsTruncation) {
  IntegrateOptions opt;
  opt.t_end = 150.0;
  opt.tail_tolerance = 1e-12;
  const auto r = integrate(new_state(4, cplx(1e-3)), 0.1, 0.5, opt);
  EXPECT_GT(r.trajectory.n_max_final, 4);
  EXPECT_EQ(r.final_state.n_max(), r.trajectory.n_max_final);
  EXPECT_LE(std::abs(r.final_state.tail()), 1e-8);
}

TEST(Integrate, TruncationConvergence) {
  IntegrateOptions opt;
  opt.t_end = 500.0;
  opt.adaptive = false;
  opt.stop_at_steady = true;
  const auto a = integrate(new_state(32, cplx(1e-5)), 0.075, 1.49, opt);
  const auto b = integrate(new_state(64, cplx(1e-5)), 0.075, 1.49, opt);
  ASSERT_TRUE(a.trajectory.steady);
  ASSERT_TRUE(b.trajectory.steady);
  const auto oa = observe(a.final_state), ob = observe(b.final_state);
  EXPECT_LT(std::abs(oa.bunching - ob.bunching), 1e-6);
  EXPECT_LT(std::abs(oa.abs_a_sq - ob.abs_a_sq), 1e-6);
  EXPECT_LT(std::abs(oa.omega_inst - ob.omega_inst), 1e-6);
  EXPECT_LT(std::abs(oa.mean_p - ob.mean_p), 1e-6);
}

TEST(Integrate, RejectsBadOptions) {
  IntegrateOptions opt;
  EXPECT_THROW(integrate(new_state(4, cplx(0.1)), -1.0, 1.0, opt), DomainError);
  opt.dt = 0.0;
  EXPECT_THROW(integrate(new_state(4, cplx(0.1)), 0.1, 1.0, opt), DomainError);
}

TEST(Density, NormalisedAndMatchesModes) {
  const auto s = sample_state(10);
  const int m = 512;
  std::vector<double> theta(m);
  for (int j = 0; j < m; ++j) theta[j] = 2.0 * std::numbers::pi * j / m;
  const auto p = reconstruct_density(s, theta);
  double total = 0.0;
  cplx first{};
  for (int j = 0; j < m; ++j) {
    total += p.values[j];
    first += p.values[j] * std::polar(1.0, -theta[j]);
  }
  const double dtheta = 2.0 * std::numbers::pi / m;
  EXPECT_NEAR(total * dtheta, 1.0, 1e-13);
  EXPECT_NEAR(std::abs(first * dtheta - s.modes[1]), 0.0, 1e-13);
}

TEST(Density, FlagsNegativeValues) {
  auto s = new_state(4, cplx(0.0));
  s.modes[1] = 0.9;
  const std::vector<double> theta{0.0, std::numbers::pi};
  const auto p = reconstruct_density(s, theta);
  EXPECT_TRUE(p.truncation_failure);
  EXPECT_LT(p.min_value, 0.0);
}
