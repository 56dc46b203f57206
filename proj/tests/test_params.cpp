#include <gtest/gtest.h>

#include "carl/params.hpp"
#include "carl/scaling.hpp"

using namespace carl;

TEST(Physical, RecoilFrequencyOfRubidium) {
  const auto p = PhysicalParams::rb87_reference();
  // 4 x the single-photon recoil frequency 2 pi 3.7710 kHz at 780.241 nm, rescaled to 780 nm.
  const double ratio = std::pow(780.241 / 780.0, 2);
  EXPECT_NEAR(p.recoil_frequency() / (2.0 * std::numbers::pi), 4.0 * 3.7710e3 * ratio, 1.0);
  EXPECT_NEAR(p.thermal_velocity(), 0.11979, 1e-5);
}

TEST(Physical, ValidateRejectsNonPositive) {
  auto p = PhysicalParams::rb87_reference();
  EXPECT_NO_THROW(p.validate());
  p.temperature = -1.0;
  EXPECT_THROW(p.validate(), DomainError);
  p = PhysicalParams::rb87_reference();
  p.kappa_c = std::numeric_limits<double>::infinity();
  EXPECT_THROW(p.validate(), DomainError);
  EXPECT_THROW(derive_scaled(PhysicalParams::rb87_reference(), 0.0), DomainError);
}

TEST(Scaled, KappaAndDScaleAsRhoToMinusThreeHalves) {
  const auto p = PhysicalParams::rb87_reference();
  const auto a = derive_scaled(p, 10.0);
  const auto b = derive_scaled(p, 40.0);
  EXPECT_NEAR(b.kappa / a.kappa, std::pow(4.0, -1.5), 1e-14);
  EXPECT_NEAR(b.D / a.D, std::pow(4.0, -1.5), 1e-14);
  EXPECT_TRUE(a.self_consistent());
  EXPECT_NEAR(threshold_margin(b.kappa, b.D) / threshold_margin(a.kappa, a.D), std::pow(4.0, -6.0),
              1e-14);
}

TEST(Scaled, DefinitionsFromLaboratoryRates) {
  const auto p = PhysicalParams::rb87_reference();
  const double rho = 14.6;
  const auto s = derive_scaled(p, rho);
  const double wr = p.recoil_frequency() * rho;
  const double gb = p.gamma_f / wr;
  const double sig = 2.0 * p.wavenumber * p.thermal_velocity() / wr;
  EXPECT_NEAR(s.kappa, std::sqrt(gb) * p.kappa_c / wr, 1e-14);
  EXPECT_NEAR(s.D, sig * sig / std::sqrt(gb), 1e-14);
  EXPECT_NEAR(s.kappa, 0.0946, 5e-4);
  EXPECT_NEAR(s.D, 2.0497, 5e-4);
  EXPECT_NEAR(s.momentum_diffusion(), gb * sig * sig, 1e-12);
  EXPECT_NEAR(s.space_diffusion(), sig * sig / gb, 1e-14);
}

TEST(Scaled, FromKappaDRoundTrip) {
  const auto s = ScaledParams::from_kappa_D(0.075, 1.49, 30.0);
  EXPECT_NEAR(s.kappa, 0.075, 1e-15);
  EXPECT_NEAR(s.D, 1.49, 1e-14);
  EXPECT_NEAR(s.K, 0.075 / std::sqrt(30.0), 1e-15);
  EXPECT_TRUE(s.self_consistent());
  EXPECT_THROW(ScaledParams::from_kappa_D(0.1, 1.0, 0.0), DomainError);
}

TEST(Threshold, RhoAtThresholdOfReferenceSetup) {
  const auto p = PhysicalParams::rb87_reference();
  const double rho = rho_at_threshold(p);
  const auto s = derive_scaled(p, rho);
  EXPECT_NEAR(threshold_margin(s.kappa, s.D), 1.0, 1e-8);
  EXPECT_NEAR(rho, 14.3244, 1e-3);
  EXPECT_NEAR(rho / 14.6, 1.0, 0.1);
}

TEST(Threshold, PumpRatioMapsThroughCubeRoot) {
  const auto p = PhysicalParams::rb87_reference();
  const double rho = rho_at_threshold(p);
  EXPECT_NEAR(pump_ratio_to_params(p, 8.0).rho, 2.0 * rho, 1e-9);
  const auto at = pump_ratio_to_params(p, 1.0);
  EXPECT_NEAR(threshold_margin(at.kappa, at.D), 1.0, 1e-8);
  EXPECT_LT(threshold_margin(pump_ratio_to_params(p, 2.0).kappa, pump_ratio_to_params(p, 2.0).D), 1.0);
}

namespace {

PhysicalParams good_cavity() {
  auto p = PhysicalParams::rb87_reference();
  p.kappa_c *= 0.03;
  p.gamma_f = 9.0 * 2.0 * std::numbers::pi * 22.0e3;
  return p;
}

PhysicalParams bad_cavity() {
  auto p = PhysicalParams::rb87_reference();
  p.kappa_c = 2.0 * std::numbers::pi * 2.2e6;
  p.gamma_f = 9.0 * p.kappa_c;
  p.temperature = 15.0e-9;
  return p;
}

// With r = D / kappa fixed by the laboratory rates, kappa_th = (r (1 + r)^2)^(-1/4).
double kappa_threshold_oracle(const PhysicalParams& p) {
  const double r = 4.0 * p.wavenumber * p.wavenumber * constants::k_boltzmann * p.temperature /
                   (p.atom_mass * p.gamma_f * p.kappa_c);
  return std::pow(r * (1.0 + r) * (1.0 + r), -0.25);
}

}  // namespace

TEST(Scaling, ThresholdKappaMatchesRatioOracle) {
  for (const auto& p : {PhysicalParams::rb87_reference(), good_cavity(), bad_cavity()}) {
    const auto s = derive_scaled(p, rho_at_threshold(p));
    EXPECT_NEAR(s.kappa / kappa_threshold_oracle(p), 1.0, 1e-8);
  }
}

TEST(Scaling, LogLogFitRecoversExponent) {
  std::vector<double> x{1, 2, 4, 8}, y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 1.25));
  const auto [slope, icpt] = loglog_fit(x, y);
  EXPECT_NEAR(slope, 1.25, 1e-12);
  EXPECT_NEAR(std::exp(icpt), 3.0, 1e-12);
}

TEST(Scaling, GoodCavityTemperatureExponents) {
  const auto f = logspace(0.3, 3.0, 9);
  const auto pump = verify_scaling(good_cavity(), ScalingSweep::temperature, CavityRegime::good,
                                   ScalingObservable::threshold_pump, f);
  const auto shift = verify_scaling(good_cavity(), ScalingSweep::temperature, CavityRegime::good,
                                    ScalingObservable::threshold_shift, f);
  EXPECT_NEAR(pump.exponent, 1.5, 0.05);
  EXPECT_NEAR(shift.exponent, 0.5, 0.05);
  // Local exponent 1/2 + D/(D + kappa) at the sweep centre.
  const double D = pump.D_th[4], k = pump.kappa_th[4];
  EXPECT_NEAR(pump.exponent, 0.5 + D / (D + k), 0.02);
}

TEST(Scaling, BadCavityTemperatureExponents) {
  const auto f = logspace(0.3, 3.0, 9);
  const auto pump = verify_scaling(bad_cavity(), ScalingSweep::temperature, CavityRegime::bad,
                                   ScalingObservable::threshold_pump, f);
  const auto shift = verify_scaling(bad_cavity(), ScalingSweep::temperature, CavityRegime::bad,
                                    ScalingObservable::threshold_shift, f);
  EXPECT_NEAR(pump.exponent, 0.5, 0.05);
  EXPECT_NEAR(shift.exponent, 0.5, 0.05);
}

TEST(Scaling, AtomCountOnlyEntersThroughProxy) {
  const auto f = logspace(1.0, 100.0, 5);
  const auto fit = verify_scaling(good_cavity(), ScalingSweep::atom_count, CavityRegime::good,
                                  ScalingObservable::threshold_pump, f);
  EXPECT_NEAR(fit.exponent, -1.0, 1e-9);
}

TEST(Scaling, RejectsWrongRegimeAndShortSweep) {
  const auto f = logspace(0.3, 3.0, 5);
  EXPECT_THROW(verify_scaling(PhysicalParams::rb87_reference(), ScalingSweep::temperature,
                              CavityRegime::good, ScalingObservable::threshold_pump, f),
               RegimeError);
  EXPECT_THROW(verify_scaling(good_cavity(), ScalingSweep::temperature, CavityRegime::bad,
                              ScalingObservable::threshold_pump, f),
               RegimeError);
  const auto narrow = logspace(1.0, 5.0, 5);
  EXPECT_THROW(verify_scaling(good_cavity(), ScalingSweep::temperature, CavityRegime::good,
                              ScalingObservable::threshold_pump, narrow),
               DomainError);
}
