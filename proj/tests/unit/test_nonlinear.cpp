#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "nsvfp/checkpoint.hpp"
#include "nsvfp/nonlinear.hpp"
#include "nsvfp/quadrature.hpp"

using namespace nsvfp;

namespace {

const double kVol = std::pow(2.0 * M_PI, 3);

SolverConfig small_config(int order = 4) {
  SolverConfig c;
  c.grid = 8;
  c.order = order;
  return c;
}

double max_abs(const std::vector<cplx>& v) {
  double m = 0;
  for (const auto& x : v) m = std::max(m, std::abs(x));
  return m;
}

// velocity coefficient (a1, a2, a3) of Fourier mode k
cplx& coef(FieldState& s, const std::array<int, 3>& k, int a1, int a2, int a3) {
  const int sd = s.order() + 1;
  return s.f[s.mode_index(k) * s.coeffs() + (a1 * sd + a2) * sd + a3];
}

} // namespace

TEST(FieldState, ModeIndexRoundTrip) {
  const FieldState s(8, 2);
  for (std::size_t p = 0; p < s.points(); ++p) EXPECT_EQ(s.mode_index(s.wavenumber(p)), p);
  EXPECT_EQ(s.wavenumber(s.mode_index({-1, 2, -3})), (std::array<int, 3>{-1, 2, -3}));
}

TEST(Rhs, ZeroStateIsEquilibrium) {
  const NonlinearSolver S(small_config());
  FieldState s = S.zero_state();
  EXPECT_EQ(S.rhs(s).coefficient_norm(), 0.0);
  S.step_rk4(s, 1e-3);
  EXPECT_EQ(s.coefficient_norm(), 0.0);
}

TEST(Rhs, UniformTemperatureRelaxes) {
  // uniform (rho, theta), u = 0, f = 0: rho is steady and theta' = -3 theta / (1 + rho)
  const NonlinearSolver S(small_config());
  FieldState s = S.zero_state();
  const std::size_t z = s.mode_index({0, 0, 0});
  const double rho = 0.3, th = 0.2;
  s.rho[z] = rho;
  s.theta[z] = th;
  FieldState r = S.rhs(s);
  EXPECT_NEAR(std::abs(r.rho[z]), 0.0, 1e-15);
  EXPECT_NEAR(r.theta[z].real(), -3.0 * th / (1.0 + rho), 1e-14);
  // the kinetic equation picks up theta (|v|^2 - 3) sqrt M
  EXPECT_NEAR(coef(r, {0, 0, 0}, 2, 0, 0).real(), std::sqrt(2.0) * th, 1e-14);
  EXPECT_LT(max_abs(r.u[0]) + max_abs(r.u[1]) + max_abs(r.u[2]), 1e-15);
}

TEST(Rhs, UniformFlowFeelsDrag) {
  // f = 0, u = e1: u' = -u / (1 + rho) and the particles gain momentum u
  const NonlinearSolver S(small_config());
  FieldState s = S.zero_state();
  const std::size_t z = s.mode_index({0, 0, 0});
  s.u[0][z] = 1.0;
  s.rho[z] = 0.25;
  FieldState r = S.rhs(s);
  EXPECT_NEAR(r.u[0][z].real(), -1.0 / 1.25, 1e-14);
  EXPECT_NEAR(coef(r, {0, 0, 0}, 1, 0, 0).real(), 1.0, 1e-14);
  // |u|^2 / (1 + rho) heats the fluid
  EXPECT_NEAR(r.theta[z].real(), 1.0 / 1.25, 1e-14);
}

TEST(Rhs, LinearizationErrorIsQuadratic) {
  const NonlinearSolver S(small_config());
  const FieldState x = random_small_state(S, 1.0, 3);
  double err[2];
  for (int j = 0; j < 2; ++j) {
    const double eps = j == 0 ? 1e-3 : 5e-4;
    const FieldState ex = eps * x;
    err[j] = (S.rhs(ex) - S.linear_rhs(ex)).coefficient_norm();
  }
  EXPECT_NEAR(err[0] / err[1], 4.0, 0.1);
}

TEST(Rhs, LinearPartMatchesAssembledGenerator) {
  const NonlinearSolver S(small_config());
  const FieldState x = random_small_state(S, 1.0, 4);
  const FieldState lx = S.linear_rhs(x);
  for (std::size_t p : S.band_modes()) {
    const auto k = x.wavenumber(p);
    const Vec3 xi{double(k[0]), double(k[1]), double(k[2])};
    const Eigen::VectorXcd ref = assemble_generator(xi, 4) * pack(x.mode(p));
    EXPECT_LT((pack(lx.mode(p)) - ref).norm(), 1e-12 * (1 + ref.norm()));
  }
}

TEST(Rhs, ThreadCountDoesNotChangeResult) {
  SolverConfig c = small_config();
  const NonlinearSolver a(c);
  c.threads = 3;
  const NonlinearSolver b(c);
  const FieldState x = random_small_state(a, 0.1, 5);
  EXPECT_EQ((a.rhs(x) - b.rhs(x)).coefficient_norm(), 0.0);
}

TEST(Rhs, DensityFloorIsEnforced) {
  const NonlinearSolver S(small_config());
  FieldState s = S.zero_state();
  s.rho[s.mode_index({0, 0, 0})] = -0.96;
  EXPECT_THROW(S.rhs(s), std::runtime_error);
}

TEST(Step, RejectsUnstableStep) {
  const NonlinearSolver S(small_config());
  FieldState s = S.zero_state();
  EXPECT_GT(S.stable_dt(), 1e-3);
  EXPECT_THROW(S.step_rk4(s, 2.0 * S.stable_dt()), std::invalid_argument);
}

TEST(Step, FourthOrderInTime) {
  const NonlinearSolver S(small_config());
  const FieldState x = random_small_state(S, 0.05, 6);
  const double T = 0.1;
  auto run = [&](double dt) {
    FieldState s = x;
    const int n = int(std::lround(T / dt));
    for (int i = 0; i < n; ++i) S.step_rk4(s, dt);
    return s;
  };
  const FieldState ref = run(T / 64);
  const double e1 = (run(T / 4) - ref).coefficient_norm();
  const double e2 = (run(T / 8) - ref).coefficient_norm();
  EXPECT_NEAR(e1 / e2, 16.0, 3.0);
}

TEST(Step, FieldsStayReal) {
  const NonlinearSolver S(small_config());
  FieldState s = random_small_state(S, 0.05, 7);
  for (int i = 0; i < 20; ++i) S.step_rk4(s, 1e-2);
  EXPECT_LT(S.max_imaginary(s), 1e-12);
  EXPECT_NEAR(s.time, 0.2, 1e-14);
}

TEST(Conservation, PreparedDataHasZeroIntegrals) {
  const NonlinearSolver S(small_config());
  const FieldState s = random_small_state(S, 0.1, 8);
  const auto c = conservation_integrals(S, s);
  const double scale = kVol * s.coefficient_norm();
  EXPECT_LT(std::abs(c.mass_particles) / scale, 1e-15);
  EXPECT_LT(std::abs(c.mass_fluid) / scale, 1e-15);
  for (double m : c.momentum) EXPECT_LT(std::abs(m) / scale, 1e-15);
  EXPECT_LT(std::abs(c.energy) / scale, 1e-15);
}

TEST(Conservation, IntegralsMatchZeroModesForLinearLaws) {
  const NonlinearSolver S(small_config());
  FieldState s = S.zero_state();
  const std::size_t z = s.mode_index({0, 0, 0});
  s.rho[z] = 0.1;
  coef(s, {0, 0, 0}, 0, 0, 0) = 0.2;
  const auto c = conservation_integrals(S, s);
  EXPECT_NEAR(c.mass_fluid / (0.1 * kVol), 1.0, 1e-13);
  EXPECT_NEAR(c.mass_particles / (0.2 * kVol), 1.0, 1e-13);
}

TEST(Conservation, ShortRunDrift) {
  const NonlinearSolver S(small_config());
  FieldState s = random_small_state(S, 0.05, 9);
  const auto c0 = conservation_integrals(S, s);
  const double scale = kVol * s.coefficient_norm();
  for (int i = 0; i < 20; ++i) S.step_rk4(s, 5e-3);
  const auto d = conservation_drift(c0, conservation_integrals(S, s), scale);
  EXPECT_LT(d[0], 1e-14);
  EXPECT_LT(d[1], 1e-14);
  // momentum is quadratic: RK4 keeps it to O(dt^5) per step
  EXPECT_LT(d[2], 1e-9);
}

TEST(Conservation, EnergyDefectIsQuarticInAmplitude) {
  // the cubic energy density is not band-limited after truncation, so the
  // defect scales like eps^4, i.e. eps^3 relative to the data
  const NonlinearSolver S(small_config());
  const FieldState base = random_small_state(S, 1.0, 9);
  double drift[2];
  for (int j = 0; j < 2; ++j) {
    FieldState s = (j == 0 ? 0.04 : 0.02) * base;
    const auto c0 = conservation_integrals(S, s);
    const double scale = kVol * s.coefficient_norm();
    for (int i = 0; i < 20; ++i) S.step_rk4(s, 5e-3);
    drift[j] = conservation_drift(c0, conservation_integrals(S, s), scale)[3];
  }
  EXPECT_NEAR(std::log2(drift[0] / drift[1]), 3.0, 0.3);
}

TEST(Exchange, DragOnUniformFlow) {
  const NonlinearSolver S(small_config());
  FieldState s = S.zero_state();
  s.u[0][s.mode_index({0, 0, 0})] = 1.0;
  const auto r = exchange_terms(S, s);
  for (std::size_t p = 0; p < s.points(); ++p) {
    EXPECT_NEAR(r.momentum[0][p], -1.0, 1e-14);
    EXPECT_NEAR(r.momentum[1][p], 0.0, 1e-14);
    EXPECT_NEAR(r.energy[p], 0.0, 1e-13);
  }
}

TEST(Exchange, ClosedFormsHoldForLargeData) {
  const NonlinearSolver S(small_config());
  const FieldState s = random_small_state(S, 0.5, 10);
  const auto r = exchange_terms(S, s);
  EXPECT_LT(r.momentum_residual, 1e-10);
  EXPECT_LT(r.energy_residual, 1e-10);
  EXPECT_THROW(exchange_terms(S, s, 3), std::invalid_argument);
}

TEST(Positivity, EquilibriumMinimumIsCornerNode) {
  const NonlinearSolver S(small_config());
  const auto r = positivity_probe(S, S.zero_state(), 6);
  const auto rule = gauss_hermite_rule(6);
  const double vmax = *std::max_element(rule.nodes.begin(), rule.nodes.end());
  EXPECT_NEAR(r.min_F / (std::pow(2 * M_PI, -1.5) * std::exp(-1.5 * vmax * vmax)), 1.0, 1e-12);
  EXPECT_EQ(r.min_density, 1.0);
}

TEST(Positivity, VacuumDataGivesZero) {
  const NonlinearSolver S(small_config());
  FieldState s = S.zero_state();
  coef(s, {0, 0, 0}, 0, 0, 0) = -1.0;
  const auto r = positivity_probe(S, s);
  EXPECT_NEAR(r.min_F, 0.0, 1e-16);
}

TEST(Checkpoint, RoundTripIsExact) {
  const NonlinearSolver S(small_config());
  FieldState s = random_small_state(S, 0.1, 11);
  s.time = 1.0 / 3.0;
  const auto path = (std::filesystem::temp_directory_path() / "nsvfp_ckpt_test.bin").string();
  save_checkpoint(path, s);
  const FieldState t = load_checkpoint(path);
  EXPECT_EQ(t.grid(), s.grid());
  EXPECT_EQ(t.order(), s.order());
  EXPECT_EQ(t.time, s.time);
  EXPECT_EQ((t - s).coefficient_norm(), 0.0);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  std::ofstream(path) << "{\"format\":\"other\"}\n";
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST(Functionals, DerivativeWeightCountsMonomials) {
  EXPECT_DOUBLE_EQ(derivative_weight({0, 0, 0}, 4), 1.0);
  EXPECT_DOUBLE_EQ(derivative_weight({1, 1, 1}, 2), 10.0);
  EXPECT_DOUBLE_EQ(derivative_weight({2, 0, 0}, 3), 1 + 4 + 16 + 64);
  // brute force over multi-indices
  const Vec3 k{1.5, -2.0, 0.5};
  double brute = 0;
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; a + b <= 4; ++b)
      for (int c = 0; a + b + c <= 4; ++c) brute += std::pow(k[0], 2 * a) * std::pow(k[1], 2 * b) * std::pow(k[2], 2 * c);
  EXPECT_NEAR(derivative_weight(k, 4), brute, 1e-10 * brute);
}

TEST(Functionals, EquilibriumIsZero) {
  const NonlinearSolver S(small_config());
  const FunctionalEvaluator ev(4, {});
  const auto p = ev.field(S, S.zero_state());
  EXPECT_EQ(p.E, 0.0);
  EXPECT_EQ(p.D, 0.0);
  EXPECT_EQ(p.plain, 0.0);
}

TEST(Functionals, VelocityGramsMatchLadderNorms) {
  // at k = 0 with a purely microscopic f: plain = sum_|beta|<=4 |d_beta f|^2, D1 = nu(f)
  const FunctionalEvaluator ev(4, {});
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  ModeState s(4);
  for (auto& c : s.f.data()) c = cplx(g(rng), g(rng));
  s.f = micro(s.f);
  double plain = 0;
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; a + b <= 4; ++b)
      for (int c = 0; a + b + c <= 4; ++c) {
        HermiteCoeffs h = s.f;
        for (int t = 0; t < a; ++t) h = ddv(0, h);
        for (int t = 0; t < b; ++t) h = ddv(1, h);
        for (int t = 0; t < c; ++t) h = ddv(2, h);
        plain += norm_sq(h);
      }
  const auto p = ev.mode({0, 0, 0}, s);
  EXPECT_NEAR(p.plain, plain, 1e-11 * plain);
  EXPECT_NEAR(p.D1, nu_norm_sq(s.f), 1e-11 * p.D1);
}

TEST(Functionals, MatricesReproduceModeValues) {
  const FunctionalEvaluator ev(4, {});
  const Vec3 k{1, -2, 1};
  const auto E = ev.matrix_E(k), D = ev.matrix_D(k), P = ev.matrix_plain(k);
  EXPECT_LT((E - E.adjoint()).norm(), 1e-12 * E.norm());
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g;
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXcd x(E.rows());
    for (auto& v : x) v = cplx(g(rng), g(rng));
    const auto p = ev.mode(k, unpack(x, 4));
    EXPECT_NEAR((x.adjoint() * E * x)(0).real(), p.E, 1e-10 * p.E);
    EXPECT_NEAR((x.adjoint() * D * x)(0).real(), p.D, 1e-10 * p.D);
    EXPECT_NEAR((x.adjoint() * P * x)(0).real(), p.plain, 1e-10 * p.plain);
  }
}

TEST(Functionals, DefaultsDissipateAndDissipationIsEquivalent) {
  const FunctionalEvaluator ev(4, {});
  const auto c = check_functionals(ev, 2, 200, 14);
  EXPECT_GT(c.lyapunov, 0.0);
  EXPECT_GE(c.d_band_low, 0.5);
  EXPECT_LE(c.d_band_high, 2.0);
  EXPECT_LE(c.band_high, 2.0);
}

TEST(Functionals, UnitVelocityWeightsGiveEnergyEquivalence) {
  FunctionalConfig cfg;
  cfg.tau6 = 1.0;
  const FunctionalEvaluator ev(4, cfg);
  const auto c = check_functionals(ev, 2, 200, 15);
  EXPECT_GE(c.band_low, 0.5);
  EXPECT_LE(c.band_high, 2.0);
}

TEST(Functionals, EnergyDecreasesAlongRun) {
  const NonlinearSolver S(small_config());
  const FunctionalEvaluator ev(4, {});
  FieldState s = random_small_state(S, 1e-3, 16);
  double prev = ev.field(S, s).E;
  for (int i = 0; i < 20; ++i) {
    const auto before = ev.field(S, s);
    S.step_rk4(s, 1e-2);
    const double E = ev.field(S, s).E;
    EXPECT_LT(E, prev);
    EXPECT_LT((E - before.E) / (1e-2 * before.D), 0.0);
    prev = E;
  }
}

TEST(Moments, EquilibriumHasNoResidual) {
  const NonlinearSolver S(small_config());
  const auto r = moment_residuals(S, S.zero_state(), S.zero_state(), 1e-3);
  for (double v : r.derived) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(r.omega_printed, 0.0);
}

TEST(Moments, SecondOrderInDtWithMassSmallest) {
  const NonlinearSolver S(small_config());
  const FieldState x = random_small_state(S, 1e-3, 17);
  MomentResiduals r[2];
  for (int j = 0; j < 2; ++j) {
    const double dt = j == 0 ? 1e-2 : 5e-3;
    FieldState n = x;
    S.step_rk4(n, dt);
    r[j] = moment_residuals(S, x, n, dt);
  }
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(std::log2(r[0].derived[i] / r[1].derived[i]), 2.0, 0.2);
  EXPECT_LT(r[1].derived[0], r[1].derived[1]);
  EXPECT_LT(r[1].derived[0], r[1].derived[2]);
}

TEST(Moments, DerivedFormIsExactButPrintedFormIsNot) {
  const NonlinearSolver S(small_config());
  const FieldState x = random_small_state(S, 1e-2, 18);
  const auto f = moment_floor(S, x);
  const double scale = x.coefficient_norm();
  for (double v : f.derived) EXPECT_LT(v, 1e-12 * scale);
  EXPECT_GT(f.omega_printed, 1e-6 * scale);
}
