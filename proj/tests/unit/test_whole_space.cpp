#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <random>

#include "nsvfp/whole_space.hpp"
#include "oracle.hpp"

using namespace nsvfp;

namespace {

constexpr double kPi = 3.14159265358979323846;

// physical-space radial integral of |grad^m g|^2 for g = A exp(-r^2 / (2 s^2))
double physical_norm_sq(double amp, double s, int m) {
  auto f = [&](double r) {
    const double g = amp * std::exp(-r * r / (2 * s * s));
    const double d = m == 0 ? g : g * r / (s * s);
    return 4 * kPi * r * r * d * d;
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 40.0 * s, 15, 1e-14);
}

InitialProfile zero_profile(int order) {
  InitialProfile p;
  p.velocity = HermiteCoeffs(order);
  return p;
}

} // namespace

TEST(ClosedForm, NormMatchesPhysicalSpaceIntegral) {
  auto p = default_profile(4, 0.3);
  p.sigma = 1.7;
  const double fields = norm_sq(p.velocity) + 1.0 + 1.0 + 1.0;
  for (int m = 0; m <= 1; ++m)
    EXPECT_NEAR(closed_form_norm_sq(p, m), fields * physical_norm_sq(0.3, 1.7, m),
                1e-10 * closed_form_norm_sq(p, m));
}

TEST(ClosedForm, GaussianHatIsTheFourierTransform) {
  // F[exp(-r^2/2)](xi) at |xi| = 1.3 by radial sine transform
  const double k = 1.3;
  auto f = [&](double r) { return 4 * kPi * r * r * std::exp(-r * r / 2) * std::sin(k * r) / (k * r); };
  const double direct = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 40.0, 15, 1e-14);
  InitialProfile p = zero_profile(4);
  EXPECT_NEAR(gaussian_hat(p, k * k), direct, 1e-12);
}

TEST(XiGrids, RadialQuadratureOfGaussian) {
  const auto g = radial_grid();
  for (double s : {0.7, 1.0, 2.0}) {
    double q = 0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) q += g.weights[i] * std::exp(-s * s * g.nodes[i] * g.nodes[i]);
    EXPECT_NEAR(q, std::pow(kPi, 1.5) / (s * s * s), 1e-6);
  }
  for (double w : g.weights) EXPECT_GT(w, 0.0);
}

TEST(XiGrids, TensorQuadratureOfGaussian) {
  const auto g = tensor_grid();
  double q1 = 0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) q1 += g.weights[i] * std::exp(-g.nodes[i] * g.nodes[i]);
  EXPECT_NEAR(q1 * q1 * q1, std::pow(kPi, 1.5), 1e-6);
}

TEST(XiGrids, RefinementHalvesSpacingAndDoublesCutoff) {
  const auto g = radial_grid(41, 1e-2, 10.0);
  const auto r = refined(g);
  EXPECT_GE(r.cutoff, 20.0);
  EXPECT_LT(r.cutoff, 22.0);
  EXPECT_NEAR(std::log(r.nodes[1] / r.nodes[0]), 0.5 * std::log(g.nodes[1] / g.nodes[0]), 1e-12);
  const auto t = refined(tensor_grid(8, 3.0));
  EXPECT_EQ(t.nodes.size(), 32u);
  EXPECT_DOUBLE_EQ(t.cutoff, 6.0);
}

TEST(ZqNorm, UnitGaussianL1) {
  InitialProfile p = zero_profile(2);
  p.velocity = chi(0, 2);
  EXPECT_NEAR(zq_norm(p, 1), std::pow(2 * kPi, 1.5), 1e-12);
  EXPECT_NEAR(zq_norm(p, 2), std::pow(kPi, 0.75), 1e-12);
}

TEST(ZqNorm, HomogeneousAndZero) {
  auto p = default_profile(4, 1.0);
  const double a = zq_norm(p, 1);
  p.amplitude = 2.0;
  EXPECT_NEAR(zq_norm(p, 1), 2 * a, 1e-12);
  EXPECT_EQ(zq_norm(zero_profile(4), 1), 0.0);
  EXPECT_THROW(zq_norm(p, 3), std::invalid_argument);
}

TEST(ZqNorm, FluidPartUsesL1Regardless) {
  InitialProfile p = zero_profile(2);
  p.rho0 = 3.0;
  p.u0 = {4.0, 0.0, 0.0};
  EXPECT_NEAR(zq_norm(p, 2), 5.0 * std::pow(2 * kPi, 1.5), 1e-10);
}

TEST(WholeSpace, ParsevalAtTimeZero) {
  const auto p = default_profile(4);
  WholeSpaceEvolver ev(p, radial_grid(60, 1e-3, 20), 4);
  for (int m = 0; m <= 1; ++m) {
    const double closed = std::sqrt(closed_form_norm_sq(p, m));
    EXPECT_NEAR(ev.norm(0.0, m), closed, 1e-4 * closed);
  }
}

TEST(WholeSpace, ZeroProfileStaysZero) {
  WholeSpaceEvolver ev(zero_profile(4), radial_grid(20, 1e-3, 20), 4);
  for (double v : ev.norms({0.0, 1.0, 10.0}, 0)) EXPECT_EQ(v, 0.0);
}

TEST(WholeSpace, NormDecreasesInTime) {
  WholeSpaceEvolver ev(default_profile(4), radial_grid(60, 1e-3, 20), 4);
  const auto ts = lin_spaced(0.0, 50.0, 26);
  const auto y = ev.norms(ts, 0);
  for (std::size_t i = 1; i < y.size(); ++i) EXPECT_LT(y[i], y[i - 1]);
}

TEST(WholeSpace, RadialGridRejectsAnisotropicVelocityProfile) {
  auto p = default_profile(4);
  p.velocity += chi(1, 4);
  EXPECT_THROW(WholeSpaceEvolver(p, radial_grid(10), 4), std::invalid_argument);
}

TEST(WholeSpace, SymmetryCachedTensorMatchesDirectSum) {
  // non-symmetric velocity and fluid data exercise the signed-permutation pull-back
  std::mt19937_64 rng(11);
  InitialProfile p;
  p.amplitude = 0.5;
  p.velocity = oracle::random_coeffs(4, rng);
  p.rho0 = 0.3;
  p.u0 = {0.2, -0.7, 1.1};
  p.theta0 = -0.4;
  XiGrid g;
  g.kind = XiGrid::Kind::tensor;
  g.nodes = {-1.3, 0.4, 0.9, 1.3};
  g.weights = {0.5, 1.0, 0.7, 0.5};
  g.cutoff = 1.3;
  WholeSpaceEvolver ev(p, g, 4);
  EXPECT_LT(ev.propagator_count(), 64u);

  const double t = 0.8;
  double direct = 0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 4; ++k) {
        const Vec3 xi{g.nodes[i], g.nodes[j], g.nodes[k]};
        const double x2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        const double gh = gaussian_hat(p, x2);
        ModeState s(4);
        s.f = p.velocity;
        s.f *= gh;
        s.rho = gh * p.rho0;
        for (int a = 0; a < 3; ++a) s.u[a] = gh * p.u0[a];
        s.theta = gh * p.theta0;
        const auto y = pack(evolve_mode(xi, s, t));
        direct += g.weights[i] * g.weights[j] * g.weights[k] * x2 * y.squaredNorm();
      }
  direct = std::sqrt(direct / std::pow(2 * kPi, 3));
  EXPECT_NEAR(ev.norm(t, 1), direct, 1e-10 * direct);
}

TEST(WholeSpace, RadialReductionAgreesWithTensorGrid) {
  // anisotropic fluid velocity covers the sphere-averaged branch as well
  const auto p = default_profile(4);
  WholeSpaceEvolver radial(p, radial_grid(), 4);
  WholeSpaceEvolver tensor(p, tensor_grid(24, 8.0), 4);
  for (double t : {0.5, 1.0}) {
    const double a = radial.norm(t, 0), b = tensor.norm(t, 0);
    EXPECT_NEAR(a, b, 1e-3 * a) << "t = " << t;
  }
}

TEST(Fitting, RecoversPowerLaw) {
  const auto ts = log_spaced(20, 200, 40);
  std::vector<double> y;
  for (double t : ts) y.push_back(3.0 * std::pow(1 + t, -0.75));
  const auto f = fit_power_law(ts, y);
  EXPECT_NEAR(f.exponent, -0.75, 1e-6);
  EXPECT_LT(f.residual, 1e-10);
  EXPECT_EQ(f.t_min, 20.0);
  EXPECT_EQ(f.t_max, 200.0);
}

TEST(Fitting, RecoversExponentialRate) {
  const auto ts = lin_spaced(0, 5, 20);
  std::vector<double> y;
  for (double t : ts) y.push_back(0.1 * std::exp(-2 * t));
  EXPECT_NEAR(fit_exponential(ts, y).rate, 2.0, 1e-10);
}

TEST(Fitting, RejectsNonpositiveValues) {
  EXPECT_THROW(fit_power_law({1, 2, 3}, {1, 0, 1}), std::invalid_argument);
}

TEST(SigmaTargets, Formula) {
  EXPECT_DOUBLE_EQ(sigma_qm(1, 0), 0.75);
  EXPECT_DOUBLE_EQ(sigma_qm(2, 0), 0.0);
  EXPECT_DOUBLE_EQ(sigma_qm(1, 1), 1.25);
}

TEST(SigmaTargets, VerdictUsesToleranceAndResidual) {
  DecayFit f;
  f.exponent = -0.8;
  f.residual = 0.01;
  auto v = verify_sigma(1, 0, f);
  EXPECT_TRUE(v.pass);
  EXPECT_NEAR(v.margin, 0.05, 1e-12);
  f.residual = 0.1;
  EXPECT_FALSE(verify_sigma(1, 0, f).pass);
  f.residual = 0.01;
  f.exponent = -0.5;
  EXPECT_FALSE(verify_sigma(1, 0, f).pass);
}

TEST(Convolution, MatchesDirectQuadrature) {
  boost::math::quadrature::tanh_sinh<double> ts;
  for (auto [b1, b2, t] : {std::tuple{0.75, 1.5, 7.0}, {1.25, 1.5, 300.0}, {1.5, 1.5, 40.0}}) {
    auto f = [&](double s) { return std::pow(1 + t - s, -b1) * std::pow(1 + s, -b2); };
    EXPECT_NEAR(convolution_integral(b1, b2, t), ts.integrate(f, 0.0, t), 1e-9);
  }
  EXPECT_EQ(convolution_integral(0.75, 1.5, 0.0), 0.0);
}

TEST(Convolution, BoundedRatioAndArgumentChecks) {
  const auto c = convolution_bound_check(1.5, 1.5, 100.0);
  EXPECT_TRUE(std::isfinite(c.sup));
  EXPECT_GT(c.sup, 0.0);
  EXPECT_THROW(convolution_bound_check(0.5, 1.0, 10.0), std::invalid_argument);
  EXPECT_THROW(convolution_bound_check(1.0, 1.5, 10.0), std::invalid_argument);
}

TEST(Duhamel, ZeroSourceGivesZero) {
  SourceFamily s = default_source(4, 2.0);
  for (auto& g : s.g) g = HermiteCoeffs(4);
  s.phi = HermiteCoeffs(4);
  const auto r = duhamel_decay_check(s, 1, 0, radial_grid(12, 1e-2, 6), 4, {1.0, 3.0});
  for (const auto& d : r.samples) EXPECT_EQ(d.lhs, 0.0);
}

TEST(Duhamel, SourceIsMicroscopicAndRatioFinite) {
  const SourceFamily s = default_source(4, 2.0);
  const HermiteCoeffs sf = make_source(s.g, s.phi, 4);
  EXPECT_GT(norm_sq(sf), 1.0);
  EXPECT_NO_THROW(validate_source(sf));
  const auto r = duhamel_decay_check(s, 1, 0, radial_grid(24, 1e-3, 8), 4, {1.0, 10.0, 40.0});
  EXPECT_GT(r.max_ratio, 0.0);
  EXPECT_TRUE(std::isfinite(r.max_ratio));
  for (const auto& d : r.samples) EXPECT_GT(d.rhs, 0.0);
}

TEST(Duhamel, ExponentialQuadratureMatchesSimpsonEvolution) {
  // the product-integration path against the linear-mode Simpson Duhamel on one node
  const SourceFamily s = default_source(4, 2.0);
  const HermiteCoeffs sf = make_source(s.g, s.phi, 4);
  XiGrid g;
  g.nodes = {0.6};
  g.weights = {1.0};
  g.cutoff = 0.6;
  const double t = 3.0;
  const auto r = duhamel_decay_check(s, 1, 0, g, 4, {t});

  const ModePropagator prop({0.6, 0.0, 0.0}, 4);
  std::vector<HermiteCoeffs> samples;
  const int n = 601;
  for (int i = 0; i < n; ++i) {
    HermiteCoeffs c = sf;
    c *= std::pow(1 + t * i / (n - 1), -2.0);
    samples.push_back(c);
  }
  const auto y = pack(duhamel_evolve(prop, ModeState(4), samples, t));
  InitialProfile sp;
  sp.velocity = chi(0, 0);
  const double gh = gaussian_hat(sp, 0.36);
  const double expected = gh * gh * y.squaredNorm() / std::pow(2 * kPi, 3);
  EXPECT_NEAR(r.samples[0].lhs, expected, 1e-6 * expected);
}
