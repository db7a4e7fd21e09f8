#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nsvfp/coercivity.hpp"
#include "nsvfp/hermite.hpp"
#include "nsvfp/quadrature.hpp"
#include "oracle.hpp"

using namespace nsvfp;

namespace {

double max_abs_diff(const HermiteCoeffs& a, const HermiteCoeffs& b) {
  const int n = std::max(a.order(), b.order());
  const HermiteCoeffs x = a.resized(n), y = b.resized(n);
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x.data()[i] - y.data()[i]));
  return m;
}

} // namespace

TEST(GaussHermite, IntegratesEvenMomentsExactly) {
  const auto rule = gauss_hermite_rule(8);
  double dbl_fact = 1.0;
  for (int k = 0; k <= 7; ++k) {
    double s = 0.0;
    for (int i = 0; i < 8; ++i) s += rule.weights[i] * std::pow(rule.nodes[i], 2 * k);
    EXPECT_NEAR(s, dbl_fact, 1e-11 * dbl_fact) << "moment " << 2 * k;
    dbl_fact *= 2 * k + 1;
  }
}

TEST(GaussHermite, TablesMatchReferenceHermiteFunctions) {
  const std::vector<double> x{-3.1, -0.4, 0.0, 1.7, 4.2};
  const auto tab = hermite_table(x, 9, 0);
  for (std::size_t k = 0; k < x.size(); ++k)
    for (int n = 0; n <= 9; ++n) {
      const double ref = oracle::psi(n, x[k]) / oracle::psi(0, x[k]);
      EXPECT_NEAR(tab[k * 10 + n], ref, 1e-10 * std::max(1.0, std::abs(ref)));
    }
}

TEST(Ladder, OneDimensionalMatrixElementsMatchTrapezoidOracle) {
  for (unsigned m = 0; m <= 5; ++m)
    for (unsigned n = 0; n <= 5; ++n) {
      const HermiteCoeffs pn = basis_function(5, n, 0, 0);
      EXPECT_NEAR(mult_v(0, pn).at(m, 0, 0).real(), oracle::mult_v_1d(m, n), 1e-9);
      EXPECT_NEAR(ddv(0, pn).at(m, 0, 0).real(), oracle::ddv_1d(m, n), 1e-7);
    }
}

TEST(Ladder, LinearizedOperatorAndThetaMatchTrapezoidOracle) {
  for (unsigned m = 0; m <= 6; ++m)
    for (unsigned n = 0; n <= 4; ++n) {
      // axis-1 excitation only, so the other axes contribute their ground-state parts
      const HermiteCoeffs pn = basis_function(4, n, 0, 0);
      const double fp = oracle::fp_1d(m, n);
      EXPECT_NEAR(apply_L(pn).at(m, 0, 0).real(), fp, 1e-6) << m << " " << n;
      const double th = oracle::theta_1d(m, n) + (m == n ? 2.0 * oracle::theta_1d(0, 0) : 0.0);
      EXPECT_NEAR(theta_op(pn).at(m, 0, 0).real(), th, 1e-6) << m << " " << n;
    }
}

TEST(Quadrature, OperatorFormsMatchTrapezoidOracleOnBasisPairs) {
  const int nodes = 8;
  for (unsigned m = 0; m <= 5; ++m)
    for (unsigned n = 0; n <= 5; ++n) {
      const HermiteCoeffs g = basis_function(5, m, 1, 0);
      const HermiteCoeffs h = basis_function(5, n, 1, 0);
      EXPECT_NEAR(quadrature_inner(g, h, nodes, VelocityOp::mult_v, 0).real(), oracle::mult_v_1d(m, n), 1e-9);
      EXPECT_NEAR(quadrature_inner(g, h, nodes, VelocityOp::ddv, 0).real(), oracle::ddv_1d(m, n), 1e-7);
    }
}

TEST(Quadrature, RejectsTooFewNodes) {
  const HermiteCoeffs f = basis_function(6, 6, 0, 0);
  EXPECT_THROW(quadrature_inner(f, f, 7), std::invalid_argument);
  EXPECT_NO_THROW(quadrature_inner(f, f, 8));
}

TEST(Quadrature, RandomPairsAgreeWithLadderAlgebra) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int order = 1 + trial % 6;
    const HermiteCoeffs g = oracle::random_coeffs(order + 2, rng);
    const HermiteCoeffs h = oracle::random_coeffs(order, rng);
    const int nodes = order + 4;
    const double scale = std::sqrt(norm_sq(g) * norm_sq(h));
    EXPECT_NEAR(std::abs(quadrature_inner(g, h, nodes) - inner(g, h)), 0.0, 1e-12 * scale);
    for (int j = 0; j < 3; ++j) {
      EXPECT_NEAR(std::abs(quadrature_inner(g, h, nodes, VelocityOp::mult_v, j) - inner(g, mult_v(j, h))), 0.0,
                  1e-11 * scale);
      EXPECT_NEAR(std::abs(quadrature_inner(g, h, nodes, VelocityOp::ddv, j) - inner(g, ddv(j, h))), 0.0,
                  1e-11 * scale);
    }
    EXPECT_NEAR(std::abs(quadrature_inner(g, h, nodes, VelocityOp::linearized_fp) - inner(g, apply_L(h))), 0.0,
                1e-10 * scale);
    EXPECT_NEAR(std::abs(quadrature_inner(g, h, nodes, VelocityOp::theta) - inner(g, theta_op(h))), 0.0,
                1e-10 * scale);
  }
}

TEST(LinearizedOperator, EigenvaluesAreMinusTotalDegree) {
  const int n = 6;
  for (int a1 = 0; a1 <= n; ++a1)
    for (int a2 = 0; a2 <= n; ++a2)
      for (int a3 = 0; a3 <= n; ++a3) {
        const HermiteCoeffs p = basis_function(n, a1, a2, a3);
        EXPECT_DOUBLE_EQ(apply_L(p)(a1, a2, a3).real(), -double(a1 + a2 + a3));
      }
}

TEST(LinearizedOperator, SymmetricAndDissipativeOnRandomStates) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const HermiteCoeffs f = oracle::random_coeffs(1 + trial % 7, rng);
    const HermiteCoeffs g = oracle::random_coeffs(f.order(), rng);
    EXPECT_NEAR(std::abs(inner(apply_L(f), g) - inner(f, apply_L(g))), 0.0, 1e-11 * norm_sq(f) * norm_sq(g));
    EXPECT_GE(-inner(apply_L(f), f).real(), 0.0);
    EXPECT_LE(std::abs(inner(apply_L(f), f).imag()), 1e-10 * norm_sq(f));
  }
}

TEST(ThetaOperator, ActsOnGroundStateAsMaxwellianProfile) {
  // theta_op(sqrt M) = (|v|^2 - 3) sqrt M = sqrt2 sum_j psi_{2 e_j}
  const HermiteCoeffs t = theta_op(basis_function(0, 0, 0, 0));
  EXPECT_NEAR(t(2, 0, 0).real(), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(t(0, 2, 0).real(), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(t(0, 0, 2).real(), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(norm_sq(t), 6.0, 1e-14);
}

TEST(Ladder, DerivativeOfGroundState) {
  const HermiteCoeffs d = ddv(0, basis_function(0, 0, 0, 0));
  EXPECT_NEAR(d(1, 0, 0).real(), -0.5, 1e-15);
  EXPECT_NEAR(norm_sq(d), 0.25, 1e-15);
}

TEST(Moments, ChiBasisIsOrthonormalAndReadsBack) {
  const int n = 4;
  for (int p = 0; p < 5; ++p)
    for (int q = 0; q < 5; ++q) EXPECT_NEAR(inner(chi(p, n), chi(q, n)).real(), p == q ? 1.0 : 0.0, 1e-15);
  const Moments m = moments(chi(4, n));
  EXPECT_NEAR(m.omega.real(), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(m.a), 0.0, 1e-15);
  EXPECT_NEAR(moments(chi(2, n)).b[1].real(), 1.0, 1e-15);
}

TEST(Moments, ChiFourMatchesQuadratureOfItsDefinition) {
  // (|v|^2 - 3) sqrt M / sqrt 6 against psi_{200}
  const auto rule = gauss_hermite_rule(6);
  const HermiteCoeffs c4 = chi(4, 3);
  const auto vals = evaluate_on_tensor_grid(c4, rule.nodes);
  const std::size_t n = rule.nodes.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) {
        const double v2 = rule.nodes[i] * rule.nodes[i] + rule.nodes[j] * rule.nodes[j] + rule.nodes[k] * rule.nodes[k];
        EXPECT_NEAR(vals[(i * n + j) * n + k].real(), (v2 - 3.0) / std::sqrt(6.0), 1e-12);
      }
}

TEST(Projection, IdempotentSelfAdjointAndComplementary) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const HermiteCoeffs f = oracle::random_coeffs(2 + trial % 5, rng);
    const HermiteCoeffs g = oracle::random_coeffs(f.order(), rng);
    const double s = norm_sq(f) + norm_sq(g);
    EXPECT_LT(max_abs_diff(project_P(project_P(f)), project_P(f)), 1e-14 * s);
    EXPECT_NEAR(std::abs(inner(project_P(f), g) - inner(f, project_P(g))), 0.0, 1e-13 * s);
    EXPECT_LT(max_abs_diff(project_P(micro(f)), HermiteCoeffs(f.order())), 1e-14 * s);
    EXPECT_NEAR(std::abs(inner(project_P(f), micro(f))), 0.0, 1e-13 * s);
  }
}

TEST(Projection, MacroscopicStatesAreFixed) {
  HermiteCoeffs f(4);
  f(0, 0, 0) = 0.3;
  f(0, 1, 0) = cplx(0.0, -1.2);
  f += cplx(2.5) * chi(4, 4);
  EXPECT_LT(max_abs_diff(project_P(f), f), 1e-15);
  EXPECT_LT(norm_sq(micro(f)), 1e-28);
}

TEST(NuNorm, GroundStateValue) { EXPECT_NEAR(nu_norm_sq(basis_function(3, 0, 0, 0)), 4.75, 1e-14); }

TEST(NuNorm, MatchesPointwiseQuadrature) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const HermiteCoeffs f = oracle::random_coeffs(1 + trial % 5, rng);
    const auto rule = gauss_hermite_rule(f.order() + 3);
    const auto& x = rule.nodes;
    const std::size_t n = x.size();
    const auto p = evaluate_on_tensor_grid(f, x);
    std::array<std::vector<cplx>, 3> dp;
    for (int j = 0; j < 3; ++j) {
      std::array<int, 3> d{0, 0, 0};
      d[j] = 1;
      dp[j] = evaluate_on_tensor_grid(f, x, d);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t id = (i * n + j) * n + k;
          const std::array<double, 3> v{x[i], x[j], x[k]};
          double local = (1.0 + v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) * std::norm(p[id]);
          for (int a = 0; a < 3; ++a) local += std::norm(dp[a][id] - 0.5 * v[a] * p[id]);
          s += rule.weights[i] * rule.weights[j] * rule.weights[k] * local;
        }
    EXPECT_NEAR(nu_norm_sq(f), s, 1e-11 * s);
  }
}

TEST(MomentTests, GammaExamples) {
  EXPECT_NEAR(gamma_moment(0, 1, basis_function(2, 1, 1, 0)).real(), 1.0, 1e-15);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(std::abs(gamma_moment(i, j, chi(0, 3))), 0.0, 1e-15);
}

TEST(MomentTests, GammaAndQMatchQuadratureOfDefinitions) {
  std::mt19937_64 rng(9);
  const HermiteCoeffs f = oracle::random_coeffs(4, rng);
  const auto rule = gauss_hermite_rule(7);
  const auto& x = rule.nodes;
  const std::size_t n = x.size();
  const auto p = evaluate_on_tensor_grid(f, x);
  for (int a = 0; a < 3; ++a) {
    cplx q = 0.0;
    std::array<cplx, 3> g{};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t id = (i * n + j) * n + k;
          const std::array<double, 3> v{x[i], x[j], x[k]};
          const double w = rule.weights[i] * rule.weights[j] * rule.weights[k];
          const double v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
          q += w * v[a] * (v2 - 3.0) / std::sqrt(6.0) * p[id];
          for (int b = 0; b < 3; ++b) g[b] += w * (v[a] * v[b] - (a == b ? 1.0 : 0.0)) * p[id];
        }
    EXPECT_NEAR(std::abs(q_moment(a, f) - q), 0.0, 1e-12);
    for (int b = 0; b < 3; ++b) EXPECT_NEAR(std::abs(gamma_moment(a, b, f) - g[b]), 0.0, 1e-12);
  }
}

TEST(MomentTests, MacroscopicPartsOfGammaAndQ) {
  std::mt19937_64 rng(13);
  const HermiteCoeffs f = oracle::random_coeffs(4, rng);
  const HermiteCoeffs pf = project_P(f);
  const Moments m = moments(f);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(std::abs(q_moment(i, pf) - 2.0 / std::sqrt(6.0) * m.b[i]), 0.0, 1e-13);
    for (int j = 0; j < 3; ++j) {
      const cplx expect = i == j ? 2.0 / std::sqrt(6.0) * m.omega : cplx(0.0);
      EXPECT_NEAR(std::abs(gamma_moment(i, j, pf) - expect), 0.0, 1e-13);
    }
  }
}

TEST(Coercivity, PositiveAndDeterministic) {
  const auto a = coercivity_estimate(4, 500, 42);
  const auto b = coercivity_estimate(4, 500, 42, 3);
  EXPECT_GT(a.lambda_hat, 0.0);
  EXPECT_GT(a.lambda_hat_mass_only, 0.0);
  EXPECT_EQ(a.lambda_hat, b.lambda_hat);
}

TEST(Coercivity, SingleMicroscopicState) {
  // psi_110: dissipation 2, nu-norm 2.5 * 2 + 4.75
  const HermiteCoeffs f = basis_function(3, 1, 1, 0);
  const double ratio = -inner(apply_L(f), f).real() / nu_norm_sq(micro(f));
  EXPECT_NEAR(ratio, 2.0 / 9.75, 1e-14);
}
