#pragma once

// Independent reference computations for the velocity basis: Hermite
// functions from boost's physicists' polynomials, integrals by the trapezoid
// rule on a wide uniform grid, derivatives by high-order finite differences.

#include <boost/math/special_functions/factorials.hpp>
#include <boost/math/special_functions/hermite.hpp>
#include <cmath>
#include <functional>
#include <random>

#include "nsvfp/hermite.hpp"

namespace oracle {

inline double probabilists_hermite(unsigned n, double x) {
  return std::pow(2.0, -0.5 * n) * boost::math::hermite(n, x / std::sqrt(2.0));
}

/// One-dimensional orthonormal Hermite function.
inline double psi(unsigned n, double v) {
  return probabilists_hermite(n, v) * std::pow(2.0 * M_PI, -0.25) * std::exp(-0.25 * v * v) /
         std::sqrt(boost::math::factorial<double>(n));
}

/// Trapezoid rule on [-18, 18]; spectrally accurate for Gaussian-decaying integrands.
inline double integrate(const std::function<double(double)>& g, double h = 0.005) {
  const double lim = 18.0;
  const int n = int(std::round(2.0 * lim / h));
  double s = 0.5 * (g(-lim) + g(lim));
  for (int k = 1; k < n; ++k) s += g(-lim + k * h);
  return s * h;
}

inline double d1(const std::function<double(double)>& g, double x, double h = 1e-3) {
  return (-g(x + 2 * h) + 8 * g(x + h) - 8 * g(x - h) + g(x - 2 * h)) / (12 * h);
}

inline double d2(const std::function<double(double)>& g, double x, double h = 1e-3) {
  return (-g(x + 2 * h) + 16 * g(x + h) - 30 * g(x) + 16 * g(x - h) - g(x - 2 * h)) / (12 * h * h);
}

/// <psi_m, v psi_n>
inline double mult_v_1d(unsigned m, unsigned n) {
  return integrate([&](double v) { return psi(m, v) * v * psi(n, v); });
}

/// <psi_m, d/dv psi_n>
inline double ddv_1d(unsigned m, unsigned n) {
  auto f = [n](double v) { return psi(n, v); };
  return integrate([&](double v) { return psi(m, v) * d1(f, v); });
}

/// <psi_m, (d^2/dv^2 - v^2/4 + 1/2) psi_n>; the one-axis part of L.
inline double fp_1d(unsigned m, unsigned n) {
  auto f = [n](double v) { return psi(n, v); };
  return integrate([&](double v) { return psi(m, v) * (d2(f, v) - (0.25 * v * v - 0.5) * psi(n, v)); });
}

/// <psi_m, mu^{-1} d^2/dv^2 (mu psi_n)> with mu the one-axis sqrt-Maxwellian factor.
inline double theta_1d(unsigned m, unsigned n) {
  auto g = [n](double v) { return psi(n, v) * std::pow(2.0 * M_PI, -0.25) * std::exp(-0.25 * v * v); };
  return integrate([&](double v) {
    const double poly = probabilists_hermite(m, v) / std::sqrt(boost::math::factorial<double>(m));
    return poly * d2(g, v);
  });
}

inline nsvfp::HermiteCoeffs random_coeffs(int order, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  nsvfp::HermiteCoeffs f(order);
  for (auto& c : f.data()) {
    const double re = g(rng);
    const double im = g(rng);
    c = nsvfp::cplx(re, im);
  }
  return f;
}

} // namespace oracle
