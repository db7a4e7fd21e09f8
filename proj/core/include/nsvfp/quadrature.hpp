#pragma once

#include <array>
#include <vector>

#include "nsvfp/hermite.hpp"

namespace nsvfp {

/// Gauss rule for the standard normal measure exp(-v^2/2)/sqrt(2 pi) dv.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights; // sum to 1
};

GaussHermiteRule gauss_hermite_rule(int n);

/// Normalized Hermite polynomials p_n = He_n / sqrt(n!) (or their first or
/// second derivative) at the given points; row k holds p_0..p_order at x_k.
std::vector<double> hermite_table(const std::vector<double>& x, int order, int derivative);

/// Values of f(v) / sqrt(M(v)) on the tensor grid x (x) x (x) x, with an
/// optional derivative order per axis. Index (i1 * n + i2) * n + i3.
std::vector<cplx> evaluate_on_tensor_grid(const HermiteCoeffs& f, const std::vector<double>& x,
                                          std::array<int, 3> derivative = {0, 0, 0});

/// Pointwise velocity operators evaluated independently of the ladder algebra.
enum class VelocityOp { identity, mult_v, ddv, linearized_fp, theta };

/// int g conj(h) dv by tensor Gauss-Hermite quadrature with `nodes` points per
/// axis. Exact when nodes >= max order + 2; fewer nodes are rejected.
cplx quadrature_inner(const HermiteCoeffs& g, const HermiteCoeffs& h, int nodes);

/// int g conj(op h) dv with op applied pointwise to the evaluated expansion.
cplx quadrature_inner(const HermiteCoeffs& g, const HermiteCoeffs& h, int nodes, VelocityOp op,
                      int axis = 0);

} // namespace nsvfp
