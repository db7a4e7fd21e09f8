#include "nsvfp/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nsvfp {

GaussHermiteRule gauss_hermite_rule(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite_rule: need at least one node");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(double(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);

  GaussHermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    // Newton polish on p_n using the three-term recurrence
    double x = es.eigenvalues()(k);
    for (int it = 0; it < 3; ++it) {
      double p0 = 1.0, p1 = x;
      for (int m = 1; m < n; ++m) {
        const double p2 = x * p1 - m * p0;
        p0 = p1;
        p1 = p2;
      }
      // He_n' = n He_{n-1}
      const double dp = n * p0;
      if (dp == 0.0) break;
      x -= p1 / dp;
    }
    rule.nodes[k] = x;
  }
  // w_k = 1 / sum_m p_m(x_k)^2 with orthonormal p_m
  for (int k = 0; k < n; ++k) {
    const double x = rule.nodes[k];
    double pm1 = 0.0, p = 1.0, s = 1.0;
    for (int m = 0; m + 1 < n; ++m) {
      const double next = (x * p - std::sqrt(double(m)) * pm1) / std::sqrt(double(m + 1));
      pm1 = p;
      p = next;
      s += p * p;
    }
    rule.weights[k] = 1.0 / s;
  }
  return rule;
}

std::vector<double> hermite_table(const std::vector<double>& x, int order, int derivative) {
  const int cols = order + 1;
  std::vector<double> base(x.size() * cols, 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    double* row = &base[k * cols];
    row[0] = 1.0;
    if (order >= 1) row[1] = x[k];
    for (int m = 1; m < order; ++m)
      row[m + 1] = (x[k] * row[m] - std::sqrt(double(m)) * row[m - 1]) / std::sqrt(double(m + 1));
  }
  if (derivative == 0) return base;
  std::vector<double> out(x.size() * cols, 0.0);
  for (std::size_t k = 0; k < x.size(); ++k)
    for (int m = 0; m <= order; ++m) {
      if (m < derivative) continue;
      // d/dx He_m / sqrt(m!) = sqrt(m) He_{m-1} / sqrt((m-1)!)
      double f = 1.0;
      for (int d = 0; d < derivative; ++d) f *= std::sqrt(double(m - d));
      out[k * cols + m] = f * base[k * cols + m - derivative];
    }
  return out;
}

std::vector<cplx> evaluate_on_tensor_grid(const HermiteCoeffs& f, const std::vector<double>& x,
                                          std::array<int, 3> derivative) {
  const int s = f.stride();
  const std::size_t n = x.size();
  std::array<std::vector<double>, 3> tab;
  for (int j = 0; j < 3; ++j) tab[j] = hermite_table(x, f.order(), derivative[j]);

  // contract axis 3, then 2, then 1
  std::vector<cplx> t3(static_cast<std::size_t>(s) * s * n, 0.0);
  for (int a1 = 0; a1 < s; ++a1)
    for (int a2 = 0; a2 < s; ++a2)
      for (std::size_t k3 = 0; k3 < n; ++k3) {
        cplx acc = 0.0;
        for (int a3 = 0; a3 < s; ++a3) acc += f(a1, a2, a3) * tab[2][k3 * s + a3];
        t3[(static_cast<std::size_t>(a1) * s + a2) * n + k3] = acc;
      }
  std::vector<cplx> t2(static_cast<std::size_t>(s) * n * n, 0.0);
  for (int a1 = 0; a1 < s; ++a1)
    for (std::size_t k2 = 0; k2 < n; ++k2)
      for (std::size_t k3 = 0; k3 < n; ++k3) {
        cplx acc = 0.0;
        for (int a2 = 0; a2 < s; ++a2)
          acc += t3[(static_cast<std::size_t>(a1) * s + a2) * n + k3] * tab[1][k2 * s + a2];
        t2[(static_cast<std::size_t>(a1) * n + k2) * n + k3] = acc;
      }
  std::vector<cplx> out(n * n * n, 0.0);
  for (std::size_t k1 = 0; k1 < n; ++k1)
    for (std::size_t k2 = 0; k2 < n; ++k2)
      for (std::size_t k3 = 0; k3 < n; ++k3) {
        cplx acc = 0.0;
        for (int a1 = 0; a1 < s; ++a1)
          acc += t2[(static_cast<std::size_t>(a1) * n + k2) * n + k3] * tab[0][k1 * s + a1];
        out[(k1 * n + k2) * n + k3] = acc;
      }
  return out;
}

namespace {

void check_nodes(const HermiteCoeffs& g, const HermiteCoeffs& h, int nodes) {
  const int need = std::max(g.order(), h.order()) + 2;
  if (nodes < need)
    throw std::invalid_argument("quadrature_inner: " + std::to_string(nodes) +
                                " nodes per axis cannot integrate order " +
                                std::to_string(std::max(g.order(), h.order())) + " exactly (need " +
                                std::to_string(need) + ")");
}

} // namespace

cplx quadrature_inner(const HermiteCoeffs& g, const HermiteCoeffs& h, int nodes) {
  return quadrature_inner(g, h, nodes, VelocityOp::identity, 0);
}

cplx quadrature_inner(const HermiteCoeffs& g, const HermiteCoeffs& h, int nodes, VelocityOp op,
                      int axis) {
  check_nodes(g, h, nodes);
  if (axis < 0 || axis > 2) throw std::invalid_argument("quadrature_inner: axis out of range");
  const auto rule = gauss_hermite_rule(nodes);
  const auto& x = rule.nodes;
  const std::size_t n = x.size();
  const auto pg = evaluate_on_tensor_grid(g, x);
  const auto ph = evaluate_on_tensor_grid(h, x);

  auto with_derivative = [&](int j, int d) {
    std::array<int, 3> der{0, 0, 0};
    der[j] = d;
    return evaluate_on_tensor_grid(h, x, der);
  };

  // (op h) / sqrt(M) at the nodes
  std::vector<cplx> oph(ph.size());
  std::array<std::vector<cplx>, 3> d1, d2;
  if (op == VelocityOp::linearized_fp || op == VelocityOp::theta) {
    for (int j = 0; j < 3; ++j) {
      d1[j] = with_derivative(j, 1);
      d2[j] = with_derivative(j, 2);
    }
  } else if (op == VelocityOp::ddv) {
    d1[axis] = with_derivative(axis, 1);
  }

  for (std::size_t k1 = 0; k1 < n; ++k1)
    for (std::size_t k2 = 0; k2 < n; ++k2)
      for (std::size_t k3 = 0; k3 < n; ++k3) {
        const std::size_t i = (k1 * n + k2) * n + k3;
        const std::array<double, 3> v{x[k1], x[k2], x[k3]};
        switch (op) {
        case VelocityOp::identity: oph[i] = ph[i]; break;
        case VelocityOp::mult_v: oph[i] = v[axis] * ph[i]; break;
        case VelocityOp::ddv: oph[i] = d1[axis][i] - 0.5 * v[axis] * ph[i]; break;
        case VelocityOp::linearized_fp: {
          cplx s = 0.0;
          for (int j = 0; j < 3; ++j) s += d2[j][i] - v[j] * d1[j][i];
          oph[i] = s;
          break;
        }
        case VelocityOp::theta: {
          cplx s = 0.0;
          for (int j = 0; j < 3; ++j) s += d2[j][i] - 2.0 * v[j] * d1[j][i] + (v[j] * v[j] - 1.0) * ph[i];
          oph[i] = s;
          break;
        }
        }
      }

  // the output of op has order up to order(h) + 2; recheck exactness
  const int out_order = h.order() + (op == VelocityOp::identity ? 0 : (op == VelocityOp::theta ? 2 : 1));
  if (nodes < (g.order() + out_order) / 2 + 1)
    throw std::invalid_argument("quadrature_inner: too few nodes for operator output");

  cplx s = 0.0;
  for (std::size_t k1 = 0; k1 < n; ++k1)
    for (std::size_t k2 = 0; k2 < n; ++k2)
      for (std::size_t k3 = 0; k3 < n; ++k3) {
        const std::size_t i = (k1 * n + k2) * n + k3;
        s += rule.weights[k1] * rule.weights[k2] * rule.weights[k3] * pg[i] * std::conj(oph[i]);
      }
  return s;
}

} // namespace nsvfp
