#include "nsvfp/hermite.hpp"

#include <cmath>
#include <stdexcept>

namespace nsvfp {

namespace {

std::array<int, 3> shifted(std::array<int, 3> a, int axis, int d) {
  a[axis] += d;
  return a;
}

// Linear pairing sum_a t_a f_a with a real test expansion.
cplx pair(const HermiteCoeffs& t, const HermiteCoeffs& f) {
  cplx s = 0.0;
  const int n = std::min(t.order(), f.order());
  for (int a1 = 0; a1 <= n; ++a1)
    for (int a2 = 0; a2 <= n; ++a2)
      for (int a3 = 0; a3 <= n; ++a3) s += t(a1, a2, a3) * f(a1, a2, a3);
  return s;
}

template <class Fn>
void for_each_index(int order, Fn&& fn) {
  for (int a1 = 0; a1 <= order; ++a1)
    for (int a2 = 0; a2 <= order; ++a2)
      for (int a3 = 0; a3 <= order; ++a3) fn(std::array<int, 3>{a1, a2, a3});
}

} // namespace

HermiteCoeffs::HermiteCoeffs(int order) : order_(order) {
  if (order < 0) throw std::invalid_argument("HermiteCoeffs: negative order");
  const std::size_t s = order + 1;
  c_.assign(s * s * s, cplx(0.0));
}

cplx HermiteCoeffs::at(int a1, int a2, int a3) const {
  if (a1 < 0 || a2 < 0 || a3 < 0 || a1 > order_ || a2 > order_ || a3 > order_) return 0.0;
  return (*this)(a1, a2, a3);
}

HermiteCoeffs HermiteCoeffs::resized(int order) const {
  HermiteCoeffs out(order);
  const int n = std::min(order, order_);
  for (int a1 = 0; a1 <= n; ++a1)
    for (int a2 = 0; a2 <= n; ++a2)
      for (int a3 = 0; a3 <= n; ++a3) out(a1, a2, a3) = (*this)(a1, a2, a3);
  return out;
}

HermiteCoeffs& HermiteCoeffs::operator+=(const HermiteCoeffs& o) {
  if (o.order_ > order_) *this = resized(o.order_);
  for_each_index(o.order_, [&](std::array<int, 3> a) { (*this)(a[0], a[1], a[2]) += o(a[0], a[1], a[2]); });
  return *this;
}

HermiteCoeffs& HermiteCoeffs::operator-=(const HermiteCoeffs& o) {
  if (o.order_ > order_) *this = resized(o.order_);
  for_each_index(o.order_, [&](std::array<int, 3> a) { (*this)(a[0], a[1], a[2]) -= o(a[0], a[1], a[2]); });
  return *this;
}

HermiteCoeffs& HermiteCoeffs::operator*=(cplx s) {
  for (auto& x : c_) x *= s;
  return *this;
}

HermiteCoeffs operator+(HermiteCoeffs a, const HermiteCoeffs& b) { return a += b; }
HermiteCoeffs operator-(HermiteCoeffs a, const HermiteCoeffs& b) { return a -= b; }
HermiteCoeffs operator*(cplx s, HermiteCoeffs a) { return a *= s; }

HermiteCoeffs basis_function(int order, int a1, int a2, int a3) {
  HermiteCoeffs f(order);
  f(a1, a2, a3) = 1.0;
  return f;
}

HermiteCoeffs raise(int axis, const HermiteCoeffs& f) {
  HermiteCoeffs out(f.order() + 1);
  for_each_index(f.order(), [&](std::array<int, 3> a) {
    const auto up = shifted(a, axis, 1);
    out(up[0], up[1], up[2]) += std::sqrt(double(a[axis] + 1)) * f(a[0], a[1], a[2]);
  });
  return out;
}

HermiteCoeffs lower(int axis, const HermiteCoeffs& f) {
  HermiteCoeffs out(f.order());
  for_each_index(f.order(), [&](std::array<int, 3> a) {
    if (a[axis] == 0) return;
    const auto dn = shifted(a, axis, -1);
    out(dn[0], dn[1], dn[2]) += std::sqrt(double(a[axis])) * f(a[0], a[1], a[2]);
  });
  return out;
}

HermiteCoeffs mult_v(int axis, const HermiteCoeffs& f) {
  return raise(axis, f) + lower(axis, f);
}

HermiteCoeffs ddv(int axis, const HermiteCoeffs& f) {
  HermiteCoeffs out = lower(axis, f) - raise(axis, f);
  return 0.5 * out;
}

HermiteCoeffs apply_L(const HermiteCoeffs& f) {
  HermiteCoeffs out(f.order());
  for_each_index(f.order(), [&](std::array<int, 3> a) {
    out(a[0], a[1], a[2]) = -double(a[0] + a[1] + a[2]) * f(a[0], a[1], a[2]);
  });
  return out;
}

HermiteCoeffs theta_op(const HermiteCoeffs& f) {
  HermiteCoeffs out(f.order() + 2);
  for_each_index(f.order(), [&](std::array<int, 3> a) {
    for (int j = 0; j < 3; ++j) {
      const auto up = shifted(a, j, 2);
      out(up[0], up[1], up[2]) += std::sqrt(double(a[j] + 1) * (a[j] + 2)) * f(a[0], a[1], a[2]);
    }
  });
  return out;
}

cplx inner(const HermiteCoeffs& g, const HermiteCoeffs& h) {
  cplx s = 0.0;
  const int n = std::min(g.order(), h.order());
  for_each_index(n, [&](std::array<int, 3> a) { s += g(a[0], a[1], a[2]) * std::conj(h(a[0], a[1], a[2])); });
  return s;
}

double norm_sq(const HermiteCoeffs& f) {
  double s = 0.0;
  for (const auto& x : f.data()) s += std::norm(x);
  return s;
}

HermiteCoeffs chi(int which, int order) {
  if (which < 0 || which > 4) throw std::invalid_argument("chi: index out of range");
  const int need = which == 0 ? 0 : (which < 4 ? 1 : 2);
  if (order < need) throw std::invalid_argument("chi: order too small");
  HermiteCoeffs f(order);
  if (which == 0) {
    f(0, 0, 0) = 1.0;
  } else if (which < 4) {
    std::array<int, 3> a{0, 0, 0};
    a[which - 1] = 1;
    f(a[0], a[1], a[2]) = 1.0;
  } else {
    const double s = 1.0 / std::sqrt(3.0);
    f(2, 0, 0) = s;
    f(0, 2, 0) = s;
    f(0, 0, 2) = s;
  }
  return f;
}

Moments moments(const HermiteCoeffs& f) {
  Moments m;
  m.a = f(0, 0, 0);
  m.b = {f.at(1, 0, 0), f.at(0, 1, 0), f.at(0, 0, 1)};
  m.omega = (f.at(2, 0, 0) + f.at(0, 2, 0) + f.at(0, 0, 2)) / std::sqrt(3.0);
  return m;
}

HermiteCoeffs project_P0(const HermiteCoeffs& f) {
  HermiteCoeffs out(f.order());
  out(0, 0, 0) = f(0, 0, 0);
  return out;
}

HermiteCoeffs project_P1(const HermiteCoeffs& f) {
  HermiteCoeffs out(f.order());
  if (f.order() >= 1) {
    out(1, 0, 0) = f(1, 0, 0);
    out(0, 1, 0) = f(0, 1, 0);
    out(0, 0, 1) = f(0, 0, 1);
  }
  return out;
}

HermiteCoeffs project_P2(const HermiteCoeffs& f) {
  if (f.order() < 2) return HermiteCoeffs(f.order());
  HermiteCoeffs out = chi(4, f.order());
  out *= moments(f).omega;
  return out;
}

HermiteCoeffs project_P(const HermiteCoeffs& f) {
  return project_P0(f) + project_P1(f) + project_P2(f);
}

HermiteCoeffs micro(const HermiteCoeffs& f) { return f - project_P(f); }

double nu_norm_sq(const HermiteCoeffs& f) {
  double s = norm_sq(f);
  for (int j = 0; j < 3; ++j) s += norm_sq(ddv(j, f)) + norm_sq(mult_v(j, f));
  return s;
}

HermiteCoeffs gamma_test_function(int i, int j) {
  HermiteCoeffs out = mult_v(i, mult_v(j, basis_function(0, 0, 0, 0)));
  if (i == j) out(0, 0, 0) -= 1.0;
  return out;
}

HermiteCoeffs q_test_function(int i) {
  // v_i (|v|^2 - 3) sqrt M / sqrt 6 = v_i chi_4
  return mult_v(i, chi(4, 2));
}

cplx gamma_moment(int i, int j, const HermiteCoeffs& f) {
  static const auto tests = [] {
    std::array<std::array<HermiteCoeffs, 3>, 3> t;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) t[a][b] = gamma_test_function(a, b);
    return t;
  }();
  return pair(tests.at(i).at(j), f);
}

cplx q_moment(int i, const HermiteCoeffs& f) {
  static const auto tests = [] {
    std::array<HermiteCoeffs, 3> t;
    for (int a = 0; a < 3; ++a) t[a] = q_test_function(a);
    return t;
  }();
  return pair(tests.at(i), f);
}

} // namespace nsvfp
