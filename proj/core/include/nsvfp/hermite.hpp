#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

namespace nsvfp {

using cplx = std::complex<double>;

/// Coefficients of a velocity function in the orthonormal Hermite-function
/// basis psi_a(v) = prod_j He_{a_j}(v_j) (2 pi)^{-1/4} exp(-v_j^2/4) / sqrt(a_j!),
/// truncated at per-axis degree <= order. psi_000 is the square root of the
/// standard Maxwellian.
class HermiteCoeffs {
public:
  HermiteCoeffs() = default;
  explicit HermiteCoeffs(int order);

  int order() const { return order_; }
  int stride() const { return order_ + 1; }
  std::size_t size() const { return c_.size(); }

  std::size_t index(int a1, int a2, int a3) const {
    return (static_cast<std::size_t>(a1) * stride() + a2) * stride() + a3;
  }
  cplx& operator()(int a1, int a2, int a3) { return c_[index(a1, a2, a3)]; }
  const cplx& operator()(int a1, int a2, int a3) const { return c_[index(a1, a2, a3)]; }
  /// Zero outside the stored range.
  cplx at(int a1, int a2, int a3) const;

  std::vector<cplx>& data() { return c_; }
  const std::vector<cplx>& data() const { return c_; }

  /// Zero-padded or truncated copy.
  HermiteCoeffs resized(int order) const;

  HermiteCoeffs& operator+=(const HermiteCoeffs& o);
  HermiteCoeffs& operator-=(const HermiteCoeffs& o);
  HermiteCoeffs& operator*=(cplx s);

private:
  int order_ = 0;
  std::vector<cplx> c_;
};

HermiteCoeffs operator+(HermiteCoeffs a, const HermiteCoeffs& b);
HermiteCoeffs operator-(HermiteCoeffs a, const HermiteCoeffs& b);
HermiteCoeffs operator*(cplx s, HermiteCoeffs a);

/// Single basis function psi_a at the given order.
HermiteCoeffs basis_function(int order, int a1, int a2, int a3);

/// v_j f; output order N+1.
HermiteCoeffs mult_v(int axis, const HermiteCoeffs& f);
/// d/dv_j f; output order N+1.
HermiteCoeffs ddv(int axis, const HermiteCoeffs& f);
/// (d/dv_j - v_j/2) acts as -raise_j. raise_j psi_n = sqrt(n+1) psi_{n+1}.
HermiteCoeffs raise(int axis, const HermiteCoeffs& f);
/// lower_j psi_n = sqrt(n) psi_{n-1}; output order N.
HermiteCoeffs lower(int axis, const HermiteCoeffs& f);

/// Linearized Fokker-Planck operator M^{-1/2} div(M grad(f / sqrt M)).
HermiteCoeffs apply_L(const HermiteCoeffs& f);
/// M^{-1/2} Laplacian(sqrt(M) f); output order N+2.
HermiteCoeffs theta_op(const HermiteCoeffs& f);

/// sum_a g_a conj(h_a); orders may differ.
cplx inner(const HermiteCoeffs& g, const HermiteCoeffs& h);
double norm_sq(const HermiteCoeffs& f);

struct Moments {
  cplx a;
  std::array<cplx, 3> b;
  cplx omega;
};

/// chi_0 = sqrt M, chi_i = v_i sqrt M, chi_4 = (|v|^2 - 3) sqrt M / sqrt 6.
HermiteCoeffs chi(int which, int order);
Moments moments(const HermiteCoeffs& f);

HermiteCoeffs project_P0(const HermiteCoeffs& f);
HermiteCoeffs project_P1(const HermiteCoeffs& f);
HermiteCoeffs project_P2(const HermiteCoeffs& f);
HermiteCoeffs project_P(const HermiteCoeffs& f);
/// (I - P) f.
HermiteCoeffs micro(const HermiteCoeffs& f);

/// int |grad_v f|^2 + (1 + |v|^2) |f|^2 dv.
double nu_norm_sq(const HermiteCoeffs& f);

/// <(v_i v_j - delta_ij) sqrt M, f>.
cplx gamma_moment(int i, int j, const HermiteCoeffs& f);
/// <v_i (|v|^2 - 3) sqrt M / sqrt 6, f>.
cplx q_moment(int i, const HermiteCoeffs& f);
/// Expansion of the test function behind gamma_moment(i, j, .), order 2.
HermiteCoeffs gamma_test_function(int i, int j);
/// Expansion of the test function behind q_moment(i, .), order 3.
HermiteCoeffs q_test_function(int i);

} // namespace nsvfp
