#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "nsvfp/linear_mode.hpp"

namespace nsvfp::detail {

// Signed permutation R with (R c)_j = sign_j c_{perm_j}, taking the sorted
// absolute frequency c to xi.
struct SignedPerm {
  std::array<int, 3> perm;
  std::array<double, 3> sign;
};

inline Vec3 canonical(const Vec3& xi, SignedPerm& r) {
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(xi[a]) < std::abs(xi[b]); });
  Vec3 c;
  for (int k = 0; k < 3; ++k) {
    c[k] = std::abs(xi[order[k]]);
    r.perm[order[k]] = k;
  }
  for (int j = 0; j < 3; ++j) r.sign[j] = xi[j] < 0.0 ? -1.0 : 1.0;
  return c;
}

// State y of mode c whose evolution has the same norm as x at mode xi = R c.
inline ModeState pull_back(const ModeState& x, const SignedPerm& r) {
  const int n = x.f.order();
  ModeState y(n);
  for (int a1 = 0; a1 <= n; ++a1)
    for (int a2 = 0; a2 <= n; ++a2)
      for (int a3 = 0; a3 <= n; ++a3) {
        const std::array<int, 3> al{a1, a2, a3};
        std::array<int, 3> be{};
        double s = 1.0;
        for (int j = 0; j < 3; ++j) {
          be[r.perm[j]] = al[j];
          if (al[j] % 2 == 1) s *= r.sign[j];
        }
        y.f(be[0], be[1], be[2]) = s * x.f(a1, a2, a3);
      }
  for (int j = 0; j < 3; ++j) y.u[r.perm[j]] = r.sign[j] * x.u[j];
  y.rho = x.rho;
  y.theta = x.theta;
  return y;
}

// Inverse of pull_back: state at mode xi = R c from the state y at c.
inline ModeState push_forward(const ModeState& y, const SignedPerm& r) {
  const int n = y.f.order();
  ModeState x(n);
  for (int a1 = 0; a1 <= n; ++a1)
    for (int a2 = 0; a2 <= n; ++a2)
      for (int a3 = 0; a3 <= n; ++a3) {
        const std::array<int, 3> al{a1, a2, a3};
        std::array<int, 3> be{};
        double s = 1.0;
        for (int j = 0; j < 3; ++j) {
          be[r.perm[j]] = al[j];
          if (al[j] % 2 == 1) s *= r.sign[j];
        }
        x.f(a1, a2, a3) = s * y.f(be[0], be[1], be[2]);
      }
  for (int j = 0; j < 3; ++j) x.u[j] = r.sign[j] * y.u[r.perm[j]];
  x.rho = y.rho;
  x.theta = y.theta;
  return x;
}

} // namespace nsvfp::detail
