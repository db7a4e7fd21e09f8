#include "nsvfp/nonlinear.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>
#include <stdexcept>

#include "nsvfp/parallel.hpp"
#include "nsvfp/quadrature.hpp"

namespace nsvfp {

namespace {

constexpr double kPi = 3.14159265358979323846;
const double kVolume = std::pow(2.0 * kPi, 3);
const double kSqrt2 = std::sqrt(2.0);
const double kSqrt3 = std::sqrt(3.0);
const double kSqrt6 = std::sqrt(6.0);
const cplx kI(0.0, 1.0);

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

int wrap(int k, int n) { return ((k % n) + n) % n; }

// Hermite index helpers on a box of side s = order + 1
inline std::size_t hidx(int a1, int a2, int a3, int s) { return std::size_t((a1 * s + a2) * s + a3); }

} // namespace

// ---------------------------------------------------------------- FieldState

FieldState::FieldState(int grid, int order) : grid_(grid), order_(order) {
  if (grid < 3 || order < 0) throw std::invalid_argument("FieldState: bad resolution");
  const std::size_t n3 = std::size_t(grid) * grid * grid;
  coeffs_ = std::size_t(order + 1) * (order + 1) * (order + 1);
  f.assign(n3 * coeffs_, 0.0);
  rho.assign(n3, 0.0);
  for (auto& c : u) c.assign(n3, 0.0);
  theta.assign(n3, 0.0);
}

FieldState& FieldState::axpy(double s, const FieldState& x) {
  if (x.grid_ != grid_ || x.order_ != order_) throw std::invalid_argument("FieldState: shape mismatch");
  for (std::size_t i = 0; i < f.size(); ++i) f[i] += s * x.f[i];
  for (std::size_t i = 0; i < rho.size(); ++i) {
    rho[i] += s * x.rho[i];
    theta[i] += s * x.theta[i];
    for (int j = 0; j < 3; ++j) u[j][i] += s * x.u[j][i];
  }
  return *this;
}

FieldState& FieldState::scale(double s) {
  for (auto& v : f) v *= s;
  for (auto& v : rho) v *= s;
  for (auto& v : theta) v *= s;
  for (auto& c : u)
    for (auto& v : c) v *= s;
  return *this;
}

double FieldState::coefficient_norm() const {
  double s = 0.0;
  for (const auto& v : f) s += std::norm(v);
  for (std::size_t i = 0; i < rho.size(); ++i) {
    s += std::norm(rho[i]) + std::norm(theta[i]);
    for (int j = 0; j < 3; ++j) s += std::norm(u[j][i]);
  }
  return std::sqrt(s);
}

std::size_t FieldState::mode_index(const std::array<int, 3>& k) const {
  const int n = grid_;
  return std::size_t((wrap(k[0], n) * n + wrap(k[1], n)) * n + wrap(k[2], n));
}

std::array<int, 3> FieldState::wavenumber(std::size_t p) const {
  const int n = grid_;
  const int i[3] = {int(p / (n * n)), int((p / n) % n), int(p % n)};
  std::array<int, 3> k;
  for (int d = 0; d < 3; ++d) k[d] = i[d] <= n / 2 ? i[d] : i[d] - n;
  return k;
}

ModeState FieldState::mode(std::size_t p) const {
  ModeState s(order_);
  std::copy(f.begin() + p * coeffs_, f.begin() + (p + 1) * coeffs_, s.f.data().begin());
  s.rho = rho[p];
  for (int j = 0; j < 3; ++j) s.u[j] = u[j][p];
  s.theta = theta[p];
  return s;
}

void FieldState::set_mode(std::size_t p, const ModeState& s) {
  const HermiteCoeffs g = s.f.resized(order_);
  std::copy(g.data().begin(), g.data().end(), f.begin() + p * coeffs_);
  rho[p] = s.rho;
  for (int j = 0; j < 3; ++j) u[j][p] = s.u[j];
  theta[p] = s.theta;
}

FieldState operator+(FieldState a, const FieldState& b) { return a.axpy(1.0, b); }
FieldState operator-(FieldState a, const FieldState& b) { return a.axpy(-1.0, b); }
FieldState operator*(double s, FieldState a) { return a.scale(s); }

// ----------------------------------------------------------- NonlinearSolver

struct NonlinearSolver::Plans {
  fftw_plan batch_fwd = nullptr, batch_bwd = nullptr, one_fwd = nullptr, one_bwd = nullptr;
  ~Plans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    for (auto p : {batch_fwd, batch_bwd, one_fwd, one_bwd})
      if (p) fftw_destroy_plan(p);
  }
};

NonlinearSolver::NonlinearSolver(const SolverConfig& cfg) : cfg_(cfg), plans_(std::make_unique<Plans>()) {
  if (cfg.grid < 3) throw std::invalid_argument("NonlinearSolver: grid must be at least 3");
  if (cfg.order < 3) throw std::invalid_argument("NonlinearSolver: order must be at least 3");
  if (!(cfg.rho_floor > 0.0 && cfg.rho_floor < 1.0)) throw std::invalid_argument("NonlinearSolver: bad density floor");
  const int n = cfg.grid;
  band_ = (n - 1) / 3;
  const FieldState probe(n, 0);
  in_band_.resize(probe.points());
  for (std::size_t p = 0; p < probe.points(); ++p) {
    const auto k = probe.wavenumber(p);
    in_band_[p] = std::abs(k[0]) <= band_ && std::abs(k[1]) <= band_ && std::abs(k[2]) <= band_;
    if (in_band_[p]) band_modes_.push_back(p);
  }
  const int coeffs = (cfg.order + 1) * (cfg.order + 1) * (cfg.order + 1);
  const int dims[3] = {n, n, n};
  std::vector<cplx> scratch(std::size_t(n) * n * n * coeffs);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  std::lock_guard<std::mutex> lock(planner_mutex());
  plans_->batch_fwd = fftw_plan_many_dft(3, dims, coeffs, buf, nullptr, coeffs, 1, buf, nullptr, coeffs, 1,
                                         FFTW_FORWARD, flags);
  plans_->batch_bwd = fftw_plan_many_dft(3, dims, coeffs, buf, nullptr, coeffs, 1, buf, nullptr, coeffs, 1,
                                         FFTW_BACKWARD, flags);
  plans_->one_fwd = fftw_plan_dft_3d(n, n, n, buf, buf, FFTW_FORWARD, flags);
  plans_->one_bwd = fftw_plan_dft_3d(n, n, n, buf, buf, FFTW_BACKWARD, flags);
}

NonlinearSolver::~NonlinearSolver() = default;

void NonlinearSolver::forward(cplx* data, int howmany) const {
  auto* d = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(howmany == 1 ? plans_->one_fwd : plans_->batch_fwd, d, d);
}

void NonlinearSolver::backward(cplx* data, int howmany) const {
  auto* d = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(howmany == 1 ? plans_->one_bwd : plans_->batch_bwd, d, d);
}

PhysicalFields NonlinearSolver::to_physical(const FieldState& s) const {
  PhysicalFields ph;
  const std::size_t np = s.points();
  const int nc = int(s.coeffs());
  const int sd = s.order() + 1;
  auto real_of = [&](std::vector<cplx> v, std::vector<double>& out) {
    backward(v.data(), 1);
    out.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      out[i] = v[i].real();
      ph.max_imag = std::max(ph.max_imag, std::abs(v[i].imag()));
    }
  };
  real_of(s.rho, ph.rho);
  real_of(s.theta, ph.theta);
  for (int j = 0; j < 3; ++j) real_of(s.u[j], ph.u[j]);
  std::vector<cplx> fb = s.f;
  backward(fb.data(), nc);
  ph.f.resize(fb.size());
  for (std::size_t i = 0; i < fb.size(); ++i) {
    ph.f[i] = fb[i].real();
    ph.max_imag = std::max(ph.max_imag, std::abs(fb[i].imag()));
  }
  ph.a.resize(np);
  ph.omega.resize(np);
  for (auto& b : ph.b) b.resize(np);
  for (std::size_t p = 0; p < np; ++p) {
    const double* c = ph.f.data() + p * nc;
    ph.a[p] = c[0];
    ph.b[0][p] = c[hidx(1, 0, 0, sd)];
    ph.b[1][p] = c[hidx(0, 1, 0, sd)];
    ph.b[2][p] = c[hidx(0, 0, 1, sd)];
    ph.omega[p] = (c[hidx(2, 0, 0, sd)] + c[hidx(0, 2, 0, sd)] + c[hidx(0, 0, 2, sd)]) / kSqrt3;
  }
  return ph;
}

std::vector<cplx> NonlinearSolver::to_fourier(const std::vector<double>& values) const {
  std::vector<cplx> v(values.begin(), values.end());
  forward(v.data(), 1);
  const double inv = 1.0 / double(v.size());
  for (std::size_t p = 0; p < v.size(); ++p) v[p] = in_band_[p] ? v[p] * inv : cplx(0.0);
  return v;
}

FieldState NonlinearSolver::linear_rhs(const FieldState& s) const {
  FieldState out = zero_state();
  parallel_for(band_modes_.size(), cfg_.threads, [&](std::size_t i) {
    const std::size_t p = band_modes_[i];
    const auto k = s.wavenumber(p);
    const Vec3 xi{double(k[0]), double(k[1]), double(k[2])};
    out.set_mode(p, unpack(apply_generator(xi, cfg_.order, pack(s.mode(p))), cfg_.order));
  });
  return out;
}

FieldState NonlinearSolver::rhs(const FieldState& s) const {
  const int n = cfg_.grid;
  const int N = cfg_.order;
  const int sd = N + 1;
  const int nc = int(s.coeffs());
  const std::size_t np = s.points();
  const PhysicalFields ph = to_physical(s);

  for (std::size_t p = 0; p < np; ++p) {
    if (!std::isfinite(ph.rho[p]) || !std::isfinite(ph.theta[p])) throw std::runtime_error("rhs: non-finite field");
    if (1.0 + ph.rho[p] <= cfg_.rho_floor) throw std::runtime_error("rhs: density floor violated");
  }

  // spectral derivatives of the fluid fields, evaluated on the grid
  std::vector<std::array<int, 3>> kvec(np);
  for (std::size_t p = 0; p < np; ++p) kvec[p] = s.wavenumber(p);
  auto deriv = [&](const std::vector<cplx>& hat, int axis) {
    std::vector<cplx> v(np);
    for (std::size_t p = 0; p < np; ++p) v[p] = kI * double(kvec[p][axis]) * hat[p];
    backward(v.data(), 1);
    std::vector<double> r(np);
    for (std::size_t p = 0; p < np; ++p) r[p] = v[p].real();
    return r;
  };
  auto laplacian = [&](const std::vector<cplx>& hat) {
    std::vector<cplx> v(np);
    for (std::size_t p = 0; p < np; ++p) {
      const auto& k = kvec[p];
      v[p] = -double(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) * hat[p];
    }
    backward(v.data(), 1);
    std::vector<double> r(np);
    for (std::size_t p = 0; p < np; ++p) r[p] = v[p].real();
    return r;
  };
  std::array<std::vector<double>, 3> grho, gth, lapu;
  std::array<std::array<std::vector<double>, 3>, 3> gu; // gu[i][j] = d_j u_i
  for (int d = 0; d < 3; ++d) {
    grho[d] = deriv(s.rho, d);
    gth[d] = deriv(s.theta, d);
    lapu[d] = laplacian(s.u[d]);
    for (int j = 0; j < 3; ++j) gu[d][j] = deriv(s.u[d], j);
  }
  const std::vector<double> lapth = laplacian(s.theta);

  // fluid right-hand sides, pointwise
  std::vector<double> r_rho(np), r_th(np);
  std::array<std::vector<double>, 3> r_u;
  for (auto& v : r_u) v.resize(np);
  const double heat = cfg_.viscous_heating ? 1.0 : 0.0;
  for (std::size_t p = 0; p < np; ++p) {
    const double rho = ph.rho[p], th = ph.theta[p], a = ph.a[p], om = ph.omega[p];
    const double u[3] = {ph.u[0][p], ph.u[1][p], ph.u[2][p]};
    const double b[3] = {ph.b[0][p], ph.b[1][p], ph.b[2][p]};
    const double inv = 1.0 / (1.0 + rho);
    const double divu = gu[0][0][p] + gu[1][1][p] + gu[2][2][p];
    double u_grad_rho = 0, u_grad_th = 0, u2 = 0, ub = 0, lapu_u = 0;
    for (int j = 0; j < 3; ++j) {
      u_grad_rho += u[j] * grho[j][p];
      u_grad_th += u[j] * gth[j][p];
      u2 += u[j] * u[j];
      ub += u[j] * b[j];
      lapu_u += lapu[j][p] * u[j];
    }
    r_rho[p] = -(u_grad_rho + (1.0 + rho) * divu);
    for (int i = 0; i < 3; ++i) {
      double adv = 0;
      for (int j = 0; j < 3; ++j) adv += u[j] * gu[i][j][p];
      r_u[i][p] = -adv - (1.0 + th) * inv * grho[i][p] - gth[i][p] + inv * (lapu[i][p] - u[i] * (1.0 + a) + b[i]);
    }
    const double exch = kSqrt6 * om - 3.0 * th;
    r_th[p] = -u_grad_th - th * divu - divu + exch +
              inv * (lapth[p] + u2 - 2.0 * ub + a * u2 - 3.0 * a * th - heat * lapu_u) - rho * inv * exch;
  }

  FieldState out = zero_state();
  out.rho = to_fourier(r_rho);
  out.theta = to_fourier(r_th);
  for (int j = 0; j < 3; ++j) out.u[j] = to_fourier(r_u[j]);

  // kinetic nonlinearity u_j raise_j f + theta Theta f, truncated to the box
  std::vector<cplx> nl(np * nc);
  parallel_for(np, cfg_.threads, [&](std::size_t p) {
    const double* c = ph.f.data() + p * nc;
    cplx* o = nl.data() + p * nc;
    const double u[3] = {ph.u[0][p], ph.u[1][p], ph.u[2][p]};
    const double th = ph.theta[p];
    for (int a1 = 0; a1 <= N; ++a1)
      for (int a2 = 0; a2 <= N; ++a2)
        for (int a3 = 0; a3 <= N; ++a3) {
          const int al[3] = {a1, a2, a3};
          double acc = 0.0;
          for (int j = 0; j < 3; ++j) {
            int lo[3] = {a1, a2, a3};
            if (al[j] >= 1) {
              lo[j] = al[j] - 1;
              acc += u[j] * std::sqrt(double(al[j])) * c[hidx(lo[0], lo[1], lo[2], sd)];
            }
            if (al[j] >= 2) {
              lo[j] = al[j] - 2;
              acc += th * std::sqrt(double(al[j]) * (al[j] - 1)) * c[hidx(lo[0], lo[1], lo[2], sd)];
            }
          }
          o[hidx(a1, a2, a3, sd)] = acc;
        }
  });
  forward(nl.data(), nc);
  const double inv_n3 = 1.0 / double(np);

  // transport, L and linear couplings per retained mode
  parallel_for(band_modes_.size(), cfg_.threads, [&](std::size_t i) {
    const std::size_t p = band_modes_[i];
    const auto& k = kvec[p];
    const cplx* c = s.f.data() + p * nc;
    cplx* o = out.f.data() + p * nc;
    const cplx* q = nl.data() + p * nc;
    for (int a1 = 0; a1 <= N; ++a1)
      for (int a2 = 0; a2 <= N; ++a2)
        for (int a3 = 0; a3 <= N; ++a3) {
          const int al[3] = {a1, a2, a3};
          cplx acc = -double(a1 + a2 + a3) * c[hidx(a1, a2, a3, sd)];
          for (int j = 0; j < 3; ++j) {
            if (k[j] == 0) continue;
            cplx vf = 0.0;
            int nb[3] = {a1, a2, a3};
            if (al[j] >= 1) {
              nb[j] = al[j] - 1;
              vf += std::sqrt(double(al[j])) * c[hidx(nb[0], nb[1], nb[2], sd)];
            }
            if (al[j] + 1 <= N) {
              nb[j] = al[j] + 1;
              vf += std::sqrt(double(al[j] + 1)) * c[hidx(nb[0], nb[1], nb[2], sd)];
            }
            acc -= kI * double(k[j]) * vf;
          }
          o[hidx(a1, a2, a3, sd)] = acc + q[hidx(a1, a2, a3, sd)] * inv_n3;
        }
    o[hidx(1, 0, 0, sd)] += s.u[0][p];
    o[hidx(0, 1, 0, sd)] += s.u[1][p];
    o[hidx(0, 0, 1, sd)] += s.u[2][p];
    o[hidx(2, 0, 0, sd)] += kSqrt2 * s.theta[p];
    o[hidx(0, 2, 0, sd)] += kSqrt2 * s.theta[p];
    o[hidx(0, 0, 2, sd)] += kSqrt2 * s.theta[p];
  });
  (void)n;
  return out;
}

double NonlinearSolver::stable_dt() const {
  if (stable_dt_ > 0.0) return stable_dt_;
  double dt = std::numeric_limits<double>::infinity();
  // the bound is monotone in |k_i|, so the corner mode is the binding one
  for (int a = 0; a <= band_; ++a) {
    const Vec3 xi{double(band_), double(band_), double(a)};
    dt = std::min(dt, rk4_stable_dt(xi, cfg_.order));
  }
  stable_dt_ = dt;
  return dt;
}

void NonlinearSolver::step_rk4(FieldState& s, double dt) const {
  if (!(dt > 0.0)) throw std::invalid_argument("step_rk4: dt must be positive");
  if (dt > stable_dt()) throw std::invalid_argument("step_rk4: dt exceeds the stability bound");
  const FieldState k1 = rhs(s);
  const FieldState k2 = rhs(FieldState(s).axpy(0.5 * dt, k1));
  const FieldState k3 = rhs(FieldState(s).axpy(0.5 * dt, k2));
  const FieldState k4 = rhs(FieldState(s).axpy(dt, k3));
  s.axpy(dt / 6.0, k1).axpy(dt / 3.0, k2).axpy(dt / 3.0, k3).axpy(dt / 6.0, k4);
  s.time += dt;
  const PhysicalFields ph = to_physical(s);
  if (ph.max_imag > 1e-10) throw std::runtime_error("step_rk4: fields lost reality");
  for (double r : ph.rho)
    if (1.0 + r <= cfg_.rho_floor) throw std::runtime_error("step_rk4: density floor violated");
}

// ------------------------------------------------------------ initial data

FieldState random_small_state(const NonlinearSolver& solver, double eps, std::uint64_t seed) {
  FieldState s = solver.zero_state();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const int N = s.order();
  const int sd = N + 1;
  const std::size_t nc = s.coeffs();
  for (std::size_t p : solver.band_modes()) {
    const auto k = s.wavenumber(p);
    const std::size_t q = s.mode_index({-k[0], -k[1], -k[2]});
    if (q < p) continue;
    const double k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    const double amp = eps / (1.0 + k2);
    auto draw = [&] {
      const double re = g(rng);
      const double im = q == p ? 0.0 : g(rng);
      return amp * cplx(re, im);
    };
    for (int a1 = 0; a1 <= N; ++a1)
      for (int a2 = 0; a2 <= N; ++a2)
        for (int a3 = 0; a3 <= N; ++a3) s.f[p * nc + hidx(a1, a2, a3, sd)] = std::ldexp(1.0, -(a1 + a2 + a3)) * draw();
    s.rho[p] = draw();
    for (auto& u : s.u) u[p] = draw();
    s.theta[p] = draw();
    for (std::size_t c = 0; c < nc; ++c) s.f[q * nc + c] = std::conj(s.f[p * nc + c]);
    s.rho[q] = std::conj(s.rho[p]);
    for (auto& u : s.u) u[q] = std::conj(u[p]);
    s.theta[q] = std::conj(s.theta[p]);
  }
  // zero modes: the nonlinear conserved integrals vanish
  const std::size_t z = s.mode_index({0, 0, 0});
  cplx* f0 = s.f.data() + z * nc;
  f0[0] = 0.0;
  s.rho[z] = 0.0;
  auto mean_product = [&](const std::vector<cplx>& x, const std::vector<cplx>& y) {
    double m = 0.0;
    for (std::size_t p = 0; p < s.points(); ++p) m += (std::conj(x[p]) * y[p]).real();
    return m;
  };
  for (int j = 0; j < 3; ++j) {
    cplx& b = f0[hidx(j == 0, j == 1, j == 2, sd)];
    const double excess = b.real() + s.u[j][z].real() + mean_product(s.rho, s.u[j]);
    b -= 0.5 * excess;
    s.u[j][z] -= 0.5 * excess;
  }
  // energy: theta_0 + (1/sqrt2) sum c_{2e_j} + <rho theta> + <(1+rho)|u|^2>/2 = 0
  const PhysicalFields ph = solver.to_physical(s);
  double kinetic = 0.0;
  for (std::size_t p = 0; p < s.points(); ++p) {
    double u2 = 0;
    for (int j = 0; j < 3; ++j) u2 += ph.u[j][p] * ph.u[j][p];
    kinetic += 0.5 * (1.0 + ph.rho[p]) * u2;
  }
  kinetic /= double(s.points());
  cplx& c1 = f0[hidx(2, 0, 0, sd)];
  cplx& c2 = f0[hidx(0, 2, 0, sd)];
  cplx& c3 = f0[hidx(0, 0, 2, sd)];
  const double val = s.theta[z].real() + (c1 + c2 + c3).real() / kSqrt2 + mean_product(s.rho, s.theta) + kinetic;
  const double step = val / 2.5;
  s.theta[z] -= step;
  c1 -= step / kSqrt2;
  c2 -= step / kSqrt2;
  c3 -= step / kSqrt2;
  return s;
}

// ------------------------------------------------------------ conservation

ConservationIntegrals conservation_integrals(const NonlinearSolver& solver, const FieldState& s) {
  const PhysicalFields ph = solver.to_physical(s);
  ConservationIntegrals c;
  const std::size_t np = s.points();
  for (std::size_t p = 0; p < np; ++p) {
    const double r = ph.rho[p];
    double u2 = 0;
    for (int j = 0; j < 3; ++j) {
      u2 += ph.u[j][p] * ph.u[j][p];
      c.momentum[j] += ph.b[j][p] + (1.0 + r) * ph.u[j][p];
    }
    c.mass_particles += ph.a[p];
    c.mass_fluid += r;
    c.energy += (1.0 + r) * (ph.theta[p] + 0.5 * u2) + 0.5 * kSqrt6 * ph.omega[p];
  }
  const double w = kVolume / double(np);
  c.mass_particles *= w;
  c.mass_fluid *= w;
  for (auto& m : c.momentum) m *= w;
  c.energy *= w;
  return c;
}

std::array<double, 4> conservation_drift(const ConservationIntegrals& a, const ConservationIntegrals& b,
                                         double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("conservation_drift: scale must be positive");
  double m = 0.0;
  for (int j = 0; j < 3; ++j) m = std::max(m, std::abs(a.momentum[j] - b.momentum[j]));
  return {std::abs(a.mass_particles - b.mass_particles) / scale, std::abs(a.mass_fluid - b.mass_fluid) / scale,
          m / scale, std::abs(a.energy - b.energy) / scale};
}

// ------------------------------------------------------------- functionals

double derivative_weight(const Vec3& k, int m) {
  // complete homogeneous symmetric polynomials in k_i^2
  const double x[3] = {k[0] * k[0], k[1] * k[1], k[2] * k[2]};
  double total = 0.0;
  for (int j = 0; j <= m; ++j)
    for (int p = 0; p <= j; ++p)
      for (int q = 0; q <= j - p; ++q) total += std::pow(x[0], p) * std::pow(x[1], q) * std::pow(x[2], j - p - q);
  return total;
}

namespace {

// nu-weighted image of h on the same box: h + sum_axis (5/4)(2n+1) h + (3/4)(two-step couplings)
Eigen::VectorXd apply_nu(const Eigen::VectorXd& h, int order) {
  const int s = order + 1;
  Eigen::VectorXd out = h;
  for (int a1 = 0; a1 < s; ++a1)
    for (int a2 = 0; a2 < s; ++a2)
      for (int a3 = 0; a3 < s; ++a3) {
        const int al[3] = {a1, a2, a3};
        const std::size_t i = hidx(a1, a2, a3, s);
        double acc = 0.0;
        for (int j = 0; j < 3; ++j) {
          acc += 1.25 * (2 * al[j] + 1) * h(i);
          int nb[3] = {a1, a2, a3};
          if (al[j] >= 2) {
            nb[j] = al[j] - 2;
            acc += 0.75 * std::sqrt(double(al[j]) * (al[j] - 1)) * h(hidx(nb[0], nb[1], nb[2], s));
          }
          if (al[j] + 2 < s) {
            nb[j] = al[j] + 2;
            acc += 0.75 * std::sqrt(double(al[j] + 1) * (al[j] + 2)) * h(hidx(nb[0], nb[1], nb[2], s));
          }
        }
        out(i) += acc;
      }
  return out;
}

} // namespace

FunctionalEvaluator::FunctionalEvaluator(int order, const FunctionalConfig& cfg) : order_(order), cfg_(cfg) {
  if (order < 3) throw std::invalid_argument("FunctionalEvaluator: order must be at least 3");
  if (cfg.sobolev_order < 1 || cfg.sobolev_order > 4)
    throw std::invalid_argument("FunctionalEvaluator: sobolev_order must be in 1..4");
  for (double t : {cfg.tau1, cfg.tau2, cfg.tau3, cfg.tau4, cfg.tau5, cfg.tau6})
    if (!(t > 0.0)) throw std::invalid_argument("FunctionalEvaluator: weights must be positive");
  const int nb = (order + 1) * (order + 1) * (order + 1);
  // images carry up to four derivatives plus the two-step nu coupling
  const int big = order + 6;
  const int bd = (big + 1) * (big + 1) * (big + 1);
  for (int j = 0; j <= 4; ++j) {
    gram_[j] = Eigen::MatrixXd::Zero(nb, nb);
    gram_nu_[j] = Eigen::MatrixXd::Zero(nb, nb);
  }
  for (int b1 = 0; b1 <= 4; ++b1)
    for (int b2 = 0; b1 + b2 <= 4; ++b2)
      for (int b3 = 0; b1 + b2 + b3 <= 4; ++b3) {
        const int j = b1 + b2 + b3;
        Eigen::MatrixXd img(bd, nb);
        for (int c = 0; c < nb; ++c) {
          HermiteCoeffs e(order);
          e.data()[c] = 1.0;
          for (int t = 0; t < b1; ++t) e = ddv(0, e);
          for (int t = 0; t < b2; ++t) e = ddv(1, e);
          for (int t = 0; t < b3; ++t) e = ddv(2, e);
          const HermiteCoeffs r = e.resized(big);
          for (int i = 0; i < bd; ++i) img(i, c) = r.data()[i].real();
        }
        Eigen::MatrixXd nu_img(bd, nb);
        for (int c = 0; c < nb; ++c) nu_img.col(c) = apply_nu(img.col(c), big);
        gram_[j] += img.transpose() * img;
        gram_nu_[j] += img.transpose() * nu_img;
      }
  for (auto& g : gram_nu_) g = 0.5 * (g + g.transpose()).eval();
  micro_.resize(nb, nb);
  for (int c = 0; c < nb; ++c) {
    HermiteCoeffs e(order);
    e.data()[c] = 1.0;
    const HermiteCoeffs g = micro(e);
    for (int r = 0; r < nb; ++r) micro_(r, c) = g.data()[r].real();
  }
}

FunctionalEvaluator::Parts FunctionalEvaluator::mode(const Vec3& k, const ModeState& x) const {
  const int s = cfg_.sobolev_order;
  const HermiteCoeffs f = x.f.resized(order_);
  const HermiteCoeffs g = micro(f);
  const Moments m = moments(f);
  const int nb = int(f.size());
  Eigen::Map<const Eigen::VectorXcd> fv(f.data().data(), nb), gv(g.data().data(), nb);
  auto q = [&](const Eigen::MatrixXd& G, const Eigen::Map<const Eigen::VectorXcd>& v) {
    return (v.adjoint() * (G * v))(0).real();
  };
  double W[5];
  for (int j = 0; j <= 4; ++j) W[j] = derivative_weight(k, j);
  const double k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
  double fluid = std::norm(x.rho) + std::norm(x.theta);
  for (const auto& u : x.u) fluid += std::norm(u);

  Parts out;
  out.plain = W[s] * fluid;
  for (int j = 0; j <= s; ++j) out.plain += W[s - j] * q(gram_[j], fv);

  std::array<cplx, 3> Qg;
  for (int i = 0; i < 3; ++i) Qg[i] = q_moment(i, g);
  cplx e0 = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) e0 += std::conj(kI * (k[j] * m.b[i] + k[i] * m.b[j])) * gamma_moment(i, j, g);
  for (int i = 0; i < 3; ++i) e0 += std::conj(kI * k[i] * m.omega) * Qg[i];
  cplx divq = 0.0, divb = 0.0;
  for (int i = 0; i < 3; ++i) {
    divq += kI * k[i] * Qg[i];
    divb += kI * k[i] * m.b[i];
  }
  e0 += (2.0 / 21.0) * std::conj(m.a) * (kSqrt6 / 5.0 * divq - divb);
  out.E0 = W[s - 1] * e0.real();
  cplx t2 = 0.0;
  for (int i = 0; i < 3; ++i) t2 += std::conj(x.u[i]) * kI * k[i] * x.rho;
  out.E1 = W[s] * (norm_sq(f) + fluid) + cfg_.tau1 * out.E0 + cfg_.tau2 * W[s - 1] * t2.real();

  double macro = std::norm(m.a) + std::norm(m.omega) + std::norm(x.rho) + std::norm(x.theta);
  double bu = 0.0, bpu = 0.0, u2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    macro += std::norm(m.b[i]) + std::norm(x.u[i]);
    bu += std::norm(m.b[i] - x.u[i]);
    bpu += std::norm(m.b[i] + x.u[i]);
    u2 += std::norm(x.u[i]);
  }
  const double exch = std::norm(kSqrt2 * m.omega - kSqrt3 * x.theta);
  out.D1 = W[s - 1] * k2 * macro + W[s] * (bu + exch) + W[s] * q(gram_nu_[0], gv) +
           W[s] * k2 * (u2 + std::norm(x.theta));
  for (int j = 1; j <= s; ++j) {
    out.E2 += cfg_.c[j - 1] * W[s - j] * q(gram_[j], gv);
    out.D2 += W[s - j] * q(gram_nu_[j], gv);
  }
  out.DT1 = out.D1 + cfg_.tau3 * (std::norm(m.a) + std::norm(x.rho)) + cfg_.tau4 * bpu +
            cfg_.tau5 * std::norm(0.5 * kSqrt6 * m.omega + x.theta);
  out.E = out.E1 + cfg_.tau6 * out.E2;
  out.D = out.DT1 + cfg_.tau6 * out.D2;
  return out;
}

FunctionalEvaluator::Parts FunctionalEvaluator::field(const NonlinearSolver& solver, const FieldState& s) const {
  Parts total;
  for (std::size_t p : solver.band_modes()) {
    const auto k = s.wavenumber(p);
    const Parts m = mode({double(k[0]), double(k[1]), double(k[2])}, s.mode(p));
    total.plain += m.plain;
    total.E0 += m.E0;
    total.E1 += m.E1;
    total.D1 += m.D1;
    total.E2 += m.E2;
    total.D2 += m.D2;
    total.DT1 += m.DT1;
    total.E += m.E;
    total.D += m.D;
  }
  for (double* v : {&total.plain, &total.E0, &total.E1, &total.D1, &total.E2, &total.D2, &total.DT1, &total.E,
                    &total.D})
    *v *= kVolume;
  return total;
}

std::array<Eigen::MatrixXcd, 3> FunctionalEvaluator::assemble(const Vec3& k) const {
  const int s = cfg_.sobolev_order;
  const int nb = int(gram_[0].rows());
  const int D = nb + 5;
  const int ir = nb, it = nb + 4;
  auto iu = [&](int i) { return nb + 1 + i; };
  using Row = Eigen::RowVectorXcd;
  auto unit = [&](int i) {
    Row r = Row::Zero(D);
    r(i) = 1.0;
    return r;
  };
  // row of a linear functional of the f block
  auto f_row = [&](auto fn) {
    Row r = Row::Zero(D);
    for (int c = 0; c < nb; ++c) {
      HermiteCoeffs e(order_);
      e.data()[c] = 1.0;
      r(c) = fn(e);
    }
    return r;
  };
  const Row ra = unit(0);
  std::array<Row, 3> rb, rq, ru;
  std::array<std::array<Row, 3>, 3> rg;
  const HermiteCoeffs probe(order_);
  for (int i = 0; i < 3; ++i) {
    rb[i] = unit(int(probe.index(i == 0, i == 1, i == 2)));
    ru[i] = unit(iu(i));
    rq[i] = f_row([&](const HermiteCoeffs& e) { return q_moment(i, micro(e)); });
    for (int j = 0; j < 3; ++j) rg[i][j] = f_row([&](const HermiteCoeffs& e) { return gamma_moment(i, j, micro(e)); });
  }
  const Row rw = (unit(int(probe.index(2, 0, 0))) + unit(int(probe.index(0, 2, 0))) + unit(int(probe.index(0, 0, 2)))) / kSqrt3;
  const Row rr = unit(ir), rt = unit(it);

  auto sq = [](Eigen::MatrixXcd& H, double w, const Row& l) { H += w * l.adjoint() * l; };
  auto re = [](Eigen::MatrixXcd& H, double w, const Row& l1, const Row& l2) {
    H += 0.5 * w * (l1.adjoint() * l2 + l2.adjoint() * l1);
  };
  double W[5];
  for (int j = 0; j <= 4; ++j) W[j] = derivative_weight(k, j);
  const double k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];

  Eigen::MatrixXcd P = Eigen::MatrixXcd::Zero(D, D);
  for (int j = 0; j <= s; ++j) P.topLeftCorner(nb, nb) += W[s - j] * gram_[j].cast<cplx>();
  for (int i : {ir, iu(0), iu(1), iu(2), it}) P(i, i) += W[s];

  Eigen::MatrixXcd E = Eigen::MatrixXcd::Zero(D, D);
  E.topLeftCorner(nb, nb) += W[s] * Eigen::MatrixXcd::Identity(nb, nb);
  for (int i : {ir, iu(0), iu(1), iu(2), it}) E(i, i) += W[s];
  const double w0 = cfg_.tau1 * W[s - 1];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) re(E, w0, kI * (k[j] * rb[i] + k[i] * rb[j]), rg[i][j]);
  Row divq = Row::Zero(D), divb = Row::Zero(D);
  for (int i = 0; i < 3; ++i) {
    re(E, w0, kI * k[i] * rw, rq[i]);
    divq += kI * k[i] * rq[i];
    divb += kI * k[i] * rb[i];
    re(E, cfg_.tau2 * W[s - 1], ru[i], kI * k[i] * rr);
  }
  re(E, w0 * 2.0 / 21.0, ra, kSqrt6 / 5.0 * divq - divb);
  Eigen::MatrixXd e2 = Eigen::MatrixXd::Zero(nb, nb);
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(nb, nb);
  for (int j = 1; j <= s; ++j) {
    e2 += cfg_.c[j - 1] * W[s - j] * gram_[j];
    d2 += W[s - j] * gram_nu_[j];
  }
  E.topLeftCorner(nb, nb) += cfg_.tau6 * (micro_.transpose() * e2 * micro_).cast<cplx>();

  Eigen::MatrixXcd Dm = Eigen::MatrixXcd::Zero(D, D);
  for (const Row* l : {&ra, &rw, &rr, &rt}) sq(Dm, W[s - 1] * k2, *l);
  for (int i = 0; i < 3; ++i) {
    sq(Dm, W[s - 1] * k2, rb[i]);
    sq(Dm, W[s - 1] * k2, ru[i]);
    sq(Dm, W[s], rb[i] - ru[i]);
    sq(Dm, W[s] * k2, ru[i]);
    sq(Dm, cfg_.tau4, rb[i] + ru[i]);
  }
  sq(Dm, W[s], kSqrt2 * rw - kSqrt3 * rt);
  sq(Dm, W[s] * k2, rt);
  sq(Dm, cfg_.tau3, ra);
  sq(Dm, cfg_.tau3, rr);
  sq(Dm, cfg_.tau5, 0.5 * kSqrt6 * rw + rt);
  Dm.topLeftCorner(nb, nb) +=
      (micro_.transpose() * (W[s] * gram_nu_[0] + cfg_.tau6 * d2) * micro_).cast<cplx>();
  return {E, Dm, P};
}

Eigen::MatrixXcd FunctionalEvaluator::matrix_E(const Vec3& k) const { return assemble(k)[0]; }
Eigen::MatrixXcd FunctionalEvaluator::matrix_D(const Vec3& k) const { return assemble(k)[1]; }
Eigen::MatrixXcd FunctionalEvaluator::matrix_plain(const Vec3& k) const { return assemble(k)[2]; }

} // namespace nsvfp


namespace nsvfp {

namespace {

std::vector<Vec3> canonical_band(int band) {
  std::vector<Vec3> out;
  for (int a = 0; a <= band; ++a)
    for (int b = a; b <= band; ++b)
      for (int c = b; c <= band; ++c) out.push_back({double(a), double(b), double(c)});
  return out;
}

// orthonormal basis of the states annihilated by the conserved functionals
Eigen::MatrixXcd decaying_subspace(int order) {
  const Eigen::MatrixXcd C = conserved_functionals(order);
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(C.adjoint());
  const Eigen::MatrixXcd Q = qr.householderQ();
  return Q.rightCols(Q.cols() - C.rows());
}

double min_generalized(const Eigen::MatrixXcd& S, const Eigen::MatrixXcd& B) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (S + S.adjoint()), 0.5 * (B + B.adjoint()),
                                                                 Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("check_functionals: eigen solve failed");
  return es.eigenvalues().minCoeff();
}

} // namespace

FunctionalCheck check_functionals(const FunctionalEvaluator& ev, int band, int samples, std::uint64_t seed) {
  if (band < 0 || samples < 1) throw std::invalid_argument("check_functionals: bad arguments");
  const int N = ev.order();
  FunctionalCheck out;
  out.lyapunov = std::numeric_limits<double>::infinity();
  for (const Vec3& k : canonical_band(band)) {
    const Eigen::MatrixXcd A = assemble_generator(k, N);
    const Eigen::MatrixXcd HE = ev.matrix_E(k);
    Eigen::MatrixXcd S = -(HE * A + A.adjoint() * HE);
    Eigen::MatrixXcd HD = ev.matrix_D(k);
    if (k[0] == 0 && k[1] == 0 && k[2] == 0) {
      const Eigen::MatrixXcd Z = decaying_subspace(N);
      S = Z.adjoint() * S * Z;
      HD = Z.adjoint() * HD * Z;
    }
    out.lyapunov = std::min(out.lyapunov, min_generalized(S, HD));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> pick(-band, band);
  const int D = int(mode_dimension(N));
  out.band_low = out.d_band_low = std::numeric_limits<double>::infinity();
  out.band_high = out.d_band_high = 0.0;
  for (int n = 0; n < samples; ++n) {
    const Vec3 k{double(pick(rng)), double(pick(rng)), double(pick(rng))};
    Eigen::VectorXcd x(D);
    for (int i = 0; i < D; ++i) x(i) = cplx(g(rng), g(rng));
    const ModeState s = unpack(x, N);
    const auto p = ev.mode(k, s);
    // reference dissipation: W_s (nu(g) + |(a, b, omega, rho, u, theta)|^2)
    const HermiteCoeffs f = s.f;
    const Moments m = moments(f);
    double macro = std::norm(m.a) + std::norm(m.omega) + std::norm(s.rho) + std::norm(s.theta);
    for (int i = 0; i < 3; ++i) macro += std::norm(m.b[i]) + std::norm(s.u[i]);
    const double ref = derivative_weight(k, ev.config().sobolev_order) * (nu_norm_sq(micro(f)) + macro);
    out.band_low = std::min(out.band_low, p.E / p.plain);
    out.band_high = std::max(out.band_high, p.E / p.plain);
    out.d_band_low = std::min(out.d_band_low, p.DT1 / ref);
    out.d_band_high = std::max(out.d_band_high, p.DT1 / ref);
  }
  return out;
}

FunctionalTuning tune_functionals(int order, int band, FunctionalConfig start, int max_halvings, int samples,
                                  std::uint64_t seed) {
  FunctionalTuning t;
  t.config = start;
  for (t.halvings = 0;; ++t.halvings) {
    const FunctionalEvaluator ev(order, t.config);
    t.check = check_functionals(ev, band, samples, seed);
    const auto& c = t.check;
    t.ok = c.lyapunov > 0.0 && c.band_low >= 0.5 && c.band_high <= 2.0 && c.d_band_low >= 0.5 && c.d_band_high <= 2.0;
    if (t.ok || t.halvings >= max_halvings) break;
    t.config.tau1 *= 0.5;
    t.config.tau2 *= 0.5;
    t.config.tau6 *= 0.5;
  }
  return t;
}

// --------------------------------------------------------- moment residuals

MomentResiduals moment_residuals(const NonlinearSolver& solver, const FieldState& prev, const FieldState& next,
                                 double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("moment_residuals: dt must be positive");
  FieldState mid = prev + next;
  mid.scale(0.5);
  const PhysicalFields ph = solver.to_physical(mid);
  const std::size_t np = mid.points();
  const int sd = mid.order() + 1;
  const std::size_t nc = mid.coeffs();

  std::array<std::vector<double>, 3> drag;
  std::vector<double> src_derived(np), src_printed(np);
  std::array<std::vector<double>, 3> uq_terms; // u_i Q_i(g) needs g on the grid
  for (auto& d : drag) d.resize(np);
  for (std::size_t p = 0; p < np; ++p) {
    const double a = ph.a[p], th = ph.theta[p], om = ph.omega[p];
    double ub = 0;
    for (int i = 0; i < 3; ++i) {
      drag[i][p] = -ph.b[i][p] + ph.u[i][p] + ph.u[i][p] * a;
      ub += ph.u[i][p] * ph.b[i][p];
    }
    src_derived[p] = 2.0 * om - kSqrt6 * th - (2.0 / kSqrt6) * ub - kSqrt6 * a * th;
    src_printed[p] = 2.0 * om - kSqrt6 * th - (1.0 / kSqrt6) * ub - kSqrt6 * a * th;
  }
  // Q_i(g) is linear in the coefficients, so it is read off the physical
  // expansion at each point
  for (std::size_t p = 0; p < np; ++p) {
    HermiteCoeffs c(mid.order());
    for (std::size_t j = 0; j < nc; ++j) c.data()[j] = ph.f[p * nc + j];
    const HermiteCoeffs g = micro(c);
    double uq = 0;
    for (int i = 0; i < 3; ++i) uq += ph.u[i][p] * q_moment(i, g).real();
    src_printed[p] += 0.5 * uq;
  }
  std::array<std::vector<cplx>, 3> drag_hat;
  for (int i = 0; i < 3; ++i) drag_hat[i] = solver.to_fourier(drag[i]);
  const auto src_d = solver.to_fourier(src_derived);
  const auto src_p = solver.to_fourier(src_printed);

  auto coef = [&](const FieldState& s, std::size_t p, int a1, int a2, int a3) {
    return s.f[p * nc + hidx(a1, a2, a3, sd)];
  };
  auto omega_of = [&](const FieldState& s, std::size_t p) {
    return (coef(s, p, 2, 0, 0) + coef(s, p, 0, 2, 0) + coef(s, p, 0, 0, 2)) / kSqrt3;
  };
  double ra = 0, rb = 0, rw = 0, rp = 0;
  for (std::size_t p : solver.band_modes()) {
    const auto kk = mid.wavenumber(p);
    const double k[3] = {double(kk[0]), double(kk[1]), double(kk[2])};
    const ModeState ms = mid.mode(p);
    const HermiteCoeffs g = micro(ms.f);
    const Moments m = moments(ms.f);
    cplx divb = 0, divq = 0;
    for (int i = 0; i < 3; ++i) {
      divb += kI * k[i] * m.b[i];
      divq += kI * k[i] * q_moment(i, g);
    }
    ra += std::norm((coef(next, p, 0, 0, 0) - coef(prev, p, 0, 0, 0)) / dt + divb);
    for (int i = 0; i < 3; ++i) {
      const int e[3] = {i == 0, i == 1, i == 2};
      cplx r = (coef(next, p, e[0], e[1], e[2]) - coef(prev, p, e[0], e[1], e[2])) / dt + kI * k[i] * m.a +
               (2.0 / kSqrt6) * kI * k[i] * m.omega - drag_hat[i][p];
      for (int j = 0; j < 3; ++j) r += kI * k[j] * gamma_moment(i, j, g);
      rb += std::norm(r);
    }
    const cplx dw = (omega_of(next, p) - omega_of(prev, p)) / dt + (2.0 / kSqrt6) * divb + divq;
    rw += std::norm(dw + src_d[p]);
    rp += std::norm(dw + src_p[p]);
  }
  MomentResiduals out;
  out.derived = {std::sqrt(kVolume * ra), std::sqrt(kVolume * rb), std::sqrt(kVolume * rw)};
  out.omega_printed = std::sqrt(kVolume * rp);
  return out;
}

MomentResiduals moment_floor(const NonlinearSolver& solver, const FieldState& s) {
  // symmetric states around s make the centered difference equal rhs(s)
  const FieldState r = solver.rhs(s);
  return moment_residuals(solver, FieldState(s).axpy(-0.5, r), FieldState(s).axpy(0.5, r), 1.0);
}

// ------------------------------------------------ velocity-space quadrature

namespace {

// calls fn(point, node weight, v, value of 1 + f/M^{1/2}) over grid points and
// tensor Gauss-Hermite nodes
template <class Fn>
void for_each_velocity_node(const FieldState& s, const PhysicalFields& ph, int nodes, Fn&& fn) {
  const int N = s.order();
  const int sd = N + 1;
  const std::size_t nc = s.coeffs();
  const GaussHermiteRule rule = gauss_hermite_rule(nodes);
  const std::vector<double> tab = hermite_table(rule.nodes, N, 0);
  const int q = nodes;
  std::vector<double> t1(std::size_t(sd) * sd * q), t2(std::size_t(sd) * q * q);
  for (std::size_t p = 0; p < s.points(); ++p) {
    const double* c = ph.f.data() + p * nc;
    for (int a1 = 0; a1 < sd; ++a1)
      for (int a2 = 0; a2 < sd; ++a2)
        for (int i3 = 0; i3 < q; ++i3) {
          double acc = 0;
          for (int a3 = 0; a3 < sd; ++a3) acc += c[hidx(a1, a2, a3, sd)] * tab[i3 * sd + a3];
          t1[(a1 * sd + a2) * q + i3] = acc;
        }
    for (int a1 = 0; a1 < sd; ++a1)
      for (int i2 = 0; i2 < q; ++i2)
        for (int i3 = 0; i3 < q; ++i3) {
          double acc = 0;
          for (int a2 = 0; a2 < sd; ++a2) acc += t1[(a1 * sd + a2) * q + i3] * tab[i2 * sd + a2];
          t2[(a1 * q + i2) * q + i3] = acc;
        }
    for (int i1 = 0; i1 < q; ++i1)
      for (int i2 = 0; i2 < q; ++i2)
        for (int i3 = 0; i3 < q; ++i3) {
          double val = 1.0;
          for (int a1 = 0; a1 < sd; ++a1) val += t2[(a1 * q + i2) * q + i3] * tab[i1 * sd + a1];
          const Vec3 v{rule.nodes[i1], rule.nodes[i2], rule.nodes[i3]};
          fn(p, rule.weights[i1] * rule.weights[i2] * rule.weights[i3], v, val);
        }
  }
}

} // namespace

ExchangeReport exchange_terms(const NonlinearSolver& solver, const FieldState& s, int nodes) {
  if (nodes == 0) nodes = s.order() + 4;
  if (nodes < s.order() + 2) throw std::invalid_argument("exchange_terms: too few quadrature nodes");
  const PhysicalFields ph = solver.to_physical(s);
  const std::size_t np = s.points();
  ExchangeReport r;
  for (auto& m : r.momentum) m.assign(np, 0.0);
  r.energy.assign(np, 0.0);
  for_each_velocity_node(s, ph, nodes, [&](std::size_t p, double w, const Vec3& v, double val) {
    const double u[3] = {ph.u[0][p], ph.u[1][p], ph.u[2][p]};
    double vv = 0, vu = 0;
    for (int i = 0; i < 3; ++i) {
      r.momentum[i][p] += w * (v[i] - u[i]) * val;
      vv += v[i] * v[i];
      vu += v[i] * u[i];
    }
    r.energy[p] += w * (vv - vu - 3.0 * (1.0 + ph.theta[p])) * val;
  });
  for (std::size_t p = 0; p < np; ++p) {
    const double a = ph.a[p], th = ph.theta[p];
    double ub = 0;
    for (int i = 0; i < 3; ++i) {
      ub += ph.u[i][p] * ph.b[i][p];
      const double closed = ph.b[i][p] - ph.u[i][p] * (1.0 + a);
      r.momentum_residual = std::max(r.momentum_residual, std::abs(r.momentum[i][p] - closed));
    }
    const double closed = kSqrt6 * ph.omega[p] - 3.0 * th - 3.0 * a * th - ub;
    r.energy_residual = std::max(r.energy_residual, std::abs(r.energy[p] - closed));
  }
  return r;
}

PositivityReport positivity_probe(const NonlinearSolver& solver, const FieldState& s, int nodes) {
  if (nodes == 0) nodes = s.order() + 4;
  if (nodes < 1) throw std::invalid_argument("positivity_probe: bad node count");
  const PhysicalFields ph = solver.to_physical(s);
  PositivityReport r;
  r.min_F = std::numeric_limits<double>::infinity();
  r.min_density = std::numeric_limits<double>::infinity();
  const double norm = std::pow(2.0 * kPi, -1.5);
  for_each_velocity_node(s, ph, nodes, [&](std::size_t, double, const Vec3& v, double val) {
    const double M = norm * std::exp(-0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]));
    r.min_F = std::min(r.min_F, M * val);
  });
  for (double x : ph.rho) r.min_density = std::min(r.min_density, 1.0 + x);
  return r;
}

} // namespace nsvfp
