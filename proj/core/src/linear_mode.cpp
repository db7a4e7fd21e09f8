#include "nsvfp/linear_mode.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <stdexcept>

namespace nsvfp {

namespace {

const cplx I(0.0, 1.0);

double sq_norm(const Vec3& x) { return x[0] * x[0] + x[1] * x[1] + x[2] * x[2]; }

struct Layout {
  int order;
  int s;
  std::size_t nf;
  explicit Layout(int n) : order(n), s(n + 1), nf(std::size_t(n + 1) * (n + 1) * (n + 1)) {}
  std::size_t f(int a1, int a2, int a3) const { return (std::size_t(a1) * s + a2) * s + a3; }
  std::size_t f(std::array<int, 3> a) const { return f(a[0], a[1], a[2]); }
  std::size_t rho() const { return nf; }
  std::size_t u(int i) const { return nf + 1 + i; }
  std::size_t theta() const { return nf + 4; }
  std::size_t e(int j) const {
    std::array<int, 3> a{0, 0, 0};
    a[j] = 1;
    return f(a);
  }
  std::size_t e2(int j) const {
    std::array<int, 3> a{0, 0, 0};
    a[j] = 2;
    return f(a);
  }
};

void require_order(int order) {
  if (order < 2) throw std::invalid_argument("linear mode: Hermite order must be at least 2");
}

} // namespace

Eigen::VectorXcd pack(const ModeState& s) {
  const Layout l(s.f.order());
  Eigen::VectorXcd x(l.nf + 5);
  for (std::size_t i = 0; i < l.nf; ++i) x(i) = s.f.data()[i];
  x(l.rho()) = s.rho;
  for (int i = 0; i < 3; ++i) x(l.u(i)) = s.u[i];
  x(l.theta()) = s.theta;
  return x;
}

ModeState unpack(const Eigen::VectorXcd& x, int order) {
  const Layout l(order);
  if (std::size_t(x.size()) != l.nf + 5) throw std::invalid_argument("unpack: size does not match order");
  ModeState s(order);
  for (std::size_t i = 0; i < l.nf; ++i) s.f.data()[i] = x(i);
  s.rho = x(l.rho());
  for (int i = 0; i < 3; ++i) s.u[i] = x(l.u(i));
  s.theta = x(l.theta());
  return s;
}

Eigen::MatrixXcd assemble_generator(const Vec3& xi, int order) {
  require_order(order);
  const Layout l(order);
  const std::size_t d = l.nf + 5;
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(d, d);
  const double k2 = sq_norm(xi);
  const double r2 = std::sqrt(2.0);

  for (int a1 = 0; a1 <= order; ++a1)
    for (int a2 = 0; a2 <= order; ++a2)
      for (int a3 = 0; a3 <= order; ++a3) {
        const std::array<int, 3> al{a1, a2, a3};
        const std::size_t c = l.f(al);
        a(c, c) += -double(a1 + a2 + a3);
        for (int j = 0; j < 3; ++j) {
          if (xi[j] == 0.0) continue;
          if (al[j] + 1 <= order) {
            auto up = al;
            up[j] += 1;
            a(l.f(up), c) += -I * xi[j] * std::sqrt(double(al[j] + 1));
          }
          if (al[j] > 0) {
            auto dn = al;
            dn[j] -= 1;
            a(l.f(dn), c) += -I * xi[j] * std::sqrt(double(al[j]));
          }
        }
      }
  for (int j = 0; j < 3; ++j) {
    a(l.e(j), l.u(j)) += 1.0;
    a(l.e2(j), l.theta()) += r2;
    a(l.rho(), l.u(j)) += -I * xi[j];
    a(l.u(j), l.u(j)) += -k2 - 1.0;
    a(l.u(j), l.theta()) += -I * xi[j];
    a(l.u(j), l.rho()) += -I * xi[j];
    a(l.u(j), l.e(j)) += 1.0;
    a(l.theta(), l.u(j)) += -I * xi[j];
    a(l.theta(), l.e2(j)) += r2;
  }
  a(l.theta(), l.theta()) += -k2 - 3.0;
  return a;
}

Eigen::VectorXcd apply_generator(const Vec3& xi, int order, const Eigen::VectorXcd& x) {
  require_order(order);
  const Layout l(order);
  if (std::size_t(x.size()) != l.nf + 5) throw std::invalid_argument("apply_generator: size mismatch");
  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(x.size());
  const double k2 = sq_norm(xi);
  const double r2 = std::sqrt(2.0);
  for (int a1 = 0; a1 <= order; ++a1)
    for (int a2 = 0; a2 <= order; ++a2)
      for (int a3 = 0; a3 <= order; ++a3) {
        const std::array<int, 3> al{a1, a2, a3};
        const std::size_t c = l.f(al);
        const cplx xc = x(c);
        y(c) += -double(a1 + a2 + a3) * xc;
        for (int j = 0; j < 3; ++j) {
          if (xi[j] == 0.0) continue;
          if (al[j] + 1 <= order) {
            auto up = al;
            up[j] += 1;
            y(l.f(up)) += -I * xi[j] * std::sqrt(double(al[j] + 1)) * xc;
          }
          if (al[j] > 0) {
            auto dn = al;
            dn[j] -= 1;
            y(l.f(dn)) += -I * xi[j] * std::sqrt(double(al[j])) * xc;
          }
        }
      }
  const cplx rho = x(l.rho()), th = x(l.theta());
  for (int j = 0; j < 3; ++j) {
    const cplx uj = x(l.u(j));
    y(l.e(j)) += uj;
    y(l.e2(j)) += r2 * th;
    y(l.rho()) += -I * xi[j] * uj;
    y(l.u(j)) += (-k2 - 1.0) * uj - I * xi[j] * (th + rho) + x(l.e(j));
    y(l.theta()) += -I * xi[j] * uj + r2 * x(l.e2(j));
  }
  y(l.theta()) += (-k2 - 3.0) * th;
  return y;
}

double rk4_stable_dt(const Vec3& xi, int order) {
  require_order(order);
  const double k1 = std::abs(xi[0]) + std::abs(xi[1]) + std::abs(xi[2]);
  const double k2 = sq_norm(xi);
  const double rn = std::sqrt(double(order));
  // infinity-norm bound on A; RK4 is stable on the left half-disk of radius 2.6
  const double kinetic = 3.0 * order + 2.0 * rn * k1 + std::sqrt(2.0);
  const double velocity = k2 + 2.0 + 2.0 * std::max({std::abs(xi[0]), std::abs(xi[1]), std::abs(xi[2])});
  const double temperature = k2 + 3.0 + k1 + 3.0 * std::sqrt(2.0);
  const double bound = std::max({kinetic, velocity, temperature, k1});
  return 2.5 / bound;
}

ModePropagator::ModePropagator(const Vec3& xi, int order)
    : xi_(xi), order_(order), a_(assemble_generator(xi, order)) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(a_, true);
  if (es.info() == Eigen::Success) {
    lambda_ = es.eigenvalues();
    v_ = es.eigenvectors();
    lu_.compute(v_);
    // accept the eigenbasis only if it reproduces A to near round-off
    const double scale = std::max(1.0, a_.cwiseAbs().maxCoeff());
    const Eigen::MatrixXcd back = v_ * lambda_.asDiagonal() * lu_.solve(Eigen::MatrixXcd::Identity(a_.rows(), a_.cols()));
    const double err = (back - a_).cwiseAbs().maxCoeff() / scale;
    diagonalized_ = std::isfinite(err) && err < 1e-9;
  }
  if (!diagonalized_) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ev(a_, false);
    lambda_ = ev.eigenvalues();
  }
}

Eigen::VectorXcd ModePropagator::to_eigenbasis(const Eigen::VectorXcd& x) const {
  if (!diagonalized_) throw std::logic_error("ModePropagator: no eigenbasis available");
  return lu_.solve(x);
}

Eigen::VectorXcd ModePropagator::from_eigenbasis(const Eigen::VectorXcd& y) const {
  if (!diagonalized_) throw std::logic_error("ModePropagator: no eigenbasis available");
  return v_ * y;
}

Eigen::VectorXcd ModePropagator::apply(double t, const Eigen::VectorXcd& x) const {
  if (diagonalized_) {
    Eigen::VectorXcd y = lu_.solve(x);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) *= std::exp(lambda_(i) * t);
    return v_ * y;
  }
  const Eigen::MatrixXcd e = (a_ * t).exp();
  return e * x;
}

Eigen::VectorXcd rk4_evolve(const Vec3& xi, int order, const Eigen::VectorXcd& x0, double t, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_evolve: dt must be positive");
  const double limit = rk4_stable_dt(xi, order);
  if (dt > limit)
    throw std::invalid_argument("rk4_evolve: dt exceeds the stability bound " + std::to_string(limit));
  const long steps = std::max(1L, long(std::ceil(t / dt - 1e-12)));
  const double h = t / double(steps);
  Eigen::VectorXcd x = x0;
  for (long s = 0; s < steps; ++s) {
    const Eigen::VectorXcd k1 = apply_generator(xi, order, x);
    const Eigen::VectorXcd k2 = apply_generator(xi, order, x + 0.5 * h * k1);
    const Eigen::VectorXcd k3 = apply_generator(xi, order, x + 0.5 * h * k2);
    const Eigen::VectorXcd k4 = apply_generator(xi, order, x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

ModeState evolve_mode(const Vec3& xi, const ModeState& s0, double t, const EvolveOptions& opt) {
  const int order = s0.f.order();
  require_order(order);
  if (t < 0.0) throw std::invalid_argument("evolve_mode: negative time");
  EvolveMethod m = opt.method;
  if (m == EvolveMethod::automatic)
    m = mode_dimension(order) <= opt.eigen_limit ? EvolveMethod::eigen : EvolveMethod::rk4;
  const Eigen::VectorXcd x0 = pack(s0);
  if (m == EvolveMethod::eigen) return unpack(ModePropagator(xi, order).apply(t, x0), order);
  const double dt = opt.dt > 0.0 ? opt.dt : 0.5 * rk4_stable_dt(xi, order);
  return unpack(rk4_evolve(xi, order, x0, t, dt), order);
}

HermiteCoeffs make_source(const std::array<HermiteCoeffs, 3>& g_raw, const HermiteCoeffs& phi_raw, int order) {
  require_order(order);
  HermiteCoeffs s(order);
  for (int j = 0; j < 3; ++j) {
    HermiteCoeffs g = g_raw[j].resized(std::max(order, g_raw[j].order()));
    g = g - project_P0(g) - project_P1(g);
    // (d/dv_j - v_j/2) g = -raise_j g
    s -= raise(j, g).resized(order);
  }
  const HermiteCoeffs phi = micro(phi_raw.resized(std::max(order, phi_raw.order())));
  s += phi.resized(order);
  return s.resized(order);
}

void validate_source(const HermiteCoeffs& s, double tol) {
  const Moments m = moments(s);
  const double macro = std::abs(m.a) + std::abs(m.b[0]) + std::abs(m.b[1]) + std::abs(m.b[2]) + std::abs(m.omega);
  const double scale = std::max(1.0, std::sqrt(norm_sq(s)));
  if (macro > tol * scale) throw std::invalid_argument("kinetic source has a macroscopic component");
}

ModeState duhamel_evolve(const ModePropagator& prop, const ModeState& s0,
                         const std::vector<HermiteCoeffs>& source_samples, double t) {
  const int order = prop.order();
  const std::size_t n = source_samples.size();
  if (n < 3 || n % 2 == 0) throw std::invalid_argument("duhamel_evolve: need an odd number >= 3 of samples");
  if (s0.f.order() != order) throw std::invalid_argument("duhamel_evolve: order mismatch");
  const double h = t / double(n - 1);
  Eigen::VectorXcd acc = prop.apply(t, pack(s0));
  ModeState src(order);
  for (std::size_t k = 0; k < n; ++k) {
    validate_source(source_samples[k]);
    const double w = (k == 0 || k + 1 == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    src.f = source_samples[k].resized(order);
    acc += (w * h / 3.0) * prop.apply(t - double(k) * h, pack(src));
  }
  return unpack(acc, order);
}

namespace {

// Re of the interactive functional; linear in each argument slot.
double interactive_part(const Vec3& xi, const ModeState& s, const EnergyWeights& w) {
  const HermiteCoeffs g = micro(s.f);
  const Moments m = moments(s.f);
  const double k2 = sq_norm(xi);
  cplx total = 0.0;
  // <p | q> = p conj(q)
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const cplx p = I * xi[i] * m.b[j] + I * xi[j] * m.b[i];
      total += p * std::conj(gamma_moment(i, j, g));
    }
  std::array<cplx, 3> q;
  for (int i = 0; i < 3; ++i) q[i] = q_moment(i, g);
  for (int i = 0; i < 3; ++i) total += I * xi[i] * m.omega * std::conj(q[i]);
  cplx second = 0.0;
  for (int j = 0; j < 3; ++j) second += I * (std::sqrt(6.0) / 5.0) * xi[j] * q[j] - I * xi[j] * m.b[j];
  total += w.kappa1 * m.a * std::conj(second);
  cplx coupling = 0.0;
  for (int i = 0; i < 3; ++i) coupling += s.u[i] * std::conj(I * xi[i] * s.rho);
  total += w.kappa2 * coupling;
  return (total / (1.0 + k2)).real();
}

double plain(const ModeState& s) {
  double p = norm_sq(s.f) + std::norm(s.rho) + std::norm(s.theta);
  for (const auto& x : s.u) p += std::norm(x);
  return p;
}

} // namespace

EnergyReport energy_EF(const Vec3& xi, const ModeState& s, const EnergyWeights& w) {
  require_order(s.f.order());
  EnergyReport r;
  r.plain_sq = plain(s);
  r.interactive = interactive_part(xi, s, w);
  r.ef = r.plain_sq + w.kappa3 * r.interactive;
  r.micro_nu = nu_norm_sq(micro(s.f));
  const Moments m = moments(s.f);
  const double k2 = sq_norm(xi);
  for (int i = 0; i < 3; ++i) {
    r.exchange_velocity += std::norm(s.u[i] - m.b[i]);
    r.fluid_gradient += k2 * std::norm(s.u[i]);
  }
  r.fluid_gradient += k2 * std::norm(s.theta);
  r.exchange_temperature = std::norm(std::sqrt(2.0) * m.omega - std::sqrt(3.0) * s.theta);
  return r;
}

Eigen::MatrixXcd energy_form(const Vec3& xi, int order, const EnergyWeights& w) {
  require_order(order);
  const Layout l(order);
  const std::size_t d = l.nf + 5;
  // coordinates read by the interactive functional
  std::vector<std::size_t> active;
  for (int a1 = 0; a1 <= std::min(order, 3); ++a1)
    for (int a2 = 0; a2 <= std::min(order, 3); ++a2)
      for (int a3 = 0; a3 <= std::min(order, 3); ++a3)
        if (a1 + a2 + a3 <= 3) active.push_back(l.f(a1, a2, a3));
  active.push_back(l.rho());
  for (int i = 0; i < 3; ++i) active.push_back(l.u(i));

  auto form = [&](const Eigen::VectorXcd& x) { return interactive_part(xi, unpack(x, order), w); };
  const std::size_t na = active.size();
  Eigen::MatrixXcd k = Eigen::MatrixXcd::Zero(na, na);
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(d);
  std::vector<double> diag(na);
  for (std::size_t p = 0; p < na; ++p) {
    x.setZero();
    x(active[p]) = 1.0;
    diag[p] = form(x);
    k(p, p) = diag[p];
  }
  for (std::size_t p = 0; p < na; ++p)
    for (std::size_t q = p + 1; q < na; ++q) {
      x.setZero();
      x(active[p]) = 1.0;
      x(active[q]) = 1.0;
      const double re = 0.5 * (form(x) - diag[p] - diag[q]);
      x(active[q]) = I;
      const double im = -0.5 * (form(x) - diag[p] - diag[q]);
      k(p, q) = cplx(re, im);
      k(q, p) = std::conj(k(p, q));
    }
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Identity(d, d);
  for (std::size_t p = 0; p < na; ++p)
    for (std::size_t q = 0; q < na; ++q) h(active[p], active[q]) += w.kappa3 * k(p, q);
  return h;
}

double lyapunov_constant(const Vec3& xi, int order, const EnergyWeights& w) {
  const double k2 = sq_norm(xi);
  if (k2 == 0.0) throw std::invalid_argument("lyapunov_constant: xi must be nonzero");
  const Eigen::MatrixXcd h = energy_form(xi, order, w);
  const Eigen::MatrixXcd a = assemble_generator(xi, order);
  const Eigen::MatrixXcd r = -(h * a + a.adjoint() * h);
  Eigen::LLT<Eigen::MatrixXcd> llt(h);
  if (llt.info() != Eigen::Success) return -1.0;
  const Eigen::MatrixXcd lr = llt.matrixL().solve(r);
  const Eigen::MatrixXcd m = llt.matrixL().solve(lr.adjoint()).adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0) * (1.0 + k2) / k2;
}

EnergyTuning tune_energy_weights(int order, const std::vector<Vec3>& xis, EnergyWeights start, int max_halvings) {
  EnergyTuning t;
  t.weights = start;
  for (t.halvings = 0; t.halvings <= max_halvings; ++t.halvings) {
    t.band_low = 1e300;
    t.band_high = -1e300;
    t.constant = 1e300;
    bool ok = true;
    for (const auto& xi : xis) {
      const Eigen::MatrixXcd h = energy_form(xi, order, t.weights);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
      t.band_low = std::min(t.band_low, es.eigenvalues()(0));
      t.band_high = std::max(t.band_high, es.eigenvalues()(es.eigenvalues().size() - 1));
      if (t.band_low < 0.5 || t.band_high > 2.0) { ok = false; break; }
      t.constant = std::min(t.constant, lyapunov_constant(xi, order, t.weights));
      if (t.constant <= 0.0) { ok = false; break; }
    }
    if (ok) return t;
    t.weights.kappa3 *= 0.5;
  }
  throw std::runtime_error("tune_energy_weights: no admissible kappa3 found");
}

Eigen::MatrixXcd conserved_functionals(int order) {
  require_order(order);
  const Layout l(order);
  const std::size_t d = l.nf + 5;
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(6, d);
  c(0, l.f(0, 0, 0)) = 1.0;
  c(1, l.rho()) = 1.0;
  for (int i = 0; i < 3; ++i) {
    c(2 + i, l.e(i)) = 1.0;
    c(2 + i, l.u(i)) = 1.0;
  }
  c(5, l.theta()) = 1.0;
  for (int j = 0; j < 3; ++j) c(5, l.e2(j)) = 1.0 / std::sqrt(2.0);
  for (int r = 0; r < 6; ++r) c.row(r).normalize();
  return c;
}

double spectral_abscissa(const Vec3& xi, int order, bool exclude_conserved) {
  const Eigen::MatrixXcd a = assemble_generator(xi, order);
  const bool at_origin = sq_norm(xi) == 0.0;
  if (exclude_conserved && at_origin) {
    // restrict to the orthogonal complement of the conserved directions
    const Eigen::MatrixXcd c = conserved_functionals(order);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(c.adjoint());
    const Eigen::MatrixXcd q = qr.householderQ();
    const Eigen::MatrixXcd w = q.rightCols(a.cols() - c.rows());
    const Eigen::MatrixXcd b = w.adjoint() * a * w;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(b, false);
    return es.eigenvalues().real().maxCoeff();
  }
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(a, false);
  return es.eigenvalues().real().maxCoeff();
}

} // namespace nsvfp
