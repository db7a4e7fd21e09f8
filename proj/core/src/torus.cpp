#include "nsvfp/torus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

#include "nsvfp/parallel.hpp"
#include "symmetry.hpp"

namespace nsvfp {

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

IVec3 negate(const IVec3& k) { return {-k[0], -k[1], -k[2]}; }

int norm2(const IVec3& k) { return k[0] * k[0] + k[1] * k[1] + k[2] * k[2]; }

ModeState conj_state(const ModeState& s) {
  ModeState c(s.f.order());
  for (std::size_t i = 0; i < s.f.size(); ++i) c.f.data()[i] = std::conj(s.f.data()[i]);
  c.rho = std::conj(s.rho);
  for (int j = 0; j < 3; ++j) c.u[j] = std::conj(s.u[j]);
  c.theta = std::conj(s.theta);
  return c;
}

double state_sq(const ModeState& s) {
  double n = norm_sq(s.f) + std::norm(s.rho) + std::norm(s.theta);
  for (const auto& x : s.u) n += std::norm(x);
  return n;
}

void check_shape(const TorusSpectrum& spec, const TorusData& data) {
  if (data.size() != spec.modes.size()) throw std::invalid_argument("torus data does not match the spectrum");
}

} // namespace

std::size_t TorusSpectrum::index_of(const IVec3& k) const {
  for (int j = 0; j < 3; ++j)
    if (std::abs(k[j]) > kmax) throw std::out_of_range("mode outside the spectrum");
  const int s = 2 * kmax + 1;
  return std::size_t(((k[0] + kmax) * s + (k[1] + kmax)) * s + (k[2] + kmax));
}

TorusSpectrum make_spectrum(int kmax) {
  if (kmax < 0) throw std::invalid_argument("make_spectrum: kmax must be nonnegative");
  TorusSpectrum sp;
  sp.kmax = kmax;
  for (int a = -kmax; a <= kmax; ++a)
    for (int b = -kmax; b <= kmax; ++b)
      for (int c = -kmax; c <= kmax; ++c) sp.modes.push_back({a, b, c});
  sp.zero_index = sp.index_of({0, 0, 0});
  return sp;
}

TorusData random_torus_data(const TorusSpectrum& spec, int order, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, amplitude);
  auto c = [&] {
    const double re = g(rng);
    const double im = g(rng);
    return cplx(re, im);
  };
  TorusData data(spec.modes.size(), ModeState(order));
  for (std::size_t i = 0; i < spec.modes.size(); ++i) {
    const IVec3& k = spec.modes[i];
    const std::size_t j = spec.index_of(negate(k));
    if (j < i) continue;
    // the zero mode is its own conjugate, so it is drawn real
    auto draw = [&] { return j == i ? cplx(g(rng)) : c(); };
    ModeState s(order);
    for (std::size_t n = 0; n < s.f.size(); ++n) s.f.data()[n] = draw();
    s.rho = draw();
    for (auto& x : s.u) x = draw();
    s.theta = draw();
    data[j] = conj_state(s);
    data[i] = s;
  }
  return data;
}

ConservedSet conserved_set(const TorusSpectrum& spec, const TorusData& data) {
  check_shape(spec, data);
  const ModeState& z = data[spec.zero_index];
  const Moments m = moments(z.f);
  ConservedSet c;
  c.a = m.a;
  c.rho = z.rho;
  for (int j = 0; j < 3; ++j) c.momentum[j] = m.b[j] + z.u[j];
  c.energy = z.theta + std::sqrt(6.0) / 2.0 * m.omega;
  return c;
}

double max_abs(const ConservedSet& c) {
  double m = std::max(std::abs(c.a), std::abs(c.rho));
  for (const auto& x : c.momentum) m = std::max(m, std::abs(x));
  return std::max(m, std::abs(c.energy));
}

double max_drift(const ConservedSet& a, const ConservedSet& b) {
  double m = std::max(std::abs(a.a - b.a), std::abs(a.rho - b.rho));
  for (int j = 0; j < 3; ++j) m = std::max(m, std::abs(a.momentum[j] - b.momentum[j]));
  return std::max(m, std::abs(a.energy - b.energy));
}

TorusData enforce_conservation(const TorusSpectrum& spec, TorusData data) {
  check_shape(spec, data);
  ModeState& z = data[spec.zero_index];
  HermiteCoeffs& f = z.f;
  if (f.order() < 2) throw std::invalid_argument("enforce_conservation: order must be at least 2");
  f(0, 0, 0) = 0.0;
  z.rho = 0.0;
  const IVec3 e[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int j = 0; j < 3; ++j) {
    cplx& b = f(e[j][0], e[j][1], e[j][2]);
    const cplx d = 0.5 * (b + z.u[j]);
    b -= d;
    z.u[j] -= d;
  }
  // theta + (1/sqrt2) sum_j c_{2e_j} = 0, projected along its normal
  cplx& c1 = f(2, 0, 0);
  cplx& c2 = f(0, 2, 0);
  cplx& c3 = f(0, 0, 2);
  const cplx val = z.theta + kInvSqrt2 * (c1 + c2 + c3);
  const cplx step = val / 2.5;
  z.theta -= step;
  c1 -= kInvSqrt2 * step;
  c2 -= kInvSqrt2 * step;
  c3 -= kInvSqrt2 * step;
  return data;
}

double total_norm(const TorusData& data) {
  double s = 0.0;
  for (const auto& m : data) s += state_sq(m);
  return std::sqrt(s);
}

double fluid_sobolev_norm(const TorusSpectrum& spec, const TorusData& data, int s) {
  check_shape(spec, data);
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& m = data[i];
    double f = std::norm(m.rho) + std::norm(m.theta);
    for (const auto& x : m.u) f += std::norm(x);
    acc += std::pow(1.0 + norm2(spec.modes[i]), s) * f;
  }
  return std::sqrt(acc);
}

TorusEvolver::TorusEvolver(const TorusSpectrum& spec, int order, int threads)
    : spec_(spec), order_(order), threads_(threads) {
  std::map<IVec3, std::size_t> index;
  std::vector<Vec3> reps;
  for (const auto& k : spec_.modes) {
    detail::SignedPerm r;
    const Vec3 c = detail::canonical(to_xi(k), r);
    const IVec3 key{int(c[0]), int(c[1]), int(c[2])};
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, reps.size()).first;
      reps.push_back(c);
    }
    links_.push_back({it->second, r.perm, r.sign});
  }
  props_.resize(reps.size());
  parallel_for(reps.size(), threads_,
               [&](std::size_t i) { props_[i] = std::make_shared<const ModePropagator>(reps[i], order_); });
}

TorusData TorusEvolver::evolve(const TorusData& data, double t) const {
  check_shape(spec_, data);
  TorusData out(data.size());
  parallel_for(data.size(), threads_, [&](std::size_t i) {
    const Link& l = links_[i];
    const detail::SignedPerm r{l.perm, l.sign};
    const ModeState y = detail::pull_back(data[i], r);
    const Eigen::VectorXcd yt = props_[l.prop]->apply(t, pack(y));
    out[i] = detail::push_forward(unpack(yt, order_), r);
  });
  return out;
}

std::vector<double> TorusEvolver::norms(const TorusData& data, const std::vector<double>& times) const {
  check_shape(spec_, data);
  std::vector<std::vector<double>> per(data.size(), std::vector<double>(times.size(), 0.0));
  parallel_for(data.size(), threads_, [&](std::size_t i) {
    const Link& l = links_[i];
    const ModePropagator& p = *props_[l.prop];
    // signed permutations are isometries, so the norm can be read at the representative
    const Eigen::VectorXcd x = pack(detail::pull_back(data[i], {l.perm, l.sign}));
    if (x.squaredNorm() == 0.0) return;
    if (p.diagonalized()) {
      const Eigen::VectorXcd z = p.to_eigenbasis(x);
      for (std::size_t k = 0; k < times.size(); ++k) {
        Eigen::VectorXcd w = z;
        for (Eigen::Index e = 0; e < w.size(); ++e) w(e) *= std::exp(p.eigenvalues()(e) * times[k]);
        per[i][k] = p.from_eigenbasis(w).squaredNorm();
      }
    } else {
      for (std::size_t k = 0; k < times.size(); ++k) per[i][k] = p.apply(times[k], x).squaredNorm();
    }
  });
  std::vector<double> out(times.size(), 0.0);
  for (const auto& row : per)
    for (std::size_t k = 0; k < times.size(); ++k) out[k] += row[k];
  for (auto& v : out) v = std::sqrt(v);
  return out;
}

TorusDecay torus_linear_decay(const TorusEvolver& ev, const TorusData& data, double T, int samples, double fit_from) {
  if (samples < 2 || !(T > 0.0)) throw std::invalid_argument("torus_linear_decay: bad sampling");
  TorusDecay d;
  d.times = lin_spaced(0.0, T, samples);
  d.norms = ev.norms(data, d.times);
  for (double t : d.times) {
    const TorusData s = ev.evolve(data, t);
    d.h3.push_back(fluid_sobolev_norm(ev.spectrum(), s, 3));
    d.h4.push_back(fluid_sobolev_norm(ev.spectrum(), s, 4));
  }
  std::vector<double> ft, fy;
  for (std::size_t i = 0; i < d.times.size(); ++i)
    if (d.times[i] >= fit_from - 1e-12 && d.norms[i] > 0.0) {
      ft.push_back(d.times[i]);
      fy.push_back(d.norms[i]);
    }
  if (ft.size() >= 2) d.fit = fit_exponential(ft, fy);
  return d;
}

SpectralGap min_spectral_gap(const TorusSpectrum& spec, int order, int threads) {
  std::map<IVec3, IVec3> reps;
  for (const auto& k : spec.modes) {
    IVec3 a{std::abs(k[0]), std::abs(k[1]), std::abs(k[2])};
    std::sort(a.begin(), a.end());
    reps.emplace(a, a);
  }
  std::vector<IVec3> list;
  for (const auto& [key, k] : reps) list.push_back(k);
  std::vector<double> gaps(list.size());
  parallel_for(list.size(), threads, [&](std::size_t i) {
    const bool zero = list[i] == IVec3{0, 0, 0};
    gaps[i] = -spectral_abscissa(to_xi(list[i]), order, zero);
  });
  SpectralGap g{gaps[0], list[0]};
  for (std::size_t i = 1; i < list.size(); ++i)
    if (gaps[i] < g.gap) g = {gaps[i], list[i]};
  return g;
}

double poincare_ratio(const TorusSpectrum& spec, const std::vector<cplx>& field) {
  if (field.size() != spec.modes.size()) throw std::invalid_argument("poincare_ratio: field does not match spectrum");
  if (std::abs(field[spec.zero_index]) > 1e-12) throw std::invalid_argument("poincare_ratio: field must have zero mean");
  double g2 = 0.0, d2 = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    g2 += std::norm(field[i]);
    d2 += norm2(spec.modes[i]) * std::norm(field[i]);
  }
  if (d2 == 0.0) return 0.0;
  return std::sqrt(g2 / d2);
}

} // namespace nsvfp
