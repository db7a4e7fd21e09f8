#include "nsvfp/whole_space.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/minima.hpp>
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "nsvfp/parallel.hpp"
#include "nsvfp/quadrature.hpp"
#include "symmetry.hpp"

namespace nsvfp {

namespace {

using detail::SignedPerm;
using detail::canonical;
using detail::pull_back;

constexpr double kPi = 3.14159265358979323846;
const double kInvTwoPiCubed = 1.0 / std::pow(2.0 * kPi, 3);

double sq(const Vec3& x) { return x[0] * x[0] + x[1] * x[1] + x[2] * x[2]; }

double fluid_sq(const InitialProfile& p) { return p.rho0 * p.rho0 + sq(p.u0) + p.theta0 * p.theta0; }

bool is_radial_velocity(const HermiteCoeffs& h) {
  if (h.order() < 2) return norm_sq(h) == std::norm(h(0, 0, 0));
  const HermiteCoeffs rest = h - project_P0(h) - project_P2(h);
  return norm_sq(rest) <= 1e-24 * std::max(1.0, norm_sq(h));
}

ModeState profile_state(const InitialProfile& p, int order, double ghat) {
  ModeState s(order);
  s.f = p.velocity.resized(order);
  s.f *= ghat;
  s.rho = ghat * p.rho0;
  for (int i = 0; i < 3; ++i) s.u[i] = ghat * p.u0[i];
  s.theta = ghat * p.theta0;
  return s;
}

// phi_k(z) for k = 1, 2, 3
std::array<cplx, 3> phi_functions(cplx z) {
  std::array<cplx, 3> out;
  if (std::abs(z) < 0.5) {
    for (int k = 1; k <= 3; ++k) {
      cplx term = 1.0, sum = 0.0;
      double fact = 1.0;
      for (int j = 1; j <= k; ++j) fact *= j;
      term = 1.0 / fact;
      for (int j = 0; j < 30; ++j) {
        sum += term;
        term *= z / double(j + k + 1);
      }
      out[k - 1] = sum;
    }
    return out;
  }
  const cplx e = std::exp(z);
  out[0] = (e - 1.0) / z;
  out[1] = (e - 1.0 - z) / (z * z);
  out[2] = (e - 1.0 - z - 0.5 * z * z) / (z * z * z);
  return out;
}

} // namespace

InitialProfile default_profile(int order, double amplitude) {
  InitialProfile p;
  p.sigma = 1.0;
  p.amplitude = amplitude;
  p.velocity = chi(0, order) + chi(4, order);
  p.rho0 = 1.0;
  p.u0 = {1.0, 0.0, 0.0};
  p.theta0 = 1.0;
  return p;
}

double gaussian_hat(const InitialProfile& p, double xi_sq) {
  return p.amplitude * std::pow(2.0 * kPi * p.sigma * p.sigma, 1.5) * std::exp(-0.5 * p.sigma * p.sigma * xi_sq);
}

double closed_form_norm_sq(const InitialProfile& p, int m) {
  const double fields = norm_sq(p.velocity) + fluid_sq(p);
  const double s = p.sigma;
  // (2 pi)^-3 (2 pi s^2)^3 int |xi|^{2m} exp(-s^2 |xi|^2) dxi
  const double radial = 2.0 * kPi * boost::math::tgamma(m + 1.5) / std::pow(s, 2 * m + 3);
  return fields * p.amplitude * p.amplitude * std::pow(s, 6) * radial;
}

double zq_norm(const InitialProfile& p, int q) {
  if (q < 1 || q > 2) throw std::invalid_argument("zq_norm: q must be 1 or 2");
  if (!(p.sigma > 0.0)) throw std::invalid_argument("zq_norm: Gaussian profile required");
  const double two_pi_s2 = 2.0 * kPi * p.sigma * p.sigma;
  const double lq = std::abs(p.amplitude) * std::pow(two_pi_s2 / q, 1.5 / q);
  const double l1 = std::abs(p.amplitude) * std::pow(two_pi_s2, 1.5);
  return std::sqrt(norm_sq(p.velocity)) * lq + std::sqrt(fluid_sq(p)) * l1;
}

XiGrid radial_grid(int nodes, double kmin, double kmax) {
  if (nodes < 3 || !(kmin > 0.0) || !(kmax > kmin)) throw std::invalid_argument("radial_grid: bad parameters");
  XiGrid g;
  g.kind = XiGrid::Kind::radial;
  g.cutoff = kmax;
  g.nodes = log_spaced(kmin, kmax, nodes);
  const double h = std::log(kmax / kmin) / (nodes - 1);
  g.weights.resize(nodes);
  for (int i = 0; i < nodes; ++i) {
    const double s = g.nodes[i];
    const double trap = (i == 0 || i == nodes - 1) ? 0.5 : 1.0;
    g.weights[i] = trap * h * 4.0 * kPi * s * s * s;
  }
  return g;
}

XiGrid tensor_grid(int per_axis, double cutoff) {
  if (per_axis < 2 || !(cutoff > 0.0)) throw std::invalid_argument("tensor_grid: bad parameters");
  XiGrid g;
  g.kind = XiGrid::Kind::tensor;
  g.cutoff = cutoff;
  const double h = 2.0 * cutoff / per_axis;
  for (int i = 0; i < per_axis; ++i) {
    g.nodes.push_back(-cutoff + (i + 0.5) * h);
    g.weights.push_back(h);
  }
  return g;
}

XiGrid refined(const XiGrid& g) {
  if (g.kind == XiGrid::Kind::radial) {
    const double kmin = g.nodes.front();
    const double h = std::log(g.nodes.back() / kmin) / (g.nodes.size() - 1);
    const int n = int(std::ceil(std::log(2.0 * g.cutoff / kmin) / (0.5 * h) - 1e-9)) + 1;
    return radial_grid(n, kmin, kmin * std::exp(0.5 * h * (n - 1)));
  }
  return tensor_grid(int(g.nodes.size()) * 4, 2.0 * g.cutoff);
}

WholeSpaceEvolver::WholeSpaceEvolver(const InitialProfile& profile, const XiGrid& grid, int order, int threads)
    : order_(order), threads_(threads) {
  if (order < 4) throw std::invalid_argument("WholeSpaceEvolver: order must be at least 4");
  struct Pending {
    Vec3 xi;
    std::vector<ModeState> states;
    std::vector<double> weights;
  };
  std::vector<Pending> pending;

  auto add_state = [](Pending& p, const ModeState& s, double w) {
    const Eigen::VectorXcd x = pack(s);
    for (std::size_t k = 0; k < p.states.size(); ++k)
      if ((pack(p.states[k]) - x).norm() <= 1e-14 * std::max(1.0, x.norm())) {
        p.weights[k] += w;
        return;
      }
    p.states.push_back(s);
    p.weights.push_back(w);
  };

  if (grid.kind == XiGrid::Kind::radial) {
    if (!is_radial_velocity(profile.velocity))
      throw std::invalid_argument("radial grid requires a rotation-invariant velocity profile; use a tensor grid");
    // rotate each frequency onto the first axis and average the fluid
    // velocity direction over the sphere: the cross terms vanish and each
    // component contributes |u0|^2 / 3
    InitialProfile iso = profile;
    iso.u0 = {0.0, 0.0, 0.0};
    const double u2 = sq(profile.u0);
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
      const double s = grid.nodes[i];
      const double gh = gaussian_hat(profile, s * s);
      Pending p{{s, 0.0, 0.0}, {}, {}};
      if (norm_sq(iso.velocity) + fluid_sq(iso) > 0.0) add_state(p, profile_state(iso, order, gh), grid.weights[i]);
      if (u2 > 0.0)
        for (int j = 0; j < 3; ++j) {
          ModeState us(order);
          us.u[j] = gh;
          add_state(p, us, grid.weights[i] * u2 / 3.0);
        }
      pending.push_back(std::move(p));
    }
  } else {
    // group the tensor nodes by their sorted absolute frequency
    std::map<std::array<long long, 3>, std::size_t> index;
    const auto& x = grid.nodes;
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < x.size(); ++j)
        for (std::size_t k = 0; k < x.size(); ++k) {
          const Vec3 xi{x[i], x[j], x[k]};
          const double w = grid.weights[i] * grid.weights[j] * grid.weights[k];
          const double gh = gaussian_hat(profile, sq(xi));
          if (gh == 0.0) continue;
          SignedPerm r;
          const Vec3 c = canonical(xi, r);
          const std::array<long long, 3> key{std::llround(c[0] * 1e9), std::llround(c[1] * 1e9),
                                             std::llround(c[2] * 1e9)};
          auto it = index.find(key);
          if (it == index.end()) {
            it = index.emplace(key, pending.size()).first;
            pending.push_back(Pending{c, {}, {}});
          }
          add_state(pending[it->second], pull_back(profile_state(profile, order, gh), r), w);
        }
  }

  nodes_.resize(pending.size());
  parallel_for(pending.size(), threads_, [&](std::size_t i) {
    Node& n = nodes_[i];
    n.xi_sq = sq(pending[i].xi);
    n.w = pending[i].weights;
    if (pending[i].states.empty()) return;
    n.prop = std::make_shared<const ModePropagator>(pending[i].xi, order_);
    for (const auto& s : pending[i].states) {
      n.x.push_back(pack(s));
      if (n.prop->diagonalized()) n.z.push_back(n.prop->to_eigenbasis(n.x.back()));
    }
  });
}

double WholeSpaceEvolver::norm(double t, int m) const { return norms({t}, m).front(); }

std::vector<double> WholeSpaceEvolver::norms(const std::vector<double>& times, int m) const {
  if (m < 0) throw std::invalid_argument("norms: derivative order must be nonnegative");
  for (double t : times)
    if (t < 0.0) throw std::invalid_argument("norms: negative time");
  std::vector<std::vector<double>> per_node(nodes_.size(), std::vector<double>(times.size(), 0.0));
  parallel_for(nodes_.size(), threads_, [&](std::size_t i) {
    const Node& n = nodes_[i];
    if (!n.prop) return;
    const double wm = std::pow(n.xi_sq, m);
    for (std::size_t k = 0; k < times.size(); ++k) {
      double acc = 0.0;
      for (std::size_t v = 0; v < n.x.size(); ++v) {
        Eigen::VectorXcd y;
        if (n.prop->diagonalized()) {
          Eigen::VectorXcd z = n.z[v];
          const auto& lam = n.prop->eigenvalues();
          for (Eigen::Index e = 0; e < z.size(); ++e) z(e) *= std::exp(lam(e) * times[k]);
          y = n.prop->from_eigenbasis(z);
        } else {
          y = n.prop->apply(times[k], n.x[v]);
        }
        acc += n.w[v] * y.squaredNorm();
      }
      per_node[i][k] = wm * acc;
    }
  });
  std::vector<double> out(times.size(), 0.0);
  for (const auto& row : per_node)
    for (std::size_t k = 0; k < times.size(); ++k) out[k] += row[k];
  for (auto& v : out) v = std::sqrt(kInvTwoPiCubed * v);
  return out;
}

double l2_norm_at(double t, const InitialProfile& profile, const XiGrid& grid, int order, int m, int threads) {
  return WholeSpaceEvolver(profile, grid, order, threads).norm(t, m);
}

void check_resolution(double t, const InitialProfile& profile, const XiGrid& grid, int order, int m, double tol,
                      int threads) {
  const double a = l2_norm_at(t, profile, grid, order, m, threads);
  const double b = l2_norm_at(t, profile, refined(grid), order, m, threads);
  if (std::abs(a - b) > tol * std::max(std::abs(a), std::abs(b)))
    throw std::runtime_error("xi grid under-resolved: refinement changes the norm by " +
                             std::to_string(std::abs(a - b) / std::max(std::abs(a), std::abs(b))));
}

double sigma_qm(int q, int m) { return 1.5 * (1.0 / q - 0.5) + 0.5 * m; }

SigmaVerdict verify_sigma(int q, int m, const DecayFit& fit, double tolerance, double max_residual) {
  SigmaVerdict v;
  v.target = sigma_qm(q, m);
  v.margin = tolerance - std::abs(fit.exponent + v.target);
  v.pass = v.margin >= 0.0 && fit.residual <= max_residual;
  return v;
}

double convolution_integral(double beta1, double beta2, double t) {
  if (t <= 0.0) return 0.0;
  using boost::math::quadrature::gauss_kronrod;
  // s = e^y - 1 on [0, t/2] and t - s = e^y - 1 on [t/2, t]
  const double ymax = std::log1p(0.5 * t);
  auto first = [&](double y) {
    const double s = std::expm1(y);
    return std::pow(1.0 + t - s, -beta1) * std::pow(1.0 + s, 1.0 - beta2);
  };
  auto second = [&](double y) {
    const double r = std::expm1(y);
    return std::pow(1.0 + r, 1.0 - beta1) * std::pow(1.0 + t - r, -beta2);
  };
  const double a = gauss_kronrod<double, 61>::integrate(first, 0.0, ymax, 8, 1e-12);
  const double b = gauss_kronrod<double, 61>::integrate(second, 0.0, ymax, 8, 1e-12);
  return a + b;
}

ConvolutionCheck convolution_bound_check(double beta1, double beta2, double T) {
  if (!(beta2 > 1.0)) throw std::invalid_argument("convolution_bound_check: beta2 must exceed 1");
  if (beta1 == 1.0) throw std::invalid_argument("convolution_bound_check: beta1 must differ from 1");
  if (!(T > 0.0)) throw std::invalid_argument("convolution_bound_check: T must be positive");
  const double mn = std::min(beta1, beta2);
  auto ratio = [&](double t) { return convolution_integral(beta1, beta2, t) * std::pow(1.0 + t, mn); };
  const auto ts = log_spaced(std::min(1e-3, 0.5 * T), T, 400);
  std::size_t best = 0;
  std::vector<double> vals(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    vals[i] = ratio(ts[i]);
    if (vals[i] > vals[best]) best = i;
  }
  ConvolutionCheck c{vals[best], ts[best]};
  if (best > 0 && best + 1 < ts.size()) {
    const auto r = boost::math::tools::brent_find_minima([&](double t) { return -ratio(t); }, ts[best - 1],
                                                         ts[best + 1], 40);
    if (-r.second > c.sup) c = {-r.second, r.first};
  }
  return c;
}

SourceFamily default_source(int order, double decay) {
  SourceFamily s;
  s.decay = decay;
  for (int i = 0; i < 3; ++i) s.g[i] = mult_v(i, chi(4, std::min(order, 2))).resized(order);
  HermiteCoeffs r2(order);
  for (int j = 0; j < 3; ++j) r2 += mult_v(j, mult_v(j, chi(4, 2))).resized(order);
  // isotropic micro profiles of degree <= 4 form a line; the sign keeps phi
  // from cancelling the divergence part
  s.phi = micro(r2);
  s.phi *= -1.0;
  return s;
}

DuhamelReport duhamel_decay_check(const SourceFamily& source, int q, int m, const XiGrid& grid, int order,
                                  const std::vector<double>& times, int threads) {
  if (grid.kind != XiGrid::Kind::radial) throw std::invalid_argument("duhamel_decay_check: radial grid required");
  if (!std::is_sorted(times.begin(), times.end()) || times.empty() || times.front() < 0.0)
    throw std::invalid_argument("duhamel_decay_check: times must be sorted and nonnegative");
  const HermiteCoeffs sf = make_source(source.g, source.phi, order);
  {
    // the radial reduction needs a source invariant under axis permutations and reflections
    SignedPerm r{{1, 2, 0}, {-1.0, 1.0, 1.0}};
    ModeState a(order);
    a.f = sf;
    if (norm_sq(pull_back(a, r).f - sf) > 1e-24 * std::max(1.0, norm_sq(sf)))
      throw std::invalid_argument("duhamel_decay_check: source velocity profile must be isotropic");
  }

  // velocity norms of (G, nu^{-1/2} phi) after projection
  double vel_sq = 0.0;
  for (int i = 0; i < 3; ++i) {
    HermiteCoeffs g = source.g[i];
    g = g - project_P0(g) - project_P1(g);
    vel_sq += norm_sq(g);
  }
  {
    const HermiteCoeffs phi = micro(source.phi);
    const auto rule = gauss_hermite_rule(40);
    const auto vals = evaluate_on_tensor_grid(phi, rule.nodes);
    const std::size_t n = rule.nodes.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
          const double v2 = rule.nodes[i] * rule.nodes[i] + rule.nodes[j] * rule.nodes[j] + rule.nodes[k] * rule.nodes[k];
          s += rule.weights[i] * rule.weights[j] * rule.weights[k] * std::norm(vals[(i * n + j) * n + k]) / (1.0 + v2);
        }
    vel_sq += s;
  }
  InitialProfile spatial;
  spatial.sigma = source.sigma;
  spatial.amplitude = source.amplitude;
  spatial.velocity = chi(0, 0);
  const double lq_sq = std::pow(zq_norm(spatial, q), 2);
  const double grad_sq = closed_form_norm_sq(spatial, m);
  const double kernel_coeff = vel_sq * (lq_sq + grad_sq);
  const double two_sigma = 2.0 * sigma_qm(q, m);

  // LHS per node: y(t) = sum_e V_e J(lambda_e, t) z_e with J' = lambda J + (1+t)^{-decay}
  // panels graded with the source time scale (1 + t)
  const double h_rel = 0.02;
  std::vector<std::vector<double>> lhs_node(grid.nodes.size(), std::vector<double>(times.size(), 0.0));
  parallel_for(grid.nodes.size(), threads, [&](std::size_t i) {
    const double s = grid.nodes[i];
    InitialProfile sp = spatial;
    const double gh = gaussian_hat(sp, s * s);
    if (gh * gh < 1e-40) return;
    const ModePropagator prop({s, 0.0, 0.0}, order);
    if (!prop.diagonalized()) throw std::runtime_error("duhamel_decay_check: mode not diagonalizable");
    ModeState src(order);
    src.f = sf;
    const Eigen::VectorXcd z = prop.to_eigenbasis(pack(src));
    const auto& lam = prop.eigenvalues();
    Eigen::VectorXcd J = Eigen::VectorXcd::Zero(lam.size());
    double t = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      while (t < times[k] - 1e-14) {
        const double h = std::min(h_rel * (1.0 + t), times[k] - t);
        const double q0 = std::pow(1.0 + t, -source.decay);
        const double qh = std::pow(1.0 + t + 0.5 * h, -source.decay);
        const double q1 = std::pow(1.0 + t + h, -source.decay);
        const double c1 = -3.0 * q0 + 4.0 * qh - q1, c2 = 2.0 * q0 - 4.0 * qh + 2.0 * q1;
        for (Eigen::Index e = 0; e < lam.size(); ++e) {
          const cplx zz = lam(e) * h;
          const auto ph = phi_functions(zz);
          J(e) = std::exp(zz) * J(e) + h * (q0 * ph[0] + c1 * ph[1] + 2.0 * c2 * ph[2]);
        }
        t += h;
      }
      const Eigen::VectorXcd y = prop.from_eigenbasis(J.cwiseProduct(z));
      lhs_node[i][k] = grid.weights[i] * std::pow(s * s, m) * gh * gh * y.squaredNorm();
    }
  });

  DuhamelReport rep;
  for (std::size_t k = 0; k < times.size(); ++k) {
    DuhamelSample d;
    d.t = times[k];
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) d.lhs += lhs_node[i][k];
    d.lhs *= kInvTwoPiCubed;
    d.rhs = kernel_coeff * convolution_integral(two_sigma, 2.0 * source.decay, d.t);
    if (d.rhs > 0.0) rep.max_ratio = std::max(rep.max_ratio, d.lhs / d.rhs);
    rep.samples.push_back(d);
  }
  return rep;
}

} // namespace nsvfp
