#include "nsvfp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "nsvfp/coercivity.hpp"
#include "nsvfp/fitting.hpp"
#include "nsvfp/linear_mode.hpp"
#include "nsvfp/nonlinear.hpp"
#include "nsvfp/torus.hpp"
#include "nsvfp/whole_space.hpp"

namespace nsvfp {

namespace {

constexpr double kBig = 1e18;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<ConfigKey> common_keys(Campaign c) {
  const std::string budget = c == Campaign::nonlinear ? "900" : c == Campaign::whole_space ? "600" : "0";
  return {
      {"campaign", "", 0, 0, false, "one of coercivity, mode-decay, whole-space, torus-linear, nonlinear"},
      {"seed", "1", 0, kBig, true, "random seed"},
      {"threads", "1", 0, 256, true, "worker threads (0: hardware concurrency)"},
      {"out", "", 0, 0, false, "output directory (default: $NSVFP_OUT or ./nsvfp-out)"},
      {"budget_seconds", budget, 0, 1e7, false, "wall-clock budget, 0 disables"},
  };
}

std::vector<ConfigKey> campaign_keys(Campaign c) {
  switch (c) {
  case Campaign::coercivity:
    return {{"N", "8", 1, 16, true, "Hermite order per axis"},
            {"samples", "10000", 1, 1e7, true, "random coefficient samples"},
            {"refine_N", "12", 0, 16, true, "second order for the refinement ratio, 0 disables"}};
  case Campaign::mode_decay:
    return {{"N", "4", 3, 10, true, "Hermite order per axis"},
            {"samples", "50", 1, 1000, true, "sampled frequencies"},
            {"xi_min", "0.1", 1e-6, 1e3, false, "smallest |xi|"},
            {"xi_max", "10", 1e-6, 1e3, false, "largest |xi|"},
            {"kappa1", "0.5", 1e-12, 10, false, "interactive functional weight"},
            {"kappa2", "0.5", 1e-12, 10, false, "fluid gradient weight"},
            {"kappa3", "0.1", 1e-12, 10, false, "coupling weight (auto-halved)"},
            {"horizon", "5", 0.1, 1e3, false, "evolution horizon in units of the decay time"}};
  case Campaign::whole_space:
    return {{"N", "4", 3, 10, true, "Hermite order per axis"},
            {"nodes", "120", 8, 4000, true, "radial frequency nodes"},
            {"kmin", "1e-3", 1e-8, 1, false, "smallest |xi| node"},
            {"cutoff", "20", 1, 200, false, "largest |xi| node"},
            {"t_min", "20", 0, 1e6, false, "fit window start"},
            {"t_max", "200", 0, 1e6, false, "fit window end"},
            {"samples", "40", 3, 10000, true, "sample times in the window"},
            {"q", "1", 1, 2, true, "Z_q exponent of the data"},
            {"tol_m0", "0.08", 0, 10, false, "exponent tolerance, m = 0"},
            {"tol_m1", "0.12", 0, 10, false, "exponent tolerance, m = 1"},
            {"amplitude", "1e-2", 1e-12, 1e3, false, "data amplitude"},
            {"sigma", "1", 1e-3, 1e3, false, "Gaussian width"},
            {"refine", "1", 0, 1, true, "also run on the refined grid"},
            {"convolution", "1", 0, 1, true, "include the convolution bound stability check"}};
  case Campaign::torus_linear:
    return {{"N", "6", 3, 10, true, "Hermite order per axis"},
            {"kmax", "3", 0, 8, true, "largest |k_i|"},
            {"T", "40", 1e-3, 1e5, false, "final time"},
            {"samples", "81", 3, 100000, true, "sample times on [0, T]"},
            {"fit_from", "20", 0, 1e5, false, "fit window start"},
            {"amplitude", "1", 1e-12, 1e6, false, "data amplitude"},
            {"tolerance", "0.05", 0, 10, false, "relative rate tolerance"}};
  case Campaign::nonlinear:
    return {{"n", "8", 4, 64, true, "grid points per axis"},
            {"N", "4", 3, 10, true, "Hermite order per axis"},
            {"dt", "1e-3", 1e-8, 1, false, "time step"},
            {"T", "5", 0, 1e4, false, "final time"},
            {"amplitude", "1e-3", 1e-12, 1, false, "data amplitude"},
            {"rho_floor", "0.05", 1e-6, 0.99, false, "lower bound on 1 + rho"},
            {"viscous_heating", "1", 0, 1, true, "temperature equation carries the viscous heating term"},
            {"record_every", "10", 1, 1e9, true, "steps between recorded diagnostics"},
            {"slack", "1e-10", 0, 1, false, "allowed relative per-step increase of E"},
            {"tau1", "0.05", 1e-12, 10, false, "functional weight"},
            {"tau2", "0.05", 1e-12, 10, false, "functional weight"},
            {"tau3", "0.1", 1e-12, 10, false, "functional weight"},
            {"tau4", "0.05", 1e-12, 10, false, "functional weight"},
            {"tau5", "0.05", 1e-12, 10, false, "functional weight"},
            {"tau6", "0.05", 1e-12, 10, false, "functional weight"},
            {"c1", "1", 1e-12, 1e6, false, "velocity-derivative weight, order 1"},
            {"c2", "1", 1e-12, 1e6, false, "velocity-derivative weight, order 2"},
            {"c3", "1", 1e-12, 1e6, false, "velocity-derivative weight, order 3"},
            {"c4", "1", 1e-12, 1e6, false, "velocity-derivative weight, order 4"}};
  }
  return {};
}

const ConfigKey* find_key(const std::vector<ConfigKey>& keys, const std::string& name) {
  for (const auto& k : keys)
    if (k.name == name) return &k;
  return nullptr;
}

void validate_value(const ConfigKey& k, const std::string& value) {
  if (k.name == "campaign" || k.name == "out") {
    if (value.empty()) throw ConfigError(k.name, "key '" + k.name + "' has an empty value");
    return;
  }
  double v = 0.0;
  std::size_t used = 0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || value.empty() || !std::isfinite(v))
    throw ConfigError(k.name, "key '" + k.name + "' expects a number, got '" + value + "'");
  if (k.integer && v != std::floor(v)) throw ConfigError(k.name, "key '" + k.name + "' expects an integer");
  if (v < k.lo || v > k.hi)
    throw ConfigError(k.name, "key '" + k.name + "' = " + value + " outside [" + short_num(k.lo) + ", " +
                                  short_num(k.hi) + "]");
}

void check_consistency(const ExperimentConfig& c) {
  switch (c.campaign) {
  case Campaign::mode_decay:
    if (c.number("xi_min") >= c.number("xi_max")) throw ConfigError("xi_max", "xi_max must exceed xi_min");
    break;
  case Campaign::whole_space:
    if (c.number("t_min") >= c.number("t_max")) throw ConfigError("t_max", "t_max must exceed t_min");
    if (c.number("kmin") >= c.number("cutoff")) throw ConfigError("cutoff", "cutoff must exceed kmin");
    break;
  case Campaign::torus_linear:
    if (c.number("fit_from") >= c.number("T")) throw ConfigError("fit_from", "fit_from must be below T");
    break;
  default:
    break;
  }
}

// fit line of a power law y = C (1+t)^e or an exponential y = C exp(-r t)
double log_intercept(const std::vector<double>& x, const std::vector<double>& y, double slope) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::log(y[i]) - slope * x[i];
  return s / double(x.size());
}

class Clock {
public:
  explicit Clock(double budget) : budget_(budget), start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  void check() const {
    if (budget_ > 0 && seconds() > budget_)
      throw BudgetExceeded("wall-clock budget of " + short_num(budget_) + " s exceeded");
  }
  double budget() const { return budget_; }

private:
  double budget_;
  std::chrono::steady_clock::time_point start_;
};

void note(const ProgressFn& p, const std::string& msg) {
  if (p) p(msg);
}

// ------------------------------------------------------------------ campaigns

void run_coercivity(const ExperimentConfig& cfg, CampaignResult& r, const Clock& clock, const ProgressFn& progress) {
  const int N = cfg.integer("N"), samples = cfg.integer("samples"), refine = cfg.integer("refine_N");
  note(progress, "sampling order " + std::to_string(N));
  const auto a = coercivity_estimate(N, samples, cfg.seed(), cfg.threads());
  clock.check();
  Series s{"coercivity", {"order", "samples", "lambda_hat", "lambda_hat_mass_only"}, {}};
  s.rows.push_back({double(N), double(samples), a.lambda_hat, a.lambda_hat_mass_only});
  r.verdicts.push_back({"lambda_hat > 0", "lambda", 0.0, a.lambda_hat, 0.0, Verdict::Kind::above});
  r.resolution["N"] = N;
  if (refine > 0) {
    note(progress, "sampling order " + std::to_string(refine));
    const auto b = coercivity_estimate(refine, samples, cfg.seed(), cfg.threads());
    clock.check();
    s.rows.push_back({double(refine), double(samples), b.lambda_hat, b.lambda_hat_mass_only});
    // the band [0.8, 1.25] written as centre and half-width
    r.verdicts.push_back({"lambda_hat(N=" + std::to_string(refine) + ")/lambda_hat(N=" + std::to_string(N) + ")",
                          "lambda", 1.025, b.lambda_hat / a.lambda_hat, 0.225, Verdict::Kind::within});
    r.resolution["refine_N"] = refine;
  }
  r.series.push_back(std::move(s));
}

void run_mode_decay(const ExperimentConfig& cfg, CampaignResult& r, const Clock& clock, const ProgressFn& progress) {
  const int N = cfg.integer("N"), samples = cfg.integer("samples");
  const std::vector<double> radii = log_spaced(cfg.number("xi_min"), cfg.number("xi_max"), samples);
  std::mt19937_64 rng(cfg.seed());
  std::normal_distribution<double> g;
  std::vector<Vec3> xis;
  for (double rad : radii) {
    Vec3 d{g(rng), g(rng), g(rng)};
    const double n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    xis.push_back({rad * d[0] / n, rad * d[1] / n, rad * d[2] / n});
  }
  EnergyWeights w0;
  w0.kappa1 = cfg.number("kappa1");
  w0.kappa2 = cfg.number("kappa2");
  w0.kappa3 = cfg.number("kappa3");
  note(progress, "tuning functional weights on " + std::to_string(samples) + " frequencies");
  const auto tune = tune_energy_weights(N, xis, w0);
  clock.check();
  const double c = tune.constant;
  r.verdicts.push_back({"decay constant c > 0", "lambda_F", 0.0, c, 0.0, Verdict::Kind::above});
  r.verdicts.push_back({"E_F / plain lower band", "E_F", 0.5, tune.band_low, 0.0, Verdict::Kind::above});
  r.verdicts.push_back({"E_F / plain upper band", "E_F", 2.0, tune.band_high, 0.0, Verdict::Kind::below});

  // trajectories: E_F(t) against the envelope exp(-c w t), w = |xi|^2/(1+|xi|^2)
  Series s{"mode_decay", {"xi_norm", "t", "scaled_time", "EF_ratio", "envelope"}, {}};
  Plot p;
  p.name = "mode_decay";
  p.title = "Per-mode energy decay";
  p.xlabel = "c |xi|^2/(1+|xi|^2) t";
  p.ylabel = "E_F(t) / E_F(0)";
  p.scatter = true;
  double worst = -std::numeric_limits<double>::infinity();
  const double horizon = cfg.number("horizon");
  for (std::size_t i = 0; i < xis.size(); ++i) {
    const Vec3& xi = xis[i];
    const double k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
    const double wgt = k2 / (1 + k2);
    ModeState s0(N);
    for (auto& v : s0.f.data()) v = cplx(g(rng), g(rng));
    s0.rho = cplx(g(rng), g(rng));
    s0.theta = cplx(g(rng), g(rng));
    for (auto& u : s0.u) u = cplx(g(rng), g(rng));
    const ModePropagator prop(xi, N);
    const Eigen::VectorXcd x0 = pack(s0);
    const double e0 = energy_EF(xi, s0, tune.weights).ef;
    for (double t : lin_spaced(0.0, horizon / (c * wgt), 11)) {
      const double e = energy_EF(xi, unpack(prop.apply(t, x0), N), tune.weights).ef;
      const double x = c * wgt * t;
      worst = std::max(worst, std::log(e / e0) + x);
      s.rows.push_back({std::sqrt(k2), t, x, e / e0, std::exp(-x)});
      p.x.push_back(x);
      p.y.push_back(e / e0);
    }
    clock.check();
  }
  r.verdicts.push_back(
      {"E_F(t) <= E_F(0) exp(-c w t)", "lambda_F", 1e-8, worst, 0.0, Verdict::Kind::below});
  p.fit_x = lin_spaced(0.0, horizon, 50);
  for (double x : p.fit_x) p.fit_y.push_back(std::exp(-x));
  p.annotation = "c = " + short_num(c);
  r.series.push_back(std::move(s));
  r.plots.push_back(std::move(p));
  r.resolution["N"] = N;
  r.resolution["frequencies"] = samples;
}

void run_whole_space(const ExperimentConfig& cfg, CampaignResult& r, const Clock& clock, const ProgressFn& progress) {
  const int N = cfg.integer("N"), q = cfg.integer("q");
  InitialProfile prof = default_profile(N, cfg.number("amplitude"));
  prof.sigma = cfg.number("sigma");
  const XiGrid grid = radial_grid(cfg.integer("nodes"), cfg.number("kmin"), cfg.number("cutoff"));
  note(progress, "building " + std::to_string(grid.nodes.size()) + " mode propagators");
  const WholeSpaceEvolver ev(prof, grid, N, cfg.threads());
  clock.check();
  const std::vector<double> times = log_spaced(cfg.number("t_min"), cfg.number("t_max"), cfg.integer("samples"));
  Series s{"whole_space", {"t", "norm_m0", "norm_m1"}, {}};
  std::array<std::vector<double>, 2> norms;
  for (int m = 0; m < 2; ++m) norms[m] = ev.norms(times, m);
  for (std::size_t i = 0; i < times.size(); ++i) s.rows.push_back({times[i], norms[0][i], norms[1][i]});
  for (int m = 0; m < 2; ++m) {
    const DecayFit fit = fit_power_law(times, norms[m]);
    const std::string sym = "sigma_{" + std::to_string(q) + "," + std::to_string(m) + "}";
    r.verdicts.push_back({"sigma(" + std::to_string(q) + "," + std::to_string(m) + ")", sym, sigma_qm(q, m),
                          -fit.exponent, cfg.number(m == 0 ? "tol_m0" : "tol_m1"), Verdict::Kind::within});
    Plot p;
    p.name = "whole_space_m" + std::to_string(m);
    p.title = "Whole-space decay, m = " + std::to_string(m);
    p.xlabel = "1 + t";
    p.ylabel = m == 0 ? "||U(t)||" : "||grad U(t)||";
    p.log_x = true;
    std::vector<double> lx;
    for (double t : times) {
      p.x.push_back(1 + t);
      lx.push_back(std::log1p(t));
    }
    p.y = norms[m];
    const double c0 = log_intercept(lx, norms[m], fit.exponent);
    p.fit_x = p.x;
    for (double x : lx) p.fit_y.push_back(std::exp(c0 + fit.exponent * x));
    p.annotation = "exponent = " + short_num(fit.exponent);
    r.plots.push_back(std::move(p));
  }
  r.resolution["N"] = N;
  r.resolution["nodes"] = double(grid.nodes.size());
  r.resolution["cutoff"] = grid.cutoff;
  if (cfg.integer("refine")) {
    const XiGrid fine = refined(grid);
    note(progress, "refined grid with " + std::to_string(fine.nodes.size()) + " nodes");
    const WholeSpaceEvolver evf(prof, fine, N, cfg.threads());
    clock.check();
    double change = 0;
    for (int m = 0; m < 2; ++m) {
      const double a = norms[m].back(), b = evf.norm(times.back(), m);
      change = std::max(change, std::abs(b - a) / a);
    }
    r.verdicts.push_back({"grid refinement change", "sigma_{q,m}", 0.01, change, 0.0, Verdict::Kind::below});
    r.resolution["refined_nodes"] = double(fine.nodes.size());
  }
  if (cfg.integer("convolution")) {
    Series cs{"convolution", {"beta1", "beta2", "sup_T1e3", "sup_T1e4", "relative_change"}, {}};
    for (const auto& b : std::vector<std::array<double, 2>>{{0.75, 1.5}, {1.25, 1.5}, {1.5, 1.5}}) {
      const double s3 = convolution_bound_check(b[0], b[1], 1e3).sup;
      const double s4 = convolution_bound_check(b[0], b[1], 1e4).sup;
      const double rel = std::abs(s4 - s3) / s3;
      cs.rows.push_back({b[0], b[1], s3, s4, rel});
      r.verdicts.push_back({"convolution bound (" + short_num(b[0]) + ", " + short_num(b[1]) + ")",
                            "beta_1,beta_2", 0.01, rel, 0.0, Verdict::Kind::below});
    }
    r.series.push_back(std::move(cs));
  }
  r.series.insert(r.series.begin(), std::move(s));
}

void run_torus_linear(const ExperimentConfig& cfg, CampaignResult& r, const Clock& clock, const ProgressFn& progress) {
  const int N = cfg.integer("N"), kmax = cfg.integer("kmax");
  const TorusSpectrum sp = make_spectrum(kmax);
  note(progress, "building torus propagators for " + std::to_string(sp.modes.size()) + " modes");
  const TorusEvolver ev(sp, N, cfg.threads());
  clock.check();
  const TorusData data = enforce_conservation(sp, random_torus_data(sp, N, cfg.number("amplitude"), cfg.seed()));
  const double T = cfg.number("T");
  const TorusDecay decay = torus_linear_decay(ev, data, T, cfg.integer("samples"), cfg.number("fit_from"));
  clock.check();
  note(progress, "computing the spectral gap");
  const SpectralGap gap = min_spectral_gap(sp, N, cfg.threads());
  clock.check();
  const double drift = max_drift(conserved_set(sp, data), conserved_set(sp, ev.evolve(data, T))) / total_norm(data);
  r.verdicts.push_back({"decay rate vs spectral gap", "lambda", gap.gap, decay.fit.rate,
                        cfg.number("tolerance") * gap.gap, Verdict::Kind::within});
  r.verdicts.push_back({"zero-mode conserved drift", "I_1..I_4", 1e-10, drift, 0.0, Verdict::Kind::below});
  r.verdicts.push_back({"exponential fit residual", "lambda", 0.02, decay.fit.residual, 0.0, Verdict::Kind::below});
  Series s{"torus_linear", {"t", "norm", "fluid_h3", "fluid_h4"}, {}};
  for (std::size_t i = 0; i < decay.times.size(); ++i)
    s.rows.push_back({decay.times[i], decay.norms[i], decay.h3[i], decay.h4[i]});
  Plot p;
  p.name = "torus_linear";
  p.title = "Torus linear decay";
  p.xlabel = "t";
  p.ylabel = "||U(t)||";
  p.x = decay.times;
  p.y = decay.norms;
  std::vector<double> fx, fy;
  for (std::size_t i = 0; i < decay.times.size(); ++i)
    if (decay.times[i] >= cfg.number("fit_from")) {
      fx.push_back(decay.times[i]);
      fy.push_back(decay.norms[i]);
    }
  const double c0 = log_intercept(fx, fy, -decay.fit.rate);
  p.fit_x = fx;
  for (double t : fx) p.fit_y.push_back(std::exp(c0 - decay.fit.rate * t));
  p.annotation = "rate = " + short_num(decay.fit.rate) + ", gap = " + short_num(gap.gap);
  r.series.push_back(std::move(s));
  r.plots.push_back(std::move(p));
  r.resolution["N"] = N;
  r.resolution["kmax"] = kmax;
  r.resolution["modes"] = double(sp.modes.size());
  r.resolution["propagators"] = double(ev.propagator_count());
}

void run_nonlinear(const ExperimentConfig& cfg, CampaignResult& r, const Clock& clock, const ProgressFn& progress) {
  SolverConfig sc;
  sc.grid = cfg.integer("n");
  sc.order = cfg.integer("N");
  sc.dt = cfg.number("dt");
  sc.rho_floor = cfg.number("rho_floor");
  sc.viscous_heating = cfg.integer("viscous_heating") != 0;
  sc.threads = cfg.threads();
  FunctionalConfig fc;
  fc.tau1 = cfg.number("tau1");
  fc.tau2 = cfg.number("tau2");
  fc.tau3 = cfg.number("tau3");
  fc.tau4 = cfg.number("tau4");
  fc.tau5 = cfg.number("tau5");
  fc.tau6 = cfg.number("tau6");
  fc.c = {cfg.number("c1"), cfg.number("c2"), cfg.number("c3"), cfg.number("c4")};
  const NonlinearSolver solver(sc);
  const FunctionalEvaluator ev(sc.order, fc);
  FieldState s = random_small_state(solver, cfg.number("amplitude"), cfg.seed());
  const auto c0 = conservation_integrals(solver, s);
  const double scale = std::pow(2 * M_PI, 3) * s.coefficient_norm();
  const double dt = sc.dt;
  const int steps = int(std::lround(cfg.number("T") / dt));
  const int every = cfg.integer("record_every");

  Series series{"nonlinear",
                {"t", "E", "D", "E0", "E1", "D1", "E2", "D2", "plain", "drift_I1", "drift_I2", "drift_I3",
                 "drift_I4", "min_F", "min_density", "residual_a", "residual_b", "residual_omega",
                 "residual_omega_printed", "max_imag"},
                {}};
  std::array<double, 4> worst_drift{};
  double worst_inc = -std::numeric_limits<double>::infinity();
  double worst_ratio = -std::numeric_limits<double>::infinity();
  double min_F = std::numeric_limits<double>::infinity();
  double max_imag = 0.0;
  auto parts = ev.field(solver, s);
  auto record = [&](const FieldState& prev, const FunctionalEvaluator::Parts& p, bool have_prev) {
    const auto d = conservation_drift(c0, conservation_integrals(solver, s), scale);
    for (int i = 0; i < 4; ++i) worst_drift[i] = std::max(worst_drift[i], d[i]);
    const auto pos = positivity_probe(solver, s);
    min_F = std::min(min_F, pos.min_F);
    MomentResiduals mr;
    if (have_prev) mr = moment_residuals(solver, prev, s, dt);
    const double im = solver.max_imaginary(s);
    max_imag = std::max(max_imag, im);
    series.rows.push_back({s.time, p.E, p.D, p.E0, p.E1, p.D1, p.E2, p.D2, p.plain, d[0], d[1], d[2], d[3],
                           pos.min_F, pos.min_density, mr.derived[0], mr.derived[1], mr.derived[2],
                           mr.omega_printed, im});
  };
  record(s, parts, false);
  note(progress, std::to_string(steps) + " steps");
  for (int i = 1; i <= steps; ++i) {
    const FieldState prev = s;
    solver.step_rk4(s, dt);
    const auto next = ev.field(solver, s);
    worst_inc = std::max(worst_inc, (next.E - parts.E) / parts.E);
    worst_ratio = std::max(worst_ratio, (next.E - parts.E) / (dt * parts.D));
    parts = next;
    if (i % every == 0 || i == steps) record(prev, parts, true);
    clock.check();
    if (i % std::max(1, steps / 10) == 0) note(progress, "t = " + short_num(s.time));
  }
  for (int i = 0; i < 4; ++i)
    r.verdicts.push_back({"conservation drift I_" + std::to_string(i + 1), "I_" + std::to_string(i + 1), 1e-8,
                          worst_drift[i], 0.0, Verdict::Kind::below});
  const double slack = cfg.number("slack");
  r.verdicts.push_back({"E non-increasing (relative step change)", "E", slack, worst_inc, 0.0, Verdict::Kind::below});
  r.verdicts.push_back({"dE/dt <= -lambda D", "lambda", 0.0, worst_ratio, 0.0, Verdict::Kind::below});
  r.verdicts.push_back({"min F", "F", -1e-6, min_F, 0.0, Verdict::Kind::above});
  r.verdicts.push_back({"fields real", "F", 1e-12, max_imag, 0.0, Verdict::Kind::below});

  Plot p;
  p.name = "nonlinear_energy";
  p.title = "Nonlinear energy functional";
  p.xlabel = "t";
  p.ylabel = "E(t)";
  std::vector<double> fx, fy;
  for (const auto& row : series.rows) {
    p.x.push_back(row[0]);
    p.y.push_back(row[1]);
    if (row[0] > 0) {
      fx.push_back(row[0]);
      fy.push_back(row[1]);
    }
  }
  if (fx.size() >= 2) {
    const DecayFit fit = fit_exponential(fx, fy);
    const double c = log_intercept(fx, fy, -fit.rate);
    p.fit_x = fx;
    for (double t : fx) p.fit_y.push_back(std::exp(c - fit.rate * t));
    p.annotation = "rate = " + short_num(fit.rate);
  }
  r.series.push_back(std::move(series));
  r.plots.push_back(std::move(p));
  r.resolution["n"] = sc.grid;
  r.resolution["N"] = sc.order;
  r.resolution["dt"] = dt;
  r.resolution["steps"] = steps;
  r.resolution["band"] = solver.band();
}

// ---------------------------------------------------------------------- SVG

struct Axis {
  double lo, hi;
  bool log;
  double map(double v, double a, double b) const {
    const double t = log ? (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo)) : (v - lo) / (hi - lo);
    return a + t * (b - a);
  }
};

Axis make_axis(const std::vector<double>& a, const std::vector<double>& b, bool log) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* v : {&a, &b})
    for (double x : *v) {
      if (log && !(x > 0)) continue;
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  if (!std::isfinite(lo)) lo = hi = 1.0;
  if (hi <= lo) {
    if (log) {
      lo /= 2;
      hi *= 2;
    } else {
      lo -= 0.5;
      hi += 0.5;
    }
  }
  return {lo, hi, log};
}

std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
    case '<': o += "&lt;"; break;
    case '>': o += "&gt;"; break;
    case '&': o += "&amp;"; break;
    case '"': o += "&quot;"; break;
    default: o += c;
    }
  }
  return o;
}

} // namespace

// ------------------------------------------------------------------- public

std::string campaign_name(Campaign c) {
  switch (c) {
  case Campaign::coercivity: return "coercivity";
  case Campaign::mode_decay: return "mode-decay";
  case Campaign::whole_space: return "whole-space";
  case Campaign::torus_linear: return "torus-linear";
  case Campaign::nonlinear: return "nonlinear";
  }
  return "";
}

const std::vector<Campaign>& all_campaigns() {
  static const std::vector<Campaign> all{Campaign::coercivity, Campaign::mode_decay, Campaign::whole_space,
                                         Campaign::torus_linear, Campaign::nonlinear};
  return all;
}

Campaign parse_campaign(const std::string& name) {
  for (Campaign c : all_campaigns())
    if (campaign_name(c) == name) return c;
  throw ConfigError("campaign", "unknown campaign '" + name +
                                    "'; expected one of coercivity, mode-decay, whole-space, torus-linear, nonlinear");
}

std::vector<ConfigKey> config_schema(Campaign c) {
  auto keys = common_keys(c);
  const auto more = campaign_keys(c);
  keys.insert(keys.end(), more.begin(), more.end());
  return keys;
}

std::string describe_schema(Campaign c) {
  std::ostringstream o;
  for (const auto& k : config_schema(c)) {
    o << "  " << k.name;
    if (!k.fallback.empty()) o << " = " << k.fallback;
    if (k.name != "campaign" && k.name != "out")
      o << "  [" << short_num(k.lo) << ", " << short_num(k.hi) << "]" << (k.integer ? " integer" : "");
    o << "  " << k.help << "\n";
  }
  return o.str();
}

double ExperimentConfig::number(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end()) throw ConfigError(key, "key '" + key + "' is not defined for this campaign");
  return std::stod(it->second);
}

int ExperimentConfig::integer(const std::string& key) const { return int(std::llround(number(key))); }

std::uint64_t ExperimentConfig::seed() const { return std::uint64_t(std::llround(number("seed"))); }

std::string ExperimentConfig::out() const {
  const auto it = values.find("out");
  return it == values.end() ? "" : it->second;
}

ExperimentConfig default_config(Campaign c) {
  ExperimentConfig cfg;
  cfg.campaign = c;
  for (const auto& k : config_schema(c))
    if (!k.fallback.empty()) cfg.values[k.name] = k.fallback;
  cfg.values["campaign"] = campaign_name(c);
  return cfg;
}

void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto schema = config_schema(cfg.campaign);
  const ConfigKey* k = find_key(schema, key);
  if (!k) throw ConfigError(key, "unknown key '" + key + "' for campaign " + campaign_name(cfg.campaign));
  if (key == "campaign" && parse_campaign(value) != cfg.campaign)
    throw ConfigError(key, "campaign cannot be changed by an override");
  validate_value(*k, value);
  cfg.values[key] = value;
  check_consistency(cfg);
}

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, std::string> raw;
  std::map<std::string, int> lines;
  std::istringstream in(text);
  std::string line;
  for (int no = 1; std::getline(in, line); ++no) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("", "line " + std::to_string(no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(no) + ": missing key");
    if (raw.count(key)) throw ConfigError(key, "key '" + key + "' given twice");
    raw[key] = value;
    lines[key] = no;
  }
  if (!raw.count("campaign")) {
    std::ostringstream o;
    o << "missing required key 'campaign' (one of coercivity, mode-decay, whole-space, torus-linear, nonlinear)";
    throw ConfigError("campaign", o.str());
  }
  ExperimentConfig cfg = default_config(parse_campaign(raw.at("campaign")));
  const auto schema = config_schema(cfg.campaign);
  for (const auto& [key, value] : raw) {
    const ConfigKey* k = find_key(schema, key);
    if (!k)
      throw ConfigError(key, "line " + std::to_string(lines[key]) + ": unknown key '" + key + "' for campaign " +
                                 campaign_name(cfg.campaign));
    validate_value(*k, value);
    cfg.values[key] = value;
  }
  check_consistency(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

bool Verdict::pass() const {
  if (!std::isfinite(measured)) return false;
  switch (kind) {
  case Kind::within: return std::abs(measured - target) <= tolerance;
  case Kind::above: return measured > target;
  case Kind::below: return measured < target;
  }
  return false;
}

std::string verdict_table(const std::vector<Verdict>& verdicts) {
  std::size_t w = 9;
  for (const auto& v : verdicts) w = std::max(w, v.name.size());
  std::ostringstream o;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-6s %-*s %-14s %-24s %-14s\n", "result", int(w), "criterion", "symbol", "target",
                "measured");
  o << buf;
  for (const auto& v : verdicts) {
    std::string target;
    switch (v.kind) {
    case Verdict::Kind::within: target = short_num(v.target) + " +/- " + short_num(v.tolerance); break;
    case Verdict::Kind::above: target = "> " + short_num(v.target); break;
    case Verdict::Kind::below: target = "< " + short_num(v.target); break;
    }
    std::snprintf(buf, sizeof buf, "%-6s %-*s %-14s %-24s %-14s\n", v.pass() ? "PASS" : "FAIL", int(w),
                  v.name.c_str(), v.symbol.c_str(), target.c_str(), short_num(v.measured).c_str());
    o << buf;
  }
  return o.str();
}

bool CampaignResult::all_pass() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass(); });
}

CampaignResult run_campaign(const ExperimentConfig& cfg, const ProgressFn& progress) {
  const Clock clock(cfg.number("budget_seconds"));
  CampaignResult r;
  r.campaign = cfg.campaign;
  switch (cfg.campaign) {
  case Campaign::coercivity: run_coercivity(cfg, r, clock, progress); break;
  case Campaign::mode_decay: run_mode_decay(cfg, r, clock, progress); break;
  case Campaign::whole_space: run_whole_space(cfg, r, clock, progress); break;
  case Campaign::torus_linear: run_torus_linear(cfg, r, clock, progress); break;
  case Campaign::nonlinear: run_nonlinear(cfg, r, clock, progress); break;
  }
  r.seconds = clock.seconds();
  if (clock.budget() > 0)
    r.verdicts.push_back({"wall clock (s)", "runtime", clock.budget(), r.seconds, 0.0, Verdict::Kind::below});
  return r;
}

std::string to_csv(const Series& s) {
  if (s.columns.empty() || s.rows.empty()) throw std::invalid_argument("to_csv: empty series");
  std::ostringstream o;
  for (std::size_t i = 0; i < s.columns.size(); ++i) o << (i ? "," : "") << s.columns[i];
  o << "\n";
  for (const auto& row : s.rows) {
    if (row.size() != s.columns.size()) throw std::invalid_argument("to_csv: ragged row");
    for (std::size_t i = 0; i < row.size(); ++i) o << (i ? "," : "") << num(row[i]);
    o << "\n";
  }
  return o.str();
}

std::string to_svg(const Plot& p) {
  if (p.x.empty() || p.x.size() != p.y.size()) throw std::invalid_argument("to_svg: empty or mismatched data");
  if (p.fit_x.size() != p.fit_y.size()) throw std::invalid_argument("to_svg: mismatched fit data");
  const double W = 640, H = 420, L = 80, R = 20, T = 40, B = 60;
  const Axis ax = make_axis(p.x, p.fit_x, p.log_x), ay = make_axis(p.y, p.fit_y, p.log_y);
  auto px = [&](double v) { return ax.map(v, L, W - R); };
  auto py = [&](double v) { return ay.map(v, H - B, T); };
  auto ok = [&](double x, double y) { return (!p.log_x || x > 0) && (!p.log_y || y > 0); };
  std::ostringstream o;
  char buf[256];
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << " " << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << xml_escape(p.title)
    << "</text>\n";
  std::snprintf(buf, sizeof buf, "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"black\"/>\n",
                L, T, W - L - R, H - T - B);
  o << buf;
  // ticks at the ends and middle of each axis
  for (int i = 0; i <= 2; ++i) {
    const double f = i / 2.0;
    const double xv = ax.log ? std::pow(10.0, std::log10(ax.lo) + f * (std::log10(ax.hi) - std::log10(ax.lo)))
                             : ax.lo + f * (ax.hi - ax.lo);
    const double yv = ay.log ? std::pow(10.0, std::log10(ay.lo) + f * (std::log10(ay.hi) - std::log10(ay.lo)))
                             : ay.lo + f * (ay.hi - ay.lo);
    std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\" font-size=\"11\">%s</text>\n",
                  px(xv), H - B + 16, short_num(xv).c_str());
    o << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"end\" font-size=\"11\">%s</text>\n",
                  L - 4, py(yv) + 4, short_num(yv).c_str());
    o << buf;
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 16 << "\" text-anchor=\"middle\" font-size=\"13\">"
    << xml_escape(p.xlabel) << (p.log_x ? " (log)" : "") << "</text>\n";
  o << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
    << (T + H - B) / 2 << ")\">" << xml_escape(p.ylabel) << (p.log_y ? " (log)" : "") << "</text>\n";
  if (p.scatter) {
    o << "<g class=\"data\" fill=\"steelblue\">\n";
    for (std::size_t i = 0; i < p.x.size(); ++i)
      if (ok(p.x[i], p.y[i])) {
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2\"/>\n", px(p.x[i]), py(p.y[i]));
        o << buf;
      }
    o << "</g>\n";
  } else {
    o << "<polyline class=\"data\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < p.x.size(); ++i)
      if (ok(p.x[i], p.y[i])) {
        std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(p.x[i]), py(p.y[i]));
        o << buf;
      }
    o << "\"/>\n";
  }
  if (!p.fit_x.empty()) {
    o << "<path class=\"fit\" fill=\"none\" stroke=\"crimson\" stroke-dasharray=\"6 3\" d=\"";
    bool first = true;
    for (std::size_t i = 0; i < p.fit_x.size(); ++i)
      if (ok(p.fit_x[i], p.fit_y[i])) {
        std::snprintf(buf, sizeof buf, "%s%.2f %.2f ", first ? "M" : "L", px(p.fit_x[i]), py(p.fit_y[i]));
        o << buf;
        first = false;
      }
    o << "\"/>\n";
  }
  if (!p.annotation.empty())
    o << "<text class=\"annotation\" x=\"" << W - R - 8 << "\" y=\"" << T + 18
      << "\" text-anchor=\"end\" font-size=\"13\" fill=\"crimson\">" << xml_escape(p.annotation) << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

std::string manifest_json(const CampaignResult& r, const ExperimentConfig& cfg, const std::vector<std::string>& files) {
  nlohmann::ordered_json j;
  j["campaign"] = campaign_name(r.campaign);
  j["config"] = cfg.values;
  j["seed"] = cfg.seed();
  j["resolution"] = r.resolution;
  nlohmann::ordered_json vs = nlohmann::ordered_json::array();
  for (const auto& v : r.verdicts) {
    const char* kind = v.kind == Verdict::Kind::within ? "within" : v.kind == Verdict::Kind::above ? "above" : "below";
    vs.push_back({{"name", v.name}, {"symbol", v.symbol}, {"target", v.target}, {"tolerance", v.tolerance},
                  {"kind", kind}, {"measured", v.measured}, {"pass", v.pass()}});
  }
  j["verdicts"] = vs;
  j["all_pass"] = r.all_pass();
  j["seconds"] = r.seconds;
  j["files"] = files;
  j["basis"] = "orthonormal Hermite functions, psi_000 = sqrt(M)";
  return j.dump(2) + "\n";
}

std::vector<std::string> emit_report(const CampaignResult& r, const ExperimentConfig& cfg, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> files;
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
    out << body;
    files.push_back(name);
  };
  for (const auto& s : r.series) write(s.name + ".csv", to_csv(s));
  for (const auto& p : r.plots) write(p.name + ".svg", to_svg(p));
  write("verdicts.txt", verdict_table(r.verdicts));
  auto listed = files;
  listed.push_back("manifest.json");
  write("manifest.json", manifest_json(r, cfg, listed));
  return files;
}

} // namespace nsvfp
