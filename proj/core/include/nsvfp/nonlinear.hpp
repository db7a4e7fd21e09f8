#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsvfp/hermite.hpp"
#include "nsvfp/linear_mode.hpp"

namespace nsvfp {

struct SolverConfig {
  int grid = 8;   // points per axis on [0, 2pi)
  int order = 4;  // Hermite order per velocity axis
  double dt = 1e-3;
  double rho_floor = 0.05;
  /// Include -(1/(1+rho)) Lap(u).u in the temperature equation, as in the
  /// original energy balance. Off reproduces the reformulated system verbatim.
  bool viscous_heating = true;
  int threads = 1;
};

/// Fourier coefficients of (f, rho, u, theta) on an n^3 grid,
/// g(x) = sum_k g_k exp(i k.x). f is stored point-major: coefficient c of
/// mode p lives at f[p * coeffs + c].
class FieldState {
public:
  FieldState() = default;
  FieldState(int grid, int order);

  int grid() const { return grid_; }
  int order() const { return order_; }
  std::size_t points() const { return rho.size(); }
  std::size_t coeffs() const { return coeffs_; }

  double time = 0.0;
  std::vector<cplx> f;
  std::vector<cplx> rho;
  std::array<std::vector<cplx>, 3> u;
  std::vector<cplx> theta;

  /// this += s * x (time untouched)
  FieldState& axpy(double s, const FieldState& x);
  FieldState& scale(double s);
  /// sqrt(sum of |coefficient|^2) over every field.
  double coefficient_norm() const;

  /// Mode index of wavenumber k (components taken modulo n).
  std::size_t mode_index(const std::array<int, 3>& k) const;
  std::array<int, 3> wavenumber(std::size_t p) const;

  ModeState mode(std::size_t p) const;
  void set_mode(std::size_t p, const ModeState& s);

private:
  int grid_ = 0;
  int order_ = 0;
  std::size_t coeffs_ = 0;
};

FieldState operator+(FieldState a, const FieldState& b);
FieldState operator-(FieldState a, const FieldState& b);
FieldState operator*(double s, FieldState a);

/// Physical-space values of the fluid fields and kinetic moments.
struct PhysicalFields {
  std::vector<double> rho, theta, a, omega;
  std::array<std::vector<double>, 3> u, b;
  std::vector<double> f; // point-major coefficients
  double max_imag = 0.0;
};

class NonlinearSolver {
public:
  explicit NonlinearSolver(const SolverConfig& cfg);
  ~NonlinearSolver();
  NonlinearSolver(const NonlinearSolver&) = delete;
  NonlinearSolver& operator=(const NonlinearSolver&) = delete;

  const SolverConfig& config() const { return cfg_; }
  FieldState zero_state() const { return FieldState(cfg_.grid, cfg_.order); }

  /// Largest |k_i| kept by the 2/3 rule.
  int band() const { return band_; }
  bool in_band(std::size_t p) const { return in_band_[p]; }
  const std::vector<std::size_t>& band_modes() const { return band_modes_; }

  /// Full nonlinear right-hand side; throws on density-floor violation or NaN.
  FieldState rhs(const FieldState& s) const;
  /// Mode-wise linear generator of the torus problem.
  FieldState linear_rhs(const FieldState& s) const;
  /// Classical RK4 step; rejects dt above stable_dt().
  void step_rk4(FieldState& s, double dt) const;
  /// Bound from the largest retained wavenumber (transport, L stiffness, diffusion).
  double stable_dt() const;

  PhysicalFields to_physical(const FieldState& s) const;
  /// Truncated Fourier coefficients of a real grid field.
  std::vector<cplx> to_fourier(const std::vector<double>& values) const;

  /// Largest imaginary part of any physical field.
  double max_imaginary(const FieldState& s) const { return to_physical(s).max_imag; }

private:
  void forward(cplx* data, int howmany) const;
  void backward(cplx* data, int howmany) const;

  SolverConfig cfg_;
  int band_ = 0;
  std::vector<bool> in_band_;
  std::vector<std::size_t> band_modes_;
  struct Plans;
  std::unique_ptr<Plans> plans_;
  mutable double stable_dt_ = 0.0;
};

/// Random band-limited real data whose nonlinear conserved integrals vanish
/// (zero-mode adjustment). Coefficients have scale eps / (1 + |k|^2), halved
/// per unit of Hermite order.
FieldState random_small_state(const NonlinearSolver& solver, double eps, std::uint64_t seed);

/// The four conserved integrals: int a, int rho, int (b + (1+rho) u),
/// int ((1+rho)(theta + |u|^2/2) + (sqrt6/2) omega).
struct ConservationIntegrals {
  double mass_particles = 0.0;
  double mass_fluid = 0.0;
  std::array<double, 3> momentum{};
  double energy = 0.0;
};

ConservationIntegrals conservation_integrals(const NonlinearSolver& solver, const FieldState& s);
/// Largest change per law, each divided by `scale`.
std::array<double, 4> conservation_drift(const ConservationIntegrals& a, const ConservationIntegrals& b,
                                         double scale);

struct FunctionalConfig {
  double tau1 = 0.05;
  double tau2 = 0.05;
  double tau3 = 0.1;
  double tau4 = 0.05;
  double tau5 = 0.05;
  double tau6 = 0.05;
  /// Weights C_k of the mixed velocity-derivative sums, k = 1..4.
  std::array<double, 4> c{1.0, 1.0, 1.0, 1.0};
  int sobolev_order = 4;
};

struct DiagnosticsRecord {
  double time = 0.0;
  double E = 0.0, D = 0.0, E0 = 0.0, E1 = 0.0, D1 = 0.0, E2 = 0.0, D2 = 0.0;
  double plain = 0.0; // sum |d^alpha_beta f|^2 + sum |d^alpha (rho, u, theta)|^2
  std::array<double, 4> conservation{};
  double min_F = 0.0;
  double min_density = 0.0;
  std::array<double, 3> moment_residuals{};
};

/// Per-mode quadratic functionals with cached velocity Gram matrices.
class FunctionalEvaluator {
public:
  FunctionalEvaluator(int order, const FunctionalConfig& cfg);

  struct Parts {
    double plain = 0, E0 = 0, E1 = 0, D1 = 0, E2 = 0, D2 = 0, DT1 = 0, E = 0, D = 0;
  };
  Parts mode(const Vec3& k, const ModeState& x) const;
  /// Sums over band modes of a field, times the torus volume.
  Parts field(const NonlinearSolver& solver, const FieldState& s) const;

  /// Hermitian matrices of E, D and the plain sum at one mode.
  Eigen::MatrixXcd matrix_E(const Vec3& k) const;
  Eigen::MatrixXcd matrix_D(const Vec3& k) const;
  Eigen::MatrixXcd matrix_plain(const Vec3& k) const;

  const FunctionalConfig& config() const { return cfg_; }
  int order() const { return order_; }

private:
  std::array<Eigen::MatrixXcd, 3> assemble(const Vec3& k) const;

  int order_;
  FunctionalConfig cfg_;
  // sum over |beta| = j of D_beta^* D_beta, plain and nu-weighted, j = 0..4
  std::array<Eigen::MatrixXd, 5> gram_;
  std::array<Eigen::MatrixXd, 5> gram_nu_;
  Eigen::MatrixXd micro_; // I - P on the coefficient box
};

/// Sum over |alpha| <= m of k^(2 alpha).
double derivative_weight(const Vec3& k, int m);

struct FunctionalCheck {
  double lyapunov = 0.0;  // min over modes of the rate c in dE/dt <= -c D
  double band_low = 0.0;  // min E / plain over sampled states
  double band_high = 0.0; // max E / plain over sampled states
  double d_band_low = 0.0;
  double d_band_high = 0.0;
};

/// Linear-flow Lyapunov rate on the band modes (conserved directions removed
/// at k = 0) and the E/plain, D/reference ratio ranges over random states.
FunctionalCheck check_functionals(const FunctionalEvaluator& ev, int band, int samples, std::uint64_t seed);

struct FunctionalTuning {
  FunctionalConfig config;
  FunctionalCheck check;
  int halvings = 0;
  bool ok = false;
};

/// Halves the coupling weights from `start` until the Lyapunov rate is
/// positive and the equivalence ratios lie in [1/2, 2].
FunctionalTuning tune_functionals(int order, int band, FunctionalConfig start = {}, int max_halvings = 12,
                                  int samples = 1000, std::uint64_t seed = 1);

/// L2 norms of the residuals of the a, b, omega equations between two
/// states, centered at their midpoint. `omega_printed` uses the u.b
/// coefficient 1/sqrt6 and the extra u.Q((I-P)f)/2 term.
struct MomentResiduals {
  std::array<double, 3> derived{};
  double omega_printed = 0.0;
};

MomentResiduals moment_residuals(const NonlinearSolver& solver, const FieldState& prev, const FieldState& next,
                                 double dt);
/// The dt -> 0 limit: time derivatives taken from the right-hand side at s.
MomentResiduals moment_floor(const NonlinearSolver& solver, const FieldState& s);

/// Momentum and energy exchange from quadrature of F = M + sqrt(M) f and
/// their moment closed forms.
struct ExchangeReport {
  std::array<std::vector<double>, 3> momentum; // quadrature, per point
  std::vector<double> energy;
  double momentum_residual = 0.0; // max |quadrature - (b - u(1+a))|
  double energy_residual = 0.0;   // max |quadrature - (sqrt6 w - 3 th - 3 a th - u.b)|
};

ExchangeReport exchange_terms(const NonlinearSolver& solver, const FieldState& s, int nodes = 0);

struct PositivityReport {
  double min_F = 0.0;
  double min_density = 0.0;
};

/// Minimum of F = M + sqrt(M) f over grid points and tensor Gauss-Hermite
/// velocity nodes, and of 1 + rho over grid points.
PositivityReport positivity_probe(const NonlinearSolver& solver, const FieldState& s, int nodes = 0);

} // namespace nsvfp
