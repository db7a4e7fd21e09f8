#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <vector>

#include "nsvfp/hermite.hpp"

namespace nsvfp {

using Vec3 = std::array<double, 3>;

/// One Fourier mode of the linearized coupled system: kinetic coefficients
/// plus fluid density, velocity and temperature amplitudes.
struct ModeState {
  HermiteCoeffs f;
  cplx rho = 0.0;
  std::array<cplx, 3> u{};
  cplx theta = 0.0;

  ModeState() = default;
  explicit ModeState(int order) : f(order) {}
};

inline std::size_t mode_dimension(int order) {
  const std::size_t s = order + 1;
  return s * s * s + 5;
}

Eigen::VectorXcd pack(const ModeState& s);
ModeState unpack(const Eigen::VectorXcd& x, int order);

/// Dense generator A(xi) of d/dt x = A x.
Eigen::MatrixXcd assemble_generator(const Vec3& xi, int order);
/// A(xi) x without forming the matrix.
Eigen::VectorXcd apply_generator(const Vec3& xi, int order, const Eigen::VectorXcd& x);

/// Largest RK4 step for which every eigenvalue of dt A lies in the stability region.
double rk4_stable_dt(const Vec3& xi, int order);

/// exp(t A(xi)), cached in an eigenbasis; falls back to Pade scaling and
/// squaring when the eigenvector basis is ill conditioned.
class ModePropagator {
public:
  ModePropagator(const Vec3& xi, int order);

  Eigen::VectorXcd apply(double t, const Eigen::VectorXcd& x) const;
  const Eigen::VectorXcd& eigenvalues() const { return lambda_; }
  bool diagonalized() const { return diagonalized_; }
  int order() const { return order_; }
  const Vec3& xi() const { return xi_; }
  /// Coefficients of x in the eigenbasis (only when diagonalized).
  Eigen::VectorXcd to_eigenbasis(const Eigen::VectorXcd& x) const;
  Eigen::VectorXcd from_eigenbasis(const Eigen::VectorXcd& y) const;

private:
  Vec3 xi_;
  int order_;
  Eigen::MatrixXcd a_;
  Eigen::VectorXcd lambda_;
  Eigen::MatrixXcd v_;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
  bool diagonalized_ = false;
};

enum class EvolveMethod { automatic, eigen, rk4 };

struct EvolveOptions {
  EvolveMethod method = EvolveMethod::automatic;
  /// RK4 step; 0 picks half the stability bound.
  double dt = 0.0;
  /// Dimension above which automatic switches from eigendecomposition to RK4.
  std::size_t eigen_limit = 1500;
};

ModeState evolve_mode(const Vec3& xi, const ModeState& s0, double t, const EvolveOptions& opt = {});

/// Fixed-step RK4; rejects steps beyond the stability bound.
Eigen::VectorXcd rk4_evolve(const Vec3& xi, int order, const Eigen::VectorXcd& x0, double t, double dt);

/// Kinetic source div_v G - v.G/2 + phi with G_i projected off P0 + P1 and phi
/// projected onto the microscopic part. Output order equals `order`.
HermiteCoeffs make_source(const std::array<HermiteCoeffs, 3>& g_raw, const HermiteCoeffs& phi_raw, int order);

/// Checks that a kinetic source is purely microscopic.
void validate_source(const HermiteCoeffs& s, double tol = 1e-10);

/// State at time t driven by a kinetic source sampled at equally spaced times
/// on [0, t] (odd sample count >= 3), integrated by composite Simpson.
ModeState duhamel_evolve(const ModePropagator& prop, const ModeState& s0,
                         const std::vector<HermiteCoeffs>& source_samples, double t);

struct EnergyWeights {
  double kappa1 = 0.5;
  double kappa2 = 0.5;
  double kappa3 = 0.1;
};

struct EnergyReport {
  double ef = 0.0;
  double plain_sq = 0.0;
  double interactive = 0.0; // Re of the interactive functional
  double micro_nu = 0.0;
  double exchange_velocity = 0.0;    // |u - b|^2
  double exchange_temperature = 0.0; // |sqrt2 omega - sqrt3 theta|^2
  double fluid_gradient = 0.0;       // |xi|^2 (|u|^2 + |theta|^2)
};

EnergyReport energy_EF(const Vec3& xi, const ModeState& s, const EnergyWeights& w = {});

/// Hermitian matrix H with energy_EF(x).ef = x^* H x.
Eigen::MatrixXcd energy_form(const Vec3& xi, int order, const EnergyWeights& w = {});

/// Smallest c with d/dt E_F <= -c |xi|^2/(1+|xi|^2) E_F along every trajectory
/// of mode xi; negative when E_F is not a Lyapunov functional there.
double lyapunov_constant(const Vec3& xi, int order, const EnergyWeights& w = {});

struct EnergyTuning {
  EnergyWeights weights;
  int halvings = 0;
  double band_low = 0.0;  // min eigenvalue of H over the sweep
  double band_high = 0.0; // max eigenvalue of H over the sweep
  double constant = 0.0;  // min lyapunov_constant over the sweep
};

/// Halves kappa3 from the defaults until 1/2 <= E_F / plain <= 2 and the
/// Lyapunov constant is positive at every sampled xi.
EnergyTuning tune_energy_weights(int order, const std::vector<Vec3>& xis, EnergyWeights start = {},
                                 int max_halvings = 20);

/// Linear functionals conserved by the xi = 0 dynamics: total a, rho,
/// b_i + u_i, theta + (sqrt6/2) omega. Returned as rows, orthonormalized.
Eigen::MatrixXcd conserved_functionals(int order);

/// max Re of the spectrum of A(xi); at xi = 0 with exclude_conserved the
/// conserved directions are removed first.
double spectral_abscissa(const Vec3& xi, int order, bool exclude_conserved);

} // namespace nsvfp
