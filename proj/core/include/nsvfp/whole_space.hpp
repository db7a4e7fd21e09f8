#pragma once

#include <memory>
#include <vector>

#include "nsvfp/fitting.hpp"
#include "nsvfp/hermite.hpp"
#include "nsvfp/linear_mode.hpp"

namespace nsvfp {

/// Separable Gaussian data: every field is amplitude * exp(-|x|^2 / (2 sigma^2))
/// times its velocity profile (kinetic part) or its constant amplitude (fluid).
struct InitialProfile {
  double sigma = 1.0;
  double amplitude = 1.0;
  HermiteCoeffs velocity;
  double rho0 = 0.0;
  Vec3 u0{0.0, 0.0, 0.0};
  double theta0 = 0.0;
};

/// sigma = 1, chi_0 + chi_4 kinetic part, fluid amplitudes (1, e_1, 1).
InitialProfile default_profile(int order, double amplitude = 1e-2);

/// Fourier transform of the spatial factor at |xi|^2.
double gaussian_hat(const InitialProfile& p, double xi_sq);

/// Closed-form sum over fields of |d^m|^2 L2 norms squared (|xi|^{2m} weighted).
double closed_form_norm_sq(const InitialProfile& p, int m);

/// ||f||_{Z_q} + ||(rho, u, theta)||_{L^1}; the fluid part uses the pointwise
/// Euclidean norm of (rho, u, theta).
double zq_norm(const InitialProfile& p, int q);

struct XiGrid {
  enum class Kind { radial, tensor } kind = Kind::radial;
  /// radial: |xi| nodes; tensor: per-axis nodes.
  std::vector<double> nodes;
  /// radial: weights include 4 pi |xi|^2; tensor: per-axis weights.
  std::vector<double> weights;
  double cutoff = 0.0;
};

XiGrid radial_grid(int nodes = 120, double kmin = 1e-3, double kmax = 20.0);
XiGrid tensor_grid(int per_axis = 48, double cutoff = 12.0);
/// Halved spacing and doubled cutoff.
XiGrid refined(const XiGrid& g);

/// Norm evaluator that caches one propagator per distinct frequency.
class WholeSpaceEvolver {
public:
  WholeSpaceEvolver(const InitialProfile& profile, const XiGrid& grid, int order, int threads = 1);

  /// sqrt((2pi)^-3 int |xi|^{2m} |state(xi, t)|^2 dxi)
  double norm(double t, int m) const;
  std::vector<double> norms(const std::vector<double>& times, int m) const;

  std::size_t propagator_count() const { return nodes_.size(); }

private:
  struct Node {
    std::shared_ptr<const ModePropagator> prop;
    double xi_sq = 0.0;
    // eigenbasis coordinates of each distinct initial vector, with weights
    std::vector<Eigen::VectorXcd> z;
    std::vector<Eigen::VectorXcd> x;
    std::vector<double> w;
  };
  int order_;
  int threads_;
  std::vector<Node> nodes_;
};

double l2_norm_at(double t, const InitialProfile& profile, const XiGrid& grid, int order, int m,
                  int threads = 1);

/// Throws std::runtime_error when halving the grid spacing moves the norm by more than `tol`.
void check_resolution(double t, const InitialProfile& profile, const XiGrid& grid, int order, int m,
                      double tol = 0.01, int threads = 1);

/// sigma_{q,m} = (3/2)(1/q - 1/2) + m/2
double sigma_qm(int q, int m);

struct SigmaVerdict {
  bool pass = false;
  double target = 0.0; // sigma_{q,m}
  double margin = 0.0; // tolerance - |exponent + target|
};

SigmaVerdict verify_sigma(int q, int m, const DecayFit& fit, double tolerance = 0.1, double max_residual = 0.05);

struct ConvolutionCheck {
  double sup = 0.0;
  double argmax = 0.0;
};

/// sup over t in [0, T] of (1+t)^{min(b1,b2)} int_0^t (1+t-s)^{-b1} (1+s)^{-b2} ds.
ConvolutionCheck convolution_bound_check(double beta1, double beta2, double T);
/// The convolution integral itself at a single t.
double convolution_integral(double beta1, double beta2, double t);

/// Gaussian-in-x, microscopic-in-v kinetic source decaying like (1+tau)^{-decay}.
struct SourceFamily {
  double sigma = 1.0;
  double amplitude = 1.0;
  std::array<HermiteCoeffs, 3> g;
  HermiteCoeffs phi;
  double decay = 2.0;
};

SourceFamily default_source(int order, double decay);

struct DuhamelSample {
  double t = 0.0;
  double lhs = 0.0; // squared norm of the Duhamel term
  double rhs = 0.0; // time-convolved source norms
};

struct DuhamelReport {
  std::vector<DuhamelSample> samples;
  double max_ratio = 0.0;
};

DuhamelReport duhamel_decay_check(const SourceFamily& source, int q, int m, const XiGrid& grid, int order,
                                  const std::vector<double>& times, int threads = 1);

} // namespace nsvfp
