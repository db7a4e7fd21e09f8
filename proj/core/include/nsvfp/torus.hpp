#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "nsvfp/fitting.hpp"
#include "nsvfp/linear_mode.hpp"

namespace nsvfp {

using IVec3 = std::array<int, 3>;

/// Integer frequencies of the 2pi-periodic cube with |k|_inf <= kmax.
struct TorusSpectrum {
  int kmax = 0;
  std::vector<IVec3> modes;
  std::size_t zero_index = 0;

  std::size_t index_of(const IVec3& k) const;
};

TorusSpectrum make_spectrum(int kmax);

inline Vec3 to_xi(const IVec3& k) { return {double(k[0]), double(k[1]), double(k[2])}; }

/// One ModeState per spectrum mode, same order.
using TorusData = std::vector<ModeState>;

/// Random data with conjugate symmetry between k and -k (real fields).
TorusData random_torus_data(const TorusSpectrum& spec, int order, double amplitude, std::uint64_t seed);

/// Zero-mode totals conserved by the linear flow.
struct ConservedSet {
  cplx a = 0.0;
  cplx rho = 0.0;
  std::array<cplx, 3> momentum{}; // b + u
  cplx energy = 0.0;              // theta + (sqrt6/2) omega
};

ConservedSet conserved_set(const TorusSpectrum& spec, const TorusData& data);
double max_abs(const ConservedSet& c);
/// Largest componentwise difference between two conserved sets.
double max_drift(const ConservedSet& a, const ConservedSet& b);

/// Minimal-norm correction of the zero mode so every conserved total vanishes.
TorusData enforce_conservation(const TorusSpectrum& spec, TorusData data);

/// sqrt(sum over modes of |state|^2)
double total_norm(const TorusData& data);
/// H^s norm of the fluid fields (rho, u, theta).
double fluid_sobolev_norm(const TorusSpectrum& spec, const TorusData& data, int s);

/// Mode-wise linear semigroup with one propagator per symmetry class of |k|.
class TorusEvolver {
public:
  TorusEvolver(const TorusSpectrum& spec, int order, int threads = 1);

  TorusData evolve(const TorusData& data, double t) const;
  /// total_norm of the evolved data at each time.
  std::vector<double> norms(const TorusData& data, const std::vector<double>& times) const;

  const TorusSpectrum& spectrum() const { return spec_; }
  int order() const { return order_; }
  std::size_t propagator_count() const { return props_.size(); }

private:
  struct Link {
    std::size_t prop;
    std::array<int, 3> perm;
    std::array<double, 3> sign;
  };
  TorusSpectrum spec_;
  int order_;
  int threads_;
  std::vector<std::shared_ptr<const ModePropagator>> props_;
  std::vector<Link> links_;
};

struct TorusDecay {
  std::vector<double> times;
  std::vector<double> norms;
  std::vector<double> h3;
  std::vector<double> h4;
  DecayFit fit;
};

/// Samples total_norm on [0, T] and fits an exponential on t >= fit_from.
TorusDecay torus_linear_decay(const TorusEvolver& ev, const TorusData& data, double T, int samples,
                              double fit_from = 20.0);

struct SpectralGap {
  double gap = 0.0;
  IVec3 mode{};
};

/// min over modes of -abscissa, conserved directions removed at k = 0.
SpectralGap min_spectral_gap(const TorusSpectrum& spec, int order, int threads = 1);

/// ||g|| / ||grad g|| for a mean-zero field given by its Fourier coefficients.
double poincare_ratio(const TorusSpectrum& spec, const std::vector<cplx>& field);

} // namespace nsvfp
