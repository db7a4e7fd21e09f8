#include "nsvfp/coercivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "nsvfp/hermite.hpp"
#include "nsvfp/parallel.hpp"

namespace nsvfp {

CoercivityResult coercivity_estimate(int order, int samples, std::uint64_t seed, int threads) {
  if (order < 2) throw std::invalid_argument("coercivity_estimate: order must be at least 2");
  if (samples < 1) throw std::invalid_argument("coercivity_estimate: need at least one sample");

  // Draw all samples up front so the result does not depend on the thread count.
  const std::size_t dim = HermiteCoeffs(order).size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<HermiteCoeffs> draws(samples, HermiteCoeffs(order));
  for (auto& f : draws)
    for (std::size_t i = 0; i < dim; ++i) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      f.data()[i] = cplx(re, im);
    }

  std::vector<double> ratio(samples), ratio_mass(samples);
  parallel_for(samples, threads, [&](std::size_t s) {
    const HermiteCoeffs& f = draws[s];
    const double dissipation = -inner(apply_L(f), f).real();
    const Moments m = moments(f);
    const double macro = std::norm(m.b[0]) + std::norm(m.b[1]) + std::norm(m.b[2]) + 2.0 * std::norm(m.omega);
    ratio[s] = (dissipation - macro) / nu_norm_sq(micro(f));
    ratio_mass[s] = dissipation / nu_norm_sq(f - project_P0(f));
  });

  CoercivityResult r;
  r.order = order;
  r.samples = samples;
  r.lambda_hat = *std::min_element(ratio.begin(), ratio.end());
  r.lambda_hat_mass_only = *std::min_element(ratio_mass.begin(), ratio_mass.end());
  return r;
}

} // namespace nsvfp
