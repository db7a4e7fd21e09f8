#pragma once

#include <cstdint>

namespace nsvfp {

struct CoercivityResult {
  int order = 0;
  int samples = 0;
  /// inf (<-L f, f> - |b|^2 - 2|omega|^2) / |(I - P) f|_nu^2 over the samples.
  double lambda_hat = 0.0;
  /// inf <-L f, f> / |(I - P0) f|_nu^2 over the same samples.
  double lambda_hat_mass_only = 0.0;
};

/// Empirical coercivity constant from complex Gaussian coefficient samples.
CoercivityResult coercivity_estimate(int order, int samples, std::uint64_t seed, int threads = 1);

} // namespace nsvfp
