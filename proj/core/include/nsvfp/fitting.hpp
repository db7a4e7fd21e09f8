#pragma once

#include <vector>

namespace nsvfp {

/// Least-squares fit in log space. For power laws y ~ C (1+t)^exponent;
/// for exponentials y ~ C exp(-rate t).
struct DecayFit {
  double exponent = 0.0;
  double rate = 0.0;
  double t_min = 0.0;
  double t_max = 0.0;
  double residual = 0.0; // RMS of the log-fit
};

DecayFit fit_power_law(const std::vector<double>& t, const std::vector<double>& y);
DecayFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y);

std::vector<double> log_spaced(double lo, double hi, int count);
std::vector<double> lin_spaced(double lo, double hi, int count);

} // namespace nsvfp
