#include "nsvfp/fitting.hpp"

#include <cmath>
#include <stdexcept>

namespace nsvfp {

namespace {

struct Line {
  double slope, intercept, rms;
};

Line least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit: degenerate abscissae");
  Line l;
  l.slope = sxy / sxx;
  l.intercept = my - l.slope * mx;
  double r = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (l.intercept + l.slope * x[i]);
    r += e * e;
  }
  l.rms = std::sqrt(r / n);
  return l;
}

void check(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size() || t.size() < 2) throw std::invalid_argument("fit: need matching samples, at least two");
  for (double v : y)
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("fit: values must be positive and finite");
}

} // namespace

DecayFit fit_power_law(const std::vector<double>& t, const std::vector<double>& y) {
  check(t, y);
  std::vector<double> lx(t.size()), ly(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    lx[i] = std::log1p(t[i]);
    ly[i] = std::log(y[i]);
  }
  const Line l = least_squares(lx, ly);
  DecayFit f;
  f.exponent = l.slope;
  f.t_min = t.front();
  f.t_max = t.back();
  f.residual = l.rms;
  return f;
}

DecayFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y) {
  check(t, y);
  std::vector<double> ly(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) ly[i] = std::log(y[i]);
  const Line l = least_squares(t, ly);
  DecayFit f;
  f.rate = -l.slope;
  f.t_min = t.front();
  f.t_max = t.back();
  f.residual = l.rms;
  return f;
}

std::vector<double> log_spaced(double lo, double hi, int count) {
  if (count < 2 || !(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("log_spaced: bad range");
  std::vector<double> out(count);
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < count; ++i) out[i] = std::exp(a + (b - a) * i / (count - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> lin_spaced(double lo, double hi, int count) {
  if (count < 2 || !(hi > lo)) throw std::invalid_argument("lin_spaced: bad range");
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) out[i] = lo + (hi - lo) * i / (count - 1);
  return out;
}

} // namespace nsvfp
