#include "gapcr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gapcr/errors.hpp"

namespace gapcr {

double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

namespace {

// Acklam's rational approximation, |rel err| < 1.15e-9.
double acklam(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0))
    throw ConfigError("normal_quantile: p must be in (0, 1)");
  double x = acklam(p);
  // One Halley refinement against erfc-based CDF.
  double e = normal_cdf(x) - p;
  double u = e * 2.50662827463100050242 * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

double z_alpha_half(double alpha) {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw ConfigError("alpha must be in (0, 1)");
  return normal_quantile(1.0 - alpha / 2.0);
}

double two_sided_p(double abs_stat) {
  return std::erfc(abs_stat * 0.70710678118654752440);
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(n - 1));
}

double quantile_inf(std::vector<double> atoms, double level) {
  if (atoms.empty()) throw ConfigError("quantile_inf: empty sample");
  std::sort(atoms.begin(), atoms.end());
  const double B = static_cast<double>(atoms.size());
  std::size_t k = static_cast<std::size_t>(std::ceil(level * B));
  if (k < 1) k = 1;
  if (k > atoms.size()) k = atoms.size();
  return atoms[k - 1];
}

}  // namespace gapcr
