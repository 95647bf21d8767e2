#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gapcr {

// Standard normal CDF.
double normal_cdf(double x);

// Standard normal quantile, accurate to better than 1e-12 on (0, 1).
double normal_quantile(double p);

// Upper critical value z_{alpha/2} with Pr(Z <= z) = 1 - alpha/2.
double z_alpha_half(double alpha);

// Two-sided normal p-value for an absolute-value statistic.
double two_sided_p(double abs_stat);

double mean(std::span<const double> v);

// Sample standard deviation (n-1 denominator); 0 for fewer than 2 values.
double sample_sd(std::span<const double> v);

// inf{ v in atoms : fraction of atoms <= v >= level }; sorts a copy.
double quantile_inf(std::vector<double> atoms, double level);

}  // namespace gapcr
