#pragma once

#include <functional>
#include <span>
#include <vector>

namespace reglab {

double normal_cdf(double z);

/// CDF of the equal-weight mixture 1/2 N(R, 1) + 1/2 N(-R, 1).
double symmetric_mixture_cdf(double x, double R);

/// Two-sided Kolmogorov-Smirnov distance between the empirical CDF of
/// `samples` and `cdf`: max_i max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n).
double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf);

/// Asymptotic 95% critical value 1.36 / sqrt(n).
double ks_critical_95(std::size_t n);

double mean(std::span<const double> xs);
double sample_variance(std::span<const double> xs);
double median(std::vector<double> xs);

}  // namespace reglab
