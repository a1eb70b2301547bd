#pragma once

#include <span>

namespace shield {

double mean(std::span<const double> xs);
/// Standard error of the mean (unbiased variance); 0 for fewer than 2 values.
double standard_error(std::span<const double> xs);

/// Standard normal CDF.
double normal_cdf(double z);

/// One-sided Wilcoxon signed-rank test on paired samples, normal
/// approximation with tie and continuity correction. Zero differences are
/// dropped. Returns the p-value of H1: median(after - before) < 0.
double wilcoxon_decrease_pvalue(std::span<const double> before, std::span<const double> after);

}  // namespace shield
