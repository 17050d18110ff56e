#pragma once

namespace sa {

// Standard normal CDF.
double normal_cdf(double z);

// Inverse standard normal CDF (AS241-grade accuracy).
double normal_quantile(double p);

// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

// Two-sided p-value for a t statistic with df degrees of freedom.
double t_two_sided_p(double t, double df);

// Upper-tail p-value of an F statistic with (d1, d2) degrees of freedom.
double f_upper_p(double f, double d1, double d2);

}  // namespace sa
