#pragma once
// Small special-function helpers shared by the oracles and bounds.

namespace shelab {

// Standard normal CDF.
double normal_cdf(double x);

// Scaled complementary error function exp(x^2) erfc(x); stable for large x.
double erfcx(double x);

// P(|X|_infty > a) for X ~ N(0, 2 I_d): Gaussian mass outside the cube
// [-a,a]^d under the time-2 heat kernel.
double p2_tail_outside_cube(double a, int dim);

}  // namespace shelab
