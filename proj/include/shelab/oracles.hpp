#pragma once
// Closed-form and semi-analytic references the simulation is validated
// against.
//
// Constant sigma: the solution is the Gaussian field
//   u(t,x) = 1 + sigma0 * integral p_{t-s}(x-y) eta(ds dy),
//   Cov[u(t,x), u(t',x')] = sigma0^2 * integral_0^{t^t'} (p_{t+t'-2s} * f)(x-x') ds.
//
// PAM (sigma(u) = u): the two-point function M(t,z) = E[u(t,x+z) u(t,x)]
// solves the renewal (Volterra) equation
//   M(t,z) = 1 + integral_0^t (p_{2(t-s)} * f)(z) M(s,0) ds,
// solved here by product-integration on a uniform grid; for space-time white
// noise in d=1 the solution is also available as the exact series
//   M(t,0) = sum_n a_n t^{n/2},  a_0 = 1,  a_n = a_{n-1} B(1/2,(n+1)/2)/sqrt(4 pi).

#include <span>
#include <vector>

#include "shelab/noise.hpp"

namespace shelab {

// (p_T * f)(lag) evaluated in closed form per axis (erfcx-stable for the
// exponential kind).  T > 0; for the dirac kind this is just p_T(lag).
double heat_noise_convolution(const NoiseModel& model, double T, std::span<const double> lag);

// Cov[u(t,x+lag), u(t',x)] for constant sigma = sigma0.
double gaussian_oracle_covariance(const NoiseModel& model, double sigma0, double t,
                                  double tprime, std::span<const double> lag);

// PAM second moment E[u(t,x+lag) u(t,x)].  `grid_points` controls the Volterra
// discretization (error decays ~ h^2 on the smooth part).
double pam_second_moment_oracle(const NoiseModel& model, double t, std::span<const double> lag,
                                int grid_points = 4000);

// Exact series solution of the same equation for dirac d=1 at lag 0
// (independent cross-check used by the tests).
double pam_second_moment_series_white1d(double t);

}  // namespace shelab
