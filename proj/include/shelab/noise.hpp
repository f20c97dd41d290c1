#pragma once
// Spatially homogeneous Gaussian noise models, white in time:
//   Cov[eta(t,x), eta(s,y)] = delta_0(t-s) * f(x-y),
// with f one of
//   dirac        : f = delta_0 (space-time white noise; d = 1 only),
//   gaussian     : f = Gaussian density with variance `bandwidth` per axis,
//   exponential  : f = (rate/2)^d exp(-rate * |x|_1).
// Fourier convention:  fhat(z) = integral exp(i x.z) f(dx), so
//   dirac -> 1,  gaussian -> exp(-b|z|^2/2),  exponential -> prod rate^2/(rate^2+z_j^2).
//
// Besides the model itself this header carries the spectral diagnostics: the
// (reinforced) Dalang integral, the resolvent-type integral
//   upsilon(lambda) = (2/(2 pi)^d) * integral fhat(dz) / (2 lambda + |z|^2),
// its inverse lambda_inverse, and the lattice discretization + sampler used by
// the solver.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shelab/grid.hpp"
#include "shelab/rng.hpp"
#include "shelab/spectral.hpp"

namespace shelab {

enum class NoiseKind { dirac, gaussian_density, exponential_density };

struct NoiseModel {
  NoiseKind kind = NoiseKind::dirac;
  int dim = 1;
  double bandwidth = 1.0;  // gaussian kind: per-axis variance b
  double rate = 1.0;       // exponential kind: decay rate

  void validate() const;

  // f(R^d); 1 for all three kinds but kept explicit.
  double total_mass() const;
  // Spectral density fhat(z) (a bona fide density for all three kinds).
  double spectral_density(std::span<const double> z) const;
  // f([-a,a]^d).
  double mass_cube(double a) const;
  // Whether the spectral measure fhat carries an atom at the origin (hook for
  // the ergodicity criterion; false for all three kinds).
  bool has_zero_atom() const;

  // Lattice covariance f_Delta at a signed physical lag (cell-pair averaged,
  // i.e. f convolved with the width-2dx triangle kernel), one axis factor per
  // component, wrapped on a torus of length L per axis.
  double lattice_covariance(std::span<const double> lag, double dx, double L) const;

  static NoiseModel dirac1d();
  static NoiseModel gaussian(int dim, double bandwidth);
  static NoiseModel exponential(int dim, double rate);
};

std::string to_string(NoiseKind kind);

// Outcome of a spectral-integral evaluation.  `divergent` is decided
// analytically from the tail exponent, `undetermined` signals that the
// quadrature failed to converge to the requested accuracy.
struct QuadratureValue {
  enum class Status { finite, divergent, undetermined };
  Status status = Status::undetermined;
  double value = 0;       // meaningful when status == finite
  double error_bound = 0; // quadrature error estimate + tail bound
};

// Reinforced Dalang integral  integral fhat(dz) / (1+|z|^2)^{1-alpha},
// alpha in [0,1]; alpha = 0 is the plain existence condition.
QuadratureValue dalang_integral(const NoiseModel& model, double alpha);

// upsilon(lambda), strictly decreasing on (0, infinity); throws
// std::domain_error for lambda <= 0.
double upsilon(const NoiseModel& model, double lambda);

// Inverse of upsilon: the lambda with upsilon(lambda) = y, y > 0.  Bracketed
// bisection to relative accuracy ~1e-12.
double lambda_inverse(const NoiseModel& model, double y);

// Per-unit-time circulant spectrum of f_Delta on the grid (DFT of the wrapped
// lattice covariance; one entry per stored r2c mode, nonnegative).
std::vector<double> noise_spectrum(const NoiseModel& model, const LatticeGrid& grid,
                                   SpectralWorkspace& ws);

// One integrated noise field over a step of length dt: site covariance
// Cov(values(x), values(y)) = dt * f_Delta(x-y).  Convenience wrapper that
// builds the spectrum on the fly; the solver caches its own.
struct NoiseIncrement {
  double dt;
  Field values;
};
NoiseIncrement sample_increment(const NoiseModel& model, const LatticeGrid& grid, double dt,
                                RandomStream& rng);

}  // namespace shelab
