#pragma once
// Gaussian heat kernel p_t(x) = (2*pi*t)^{-d/2} exp(-|x|^2/(2t)) and the
// algebraic identities used throughout: product splitting, time merging,
// argument doubling, plus the spectral heat semigroup on the periodic lattice.

#include <span>

#include "shelab/grid.hpp"

namespace shelab {

// p_t(x) in d = x.size() dimensions; throws std::domain_error for t <= 0 and
// std::invalid_argument for empty x.
double heat_kernel(double t, std::span<const double> x);

// p_sigma(x) * p_sigma(y) = 2^d * factor_a * factor_b with
// factor_a = p_{2 sigma}(x - y), factor_b = p_{2 sigma}(x + y).
struct KernelProductSplit {
  double factor_a;
  double factor_b;
};
KernelProductSplit kernel_product_split(double sigma, std::span<const double> x,
                                        std::span<const double> y);

// p_sigma(x) * p_tau(x) = prefactor * kernel with
// prefactor = (2 pi)^{-d/2} (sigma + tau)^{-d/2}, kernel = p_{sigma tau/(sigma+tau)}(x).
struct KernelTimeMerge {
  double prefactor;
  double kernel;
};
KernelTimeMerge kernel_time_merge(double sigma, double tau, std::span<const double> x);

// lhs = p_sigma(2x), rhs = 2^{-d} (2 pi sigma)^{d/2} p_{sigma/2}(x)^2.
struct KernelDoubleArgument {
  double lhs;
  double rhs;
};
KernelDoubleArgument kernel_double_argument(double sigma, std::span<const double> x);

// In-place application of exp(t*Laplacian/2) on the periodic lattice via the
// Fourier multiplier exp(-t|z|^2/2).  Mass (the mean) is preserved exactly.
void semigroup_convolve(Field& field, const LatticeGrid& grid, double t);

}  // namespace shelab
