#include "shelab/heat_kernel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "shelab/spectral.hpp"

namespace shelab {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double norm_sq(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v * v;
  return s;
}
}  // namespace

double heat_kernel(double t, std::span<const double> x) {
  if (!(t > 0.0)) throw std::domain_error("heat_kernel: t must be positive");
  if (x.empty()) throw std::invalid_argument("heat_kernel: empty point");
  const double d = double(x.size());
  return std::pow(kTwoPi * t, -0.5 * d) * std::exp(-norm_sq(x) / (2.0 * t));
}

KernelProductSplit kernel_product_split(double sigma, std::span<const double> x,
                                        std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("kernel_product_split: dim mismatch");
  if (!(sigma > 0.0)) throw std::domain_error("kernel_product_split: sigma must be positive");
  std::vector<double> diff(x.size()), sum(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    diff[i] = x[i] - y[i];
    sum[i] = x[i] + y[i];
  }
  return {heat_kernel(2.0 * sigma, diff), heat_kernel(2.0 * sigma, sum)};
}

KernelTimeMerge kernel_time_merge(double sigma, double tau, std::span<const double> x) {
  if (!(sigma > 0.0) || !(tau > 0.0))
    throw std::domain_error("kernel_time_merge: times must be positive");
  const double d = double(x.size());
  const double pre = std::pow(kTwoPi, -0.5 * d) * std::pow(sigma + tau, -0.5 * d);
  return {pre, heat_kernel(sigma * tau / (sigma + tau), x)};
}

KernelDoubleArgument kernel_double_argument(double sigma, std::span<const double> x) {
  if (!(sigma > 0.0)) throw std::domain_error("kernel_double_argument: sigma must be positive");
  const double d = double(x.size());
  std::vector<double> x2(x.begin(), x.end());
  for (double& v : x2) v *= 2.0;
  const double k = heat_kernel(sigma / 2.0, x);
  return {heat_kernel(sigma, x2), std::pow(2.0, -d) * std::pow(kTwoPi * sigma, 0.5 * d) * k * k};
}

void semigroup_convolve(Field& field, const LatticeGrid& grid, double t) {
  grid.validate();
  if (t < 0.0) throw std::domain_error("semigroup_convolve: t must be nonnegative");
  if (field.size() != grid.total_sites())
    throw std::invalid_argument("semigroup_convolve: field size does not match grid");
  if (t == 0.0) return;
  SpectralWorkspace ws(grid);
  std::vector<double> mult(ws.n_modes());
  const auto& zz = ws.mode_sq();
  for (std::size_t i = 0; i < mult.size(); ++i) mult[i] = std::exp(-0.5 * t * zz[i]);
  ws.apply_multiplier(field, mult);
}

}  // namespace shelab
