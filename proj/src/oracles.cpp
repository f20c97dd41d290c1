#include "shelab/oracles.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "shelab/heat_kernel.hpp"
#include "shelab/special.hpp"

namespace shelab {

namespace {
constexpr double kPi = std::numbers::pi;

// One axis of (p_T * f)(l) for the exponential kind, stable for all l:
//   (lambda/4) [ e^{-l^2/2T} erfcx(u1) + e^{-l^2/2T} erfcx(u2) ],
//   u1 = (lambda T - l)/sqrt(2T), u2 = (lambda T + l)/sqrt(2T), l = |lag|;
// for u1 < 0 the first term is computed as e^{lam^2 T/2 - lam l} erfc(u1).
double exp_axis_convolution(double lam, double T, double lag) {
  const double l = std::abs(lag);
  const double rt = std::sqrt(2.0 * T);
  const double u1 = (lam * T - l) / rt;
  const double u2 = (lam * T + l) / rt;
  const double damp = std::exp(-l * l / (2.0 * T));
  double term1;
  if (u1 >= 0)
    term1 = damp * erfcx(u1);
  else
    term1 = std::exp(0.5 * lam * lam * T - lam * l) * boost::math::erfc(u1);
  const double term2 = damp * erfcx(u2);
  return 0.25 * lam * (term1 + term2);
}
}  // namespace

double heat_noise_convolution(const NoiseModel& model, double T, std::span<const double> lag) {
  model.validate();
  if (!(T > 0)) throw std::domain_error("heat_noise_convolution: T must be positive");
  if (int(lag.size()) != model.dim)
    throw std::invalid_argument("heat_noise_convolution: lag has wrong dimension");
  switch (model.kind) {
    case NoiseKind::dirac:
      return heat_kernel(T, lag);
    case NoiseKind::gaussian_density: {
      double p = 1.0;
      for (double l : lag) {
        const double v = T + model.bandwidth;
        p *= std::exp(-l * l / (2.0 * v)) / std::sqrt(2.0 * kPi * v);
      }
      return p;
    }
    case NoiseKind::exponential_density: {
      double p = 1.0;
      for (double l : lag) p *= exp_axis_convolution(model.rate, T, l);
      return p;
    }
  }
  return 0;
}

double gaussian_oracle_covariance(const NoiseModel& model, double sigma0, double t, double tprime,
                                  std::span<const double> lag) {
  if (t < 0 || tprime < 0)
    throw std::domain_error("gaussian_oracle_covariance: times must be nonnegative");
  const double tmin = std::min(t, tprime);
  if (tmin == 0) return 0.0;
  // substitute tau = t + t' - 2s:  (1/2) * integral over tau in [|t-t'|, t+t'].
  const double lo = std::abs(t - tprime), hi = t + tprime;
  boost::math::quadrature::tanh_sinh<double> integrator;
  const double v = integrator.integrate(
      [&](double tau) { return heat_noise_convolution(model, tau, lag); }, lo, hi);
  return 0.5 * sigma0 * sigma0 * v;
}

namespace {

// Integrals of k and of tau*k over [a, b] for k(tau) = (p_{2 tau} * f)(z).
// The dirac kind at z == 0 has the integrable tau^{-1/2} singularity and gets
// closed forms; everything else is smooth and uses Gauss-Legendre.
struct IntervalMoments {
  double k0 = 0;  // integral of k
  double k1 = 0;  // integral of tau * k
};

IntervalMoments kernel_interval(const NoiseModel& model, std::span<const double> lag, double a,
                                double b) {
  bool zero_lag = true;
  for (double l : lag) zero_lag = zero_lag && l == 0.0;
  if (model.kind == NoiseKind::dirac && zero_lag) {
    IntervalMoments m;
    m.k0 = (std::sqrt(b) - std::sqrt(a)) / std::sqrt(kPi);
    m.k1 = (std::pow(b, 1.5) - std::pow(a, 1.5)) / (3.0 * std::sqrt(kPi));
    return m;
  }
  using quad = boost::math::quadrature::gauss<double, 10>;
  IntervalMoments m;
  m.k0 = quad::integrate(
      [&](double tau) { return heat_noise_convolution(model, 2.0 * tau, lag); }, a, b);
  m.k1 = quad::integrate(
      [&](double tau) { return tau * heat_noise_convolution(model, 2.0 * tau, lag); }, a, b);
  return m;
}

// Product-integration solve of M(t_i) = 1 + sum over past intervals with the
// linear-in-M weights; returns M on the whole grid (diagonal lag 0).
std::vector<double> volterra_diagonal(const NoiseModel& model, double t, int n) {
  const double h = t / n;
  std::vector<double> lagz(model.dim, 0.0);
  std::vector<double> W0(n + 1), W1(n + 1);
  for (int r = 1; r <= n; ++r) {
    const auto m = kernel_interval(model, lagz, (r - 1) * h, r * h);
    W0[r] = m.k1 / h - (r - 1) * m.k0;
    W1[r] = r * m.k0 - m.k1 / h;
  }
  std::vector<double> M(n + 1);
  M[0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    double rhs = 1.0 + M[0] * W0[i];
    for (int m = 1; m < i; ++m) rhs += M[m] * (W0[i - m] + W1[i - m + 1]);
    M[i] = rhs / (1.0 - W1[1]);
  }
  return M;
}

}  // namespace

double pam_second_moment_oracle(const NoiseModel& model, double t, std::span<const double> lag,
                                int grid_points) {
  model.validate();
  if (!(t > 0)) throw std::domain_error("pam_second_moment_oracle: t must be positive");
  if (int(lag.size()) != model.dim)
    throw std::invalid_argument("pam_second_moment_oracle: lag has wrong dimension");
  if (grid_points < 16) throw std::invalid_argument("pam_second_moment_oracle: grid too small");

  const int n = grid_points;
  const auto M = volterra_diagonal(model, t, n);
  bool zero_lag = true;
  for (double l : lag) zero_lag = zero_lag && l == 0.0;
  if (zero_lag) return M[n];

  // One more pass with the off-diagonal kernel against the diagonal solution.
  const double h = t / n;
  double acc = 1.0;
  for (int r = 1; r <= n; ++r) {
    const auto m = kernel_interval(model, lag, (r - 1) * h, r * h);
    const double w0 = m.k1 / h - (r - 1) * m.k0;
    const double w1 = r * m.k0 - m.k1 / h;
    acc += M[n - r] * w0 + M[n - r + 1] * w1;
  }
  return acc;
}

double pam_second_moment_series_white1d(double t) {
  if (!(t >= 0)) throw std::domain_error("pam_second_moment_series_white1d: t must be >= 0");
  const double inv = 1.0 / std::sqrt(4.0 * kPi);
  double a = 1.0, sum = 1.0;
  for (int n = 1; n < 400; ++n) {
    a *= boost::math::beta(0.5, 0.5 * (n + 1)) * inv;
    const double term = a * std::pow(t, 0.5 * n);
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return sum;
}

}  // namespace shelab
