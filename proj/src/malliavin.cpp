#include "shelab/malliavin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "shelab/heat_kernel.hpp"

namespace shelab {

namespace {
long step_index(double t, double dt, const char* what) {
  const long k = std::lround(t / dt);
  if (k < 0 || std::abs(double(k) * dt - t) > 1e-9 * std::max(1.0, t))
    throw std::invalid_argument(std::string(what) + " is not a step boundary");
  return k;
}
}  // namespace

MalliavinFrame simulate_derivative(const Trajectory& base, const Simulator& sim, double s,
                                   int z_index, double t) {
  if (!base.stored_noise || int(base.noise.size()) != base.steps)
    throw std::logic_error("simulate_derivative: base trajectory has no stored noise");
  const auto& grid = sim.grid();
  const double dt = grid.dt;
  const long ks = step_index(s, dt, "s");
  const long kt = step_index(t, dt, "t");
  if (!(ks < kt) || kt > base.steps)
    throw std::invalid_argument("simulate_derivative: need s < t within the stored range");
  if (z_index < 0 || z_index >= grid.total_sites())
    throw std::invalid_argument("simulate_derivative: site out of range");

  Field u(std::size_t(grid.total_sites()), 1.0);
  for (long k = 0; k < ks; ++k) sim.step(u, base.noise[std::size_t(k)]);

  Field v(u.size(), 0.0);
  v[std::size_t(z_index)] =
      sim.sigma().sigma(u[std::size_t(z_index)]) / std::pow(grid.dx, grid.dim);
  for (long k = ks; k < kt; ++k) sim.step_pair(u, v, base.noise[std::size_t(k)]);

  MalliavinFrame frame;
  frame.s = double(ks) * dt;
  frame.t = double(kt) * dt;
  frame.z_index = z_index;
  frame.values = std::move(v);
  return frame;
}

double nonpositive_fraction(std::span<const double> values, double rel_floor) {
  if (values.empty()) throw std::invalid_argument("nonpositive_fraction: empty field");
  if (!(rel_floor >= 0)) throw std::invalid_argument("nonpositive_fraction: floor must be >= 0");
  double mx = 0;
  for (double v : values) mx = std::max(mx, std::abs(v));
  const double cut = -rel_floor * mx;
  std::size_t neg = 0;
  for (double v : values)
    if (v <= cut) ++neg;
  return double(neg) / double(values.size());
}

ClarkOconeReport clark_ocone_check(const Simulator& sim, double s, int z_index, double t,
                                   RandomStream& base_rng, int n_continuations,
                                   std::uint64_t seed, double radius_stddevs, double floor) {
  if (n_continuations < 100)
    throw std::invalid_argument("clark_ocone_check: need >= 100 continuations");
  const auto& grid = sim.grid();
  const double dt = grid.dt;
  const long ks = step_index(s, dt, "s");
  const long kt = step_index(t, dt, "t");
  if (!(ks < kt)) throw std::invalid_argument("clark_ocone_check: need s < t");
  if (z_index < 0 || z_index >= grid.total_sites())
    throw std::invalid_argument("clark_ocone_check: site out of range");

  // Frozen past: one base path up to time s.
  Field u_s(std::size_t(grid.total_sites()), 1.0);
  {
    Field inc;
    for (long k = 0; k < ks; ++k) {
      sim.draw_increment(base_rng, inc);
      sim.step(u_s, inc);
    }
  }
  const double mass = sim.sigma().sigma(u_s[std::size_t(z_index)]);

  const std::size_t n = u_s.size();
  Field mean(n, 0.0), m2(n, 0.0);
  Field u, v, inc;
  for (int c = 0; c < n_continuations; ++c) {
    u = u_s;
    v.assign(n, 0.0);
    v[std::size_t(z_index)] = mass / std::pow(grid.dx, grid.dim);
    RandomStream rng(seed, std::uint64_t(c), "clark-ocone");
    for (long k = ks; k < kt; ++k) {
      sim.draw_increment(rng, inc);
      sim.step_pair(u, v, inc);
    }
    // online mean / second central moment
    for (std::size_t i = 0; i < n; ++i) {
      const double d = v[i] - mean[i];
      mean[i] += d / double(c + 1);
      m2[i] += d * (v[i] - mean[i]);
    }
  }

  const double tau = double(kt - ks) * dt;
  const double radius = radius_stddevs * std::sqrt(tau);
  const int M = grid.sites;
  const int zx = grid.dim == 1 ? z_index : z_index / M;
  const int zy = grid.dim == 1 ? 0 : z_index % M;

  ClarkOconeReport rep;
  rep.continuations = n_continuations;
  for (int jx = 0; jx < (grid.dim == 1 ? M : M); ++jx) {
    for (int jy = 0; jy < (grid.dim == 1 ? 1 : M); ++jy) {
      const double lx = grid.wrapped_lag(((jx - zx) % M + M) % M);
      const double ly = grid.dim == 1 ? 0.0 : grid.wrapped_lag(((jy - zy) % M + M) % M);
      const double dist = std::hypot(lx, ly);
      if (dist > radius) continue;
      std::vector<double> lag{lx};
      if (grid.dim == 2) lag.push_back(ly);
      const double target = heat_kernel(tau, lag) * mass;
      const std::size_t idx =
          grid.dim == 1 ? std::size_t(jx) : std::size_t(jx) * M + std::size_t(jy);
      const double denom = std::abs(target) + floor;
      const double rel = std::abs(mean[idx] - target) / denom;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.mc_se = std::sqrt(m2[idx] / double(n_continuations) / double(n_continuations - 1)) /
                    denom;
      }
    }
  }
  return rep;
}

double envelope_a(double eps, int dim, double kappa) {
  if (!(eps > 0 && eps < 1)) throw std::domain_error("envelope_a: eps must be in (0,1)");
  if (kappa < 0) throw std::domain_error("envelope_a: kappa must be nonnegative");
  if (kappa == 0) return std::numeric_limits<double>::infinity();
  return (1.0 - eps) * (1.0 - eps) / (std::pow(2.0, 0.5 * (dim + 6)) * kappa * kappa);
}

namespace {
ConstantValue exp_constant(const NoiseModel& model, double prefactor, double log_prefactor,
                           double t_mult, double t, double lambda_arg) {
  // prefactor * exp(t_mult * t * Lambda(lambda_arg)); Lambda(inf) = 0 treated
  // as the sigma == 0 degenerate case by the callers.
  ConstantValue out;
  const double lam = lambda_inverse(model, lambda_arg);
  out.log_value = log_prefactor + t_mult * t * lam;
  out.finite = out.log_value < std::log(std::numeric_limits<double>::max());
  out.value = out.finite ? prefactor * std::exp(t_mult * t * lam)
                         : std::numeric_limits<double>::infinity();
  return out;
}
}  // namespace

ConstantValue constant_c_tke(const NoiseModel& model, const DiffusionSpec& sigma, double t,
                             double k, double eps) {
  if (!(t > 0) || !(k >= 2)) throw std::domain_error("constant_c_tke: need t > 0, k >= 2");
  const double kappa = sigma.sigma0_abs_or_lip();
  const double a = envelope_a(eps, model.dim, kappa);
  if (!std::isfinite(a)) {
    // sigma == 0: the 1/0 := infinity convention
    ConstantValue out;
    out.value = std::numeric_limits<double>::infinity();
    out.log_value = std::numeric_limits<double>::infinity();
    out.finite = false;
    return out;
  }
  return exp_constant(model, 8.0 * kappa / std::pow(eps, 1.5),
                      std::log(8.0 * kappa) - 1.5 * std::log(eps), 2.0, t, a / k);
}

ConstantValue constant_c_tke_pam(const NoiseModel& model, double t, double k, double eps) {
  if (!(t > 0) || !(k >= 2)) throw std::domain_error("constant_c_tke_pam: need t > 0, k >= 2");
  if (!(eps > 0 && eps < 1)) throw std::domain_error("constant_c_tke_pam: eps must be in (0,1)");
  const double arg =
      (1.0 - eps) * (1.0 - eps) / (std::pow(2.0, 0.5 * (model.dim + 6)) * k);
  return exp_constant(model, 8.0 / std::pow(eps, 1.5), std::log(8.0) - 1.5 * std::log(eps), 2.0,
                      t, arg);
}

ConstantValue constant_c_star(const NoiseModel& model, double t, double k, double eps) {
  if (!(t > 0) || !(k >= 2)) throw std::domain_error("constant_c_star: need t > 0, k >= 2");
  if (!(eps > 0 && eps < 1)) throw std::domain_error("constant_c_star: eps must be in (0,1)");
  const double arg =
      (1.0 - eps) * (1.0 - eps) / (std::pow(2.0, 0.5 * (model.dim + 6)) * k);
  return exp_constant(model, 16.0 / (eps * eps), std::log(16.0) - 2.0 * std::log(eps), 3.0, t,
                      arg);
}

ThetaEstimate theta_estimate(std::span<const double> u_samples, const ObservableSpec& obs,
                             double k) {
  if (!(k > 4)) throw std::domain_error("theta_estimate: k must exceed 4");
  if (u_samples.size() < 100) throw std::invalid_argument("theta_estimate: need >= 100 samples");
  std::vector<double> p1, p2;
  p1.reserve(u_samples.size());
  p2.reserve(u_samples.size());
  int rejected = 0;
  for (double u : u_samples) {
    try {
      const double d1 = std::pow(std::abs(obs.dg(u)), k);
      const double d2 = std::pow(std::abs(obs.d2g(u)), k);
      p1.push_back(d1);
      p2.push_back(d2);
    } catch (const std::domain_error&) {
      ++rejected;
    }
  }
  if (p1.size() < 100) throw std::runtime_error("theta_estimate: too many rejected samples");
  const std::size_t n = p1.size();
  auto theta_of = [&](double m1, double m2) {
    const double n1 = std::pow(m1, 1.0 / k);
    const double n2 = std::pow(m2, 1.0 / k);
    return n1 * std::max(n1, n2);
  };
  const double s1 = std::accumulate(p1.begin(), p1.end(), 0.0);
  const double s2 = std::accumulate(p2.begin(), p2.end(), 0.0);
  ThetaEstimate est;
  est.k = k;
  est.n = int(n);
  est.rejected = rejected;
  est.value = theta_of(s1 / double(n), s2 / double(n));
  double jsum = 0, jsumsq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double th = theta_of((s1 - p1[i]) / double(n - 1), (s2 - p2[i]) / double(n - 1));
    jsum += th;
    jsumsq += th * th;
  }
  const double jmean = jsum / double(n);
  est.se = std::sqrt(std::max(0.0, (double(n) - 1.0) / double(n) * (jsumsq - double(n) * jmean * jmean)));
  return est;
}

double rate_bound_eval(double L, double lambda, double t, double window, double b_n, int dim,
                       std::optional<double> theta) {
  if (!(b_n > 0)) throw std::domain_error("rate_bound_eval: variance must be positive");
  if (!(window > 0) || !(L > 0)) throw std::domain_error("rate_bound_eval: need L, N > 0");
  const double th = theta.value_or(1.0);
  return L * th * std::exp(lambda * t) / (std::pow(window, 0.5 * dim) * b_n);
}

}  // namespace shelab
