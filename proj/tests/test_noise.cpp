#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "shelab/heat_kernel.hpp"
#include "shelab/noise.hpp"
#include "shelab/rng.hpp"
#include "shelab/spectral.hpp"

using namespace shelab;

namespace {
constexpr double kPi = std::numbers::pi;

// Direct 1-d quadrature of (f * tri_dx)(r): density convolved with the
// width-2dx unit-mass triangle, plus torus images.
double axis_cov_quad(double r, double dx, double L, auto density) {
  double acc = 0;
  const int steps = 4000;
  for (int img = -2; img <= 2; ++img) {
    const double rr = r + img * L;
    for (int i = 0; i < steps; ++i) {
      const double s = -dx + (i + 0.5) * (2.0 * dx / steps);
      acc += density(rr - s) * (1.0 - std::abs(s) / dx) / dx * (2.0 * dx / steps);
    }
  }
  return acc;
}
}  // namespace

TEST_CASE("philox known-answer vectors") {
  const auto zero = philox4x32({0, 0, 0, 0}, {0, 0});
  CHECK(zero[0] == 0x6627e8d5u);
  CHECK(zero[1] == 0xe169c58du);
  CHECK(zero[2] == 0xbc57ac4cu);
  CHECK(zero[3] == 0x9b00dbd8u);

  const auto pi_kat = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                 {0xa4093822u, 0x299f31d0u});
  CHECK(pi_kat[0] == 0xd16cfe09u);
  CHECK(pi_kat[1] == 0x94fdccebu);
  CHECK(pi_kat[2] == 0x5001e420u);
  CHECK(pi_kat[3] == 0x24126ea1u);
}

TEST_CASE("random streams are reproducible and purpose-separated") {
  RandomStream a(42, 7, "task"), b(42, 7, "task"), c(42, 7, "other"), d(42, 8, "task");
  CHECK(a.raw64() == b.raw64());
  CHECK(a.stream_id() == b.stream_id());
  CHECK(a.stream_id() != c.stream_id());
  CHECK(a.stream_id() != d.stream_id());
  double mean = 0;
  RandomStream g(1, 0, "gauss-moments");
  const int n = 200000;
  double m2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = g.gaussian();
    mean += x;
    m2 += x * x;
  }
  mean /= n;
  m2 /= n;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(double(n)));
  CHECK(std::abs(m2 - 1.0) < 4.0 * std::sqrt(2.0 / double(n)));
}

TEST_CASE("model validation and spectral densities") {
  const NoiseModel dirac2d{NoiseKind::dirac, 2};
  CHECK_THROWS_AS(dirac2d.validate(), std::invalid_argument);
  CHECK_THROWS_AS(NoiseModel::gaussian(1, -1.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(NoiseModel::exponential(3, 1.0).validate(), std::invalid_argument);

  const auto dirac = NoiseModel::dirac1d();
  const auto gauss = NoiseModel::gaussian(1, 1.0);
  const auto expo = NoiseModel::exponential(2, 1.5);
  CHECK(dirac.total_mass() == 1.0);
  CHECK(gauss.total_mass() == 1.0);
  CHECK(expo.total_mass() == 1.0);
  CHECK_FALSE(dirac.has_zero_atom());
  CHECK_FALSE(gauss.has_zero_atom());
  CHECK_FALSE(expo.has_zero_atom());

  const double z0[1] = {0.0};
  CHECK(dirac.spectral_density(z0) == 1.0);
  CHECK(gauss.spectral_density(z0) == 1.0);
  const double zr2[1] = {std::sqrt(2.0)};
  CHECK(gauss.spectral_density(zr2) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  const double z2[2] = {1.0, -2.0};
  const double lor = (1.5 * 1.5 / (1.5 * 1.5 + 1.0)) * (1.5 * 1.5 / (1.5 * 1.5 + 4.0));
  CHECK(expo.spectral_density(z2) == doctest::Approx(lor).epsilon(1e-12));
}

TEST_CASE("mass_cube matches closed forms") {
  const auto gauss = NoiseModel::gaussian(2, 1.0);
  const double phi = std::erf(1.0 / std::sqrt(2.0));  // P(|Z| <= 1)
  CHECK(gauss.mass_cube(1.0) == doctest::Approx(phi * phi).epsilon(1e-10));
  const auto expo = NoiseModel::exponential(1, 2.0);
  CHECK(expo.mass_cube(0.5) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-10));
  CHECK(NoiseModel::dirac1d().mass_cube(0.1) == 1.0);
}

TEST_CASE("lattice covariance: closed forms, quadrature cross-check, mass") {
  const double dx = 0.25, L = 16.0;

  // dirac: the triangle kernel itself
  const auto dirac = NoiseModel::dirac1d();
  for (double r : {0.0, 0.1, 0.25, 0.5}) {
    const double lag[1] = {r};
    const double want = r < dx ? (1.0 - r / dx) / dx : 0.0;
    CHECK(dirac.lattice_covariance(lag, dx, L) == doctest::Approx(want).epsilon(1e-12));
  }

  // density kinds vs direct quadrature
  const auto gauss = NoiseModel::gaussian(1, 0.7);
  const auto expo = NoiseModel::exponential(1, 1.3);
  for (double r : {0.0, 0.25, 0.75, 2.0}) {
    const double lag[1] = {r};
    const double gq = axis_cov_quad(r, dx, L, [](double x) {
      const double xx[1] = {x};
      return heat_kernel(0.7, xx);
    });
    CHECK(gauss.lattice_covariance(lag, dx, L) == doctest::Approx(gq).epsilon(1e-6));
    const double eq =
        axis_cov_quad(r, dx, L, [](double x) { return 0.65 * std::exp(-1.3 * std::abs(x)); });
    CHECK(expo.lattice_covariance(lag, dx, L) == doctest::Approx(eq).epsilon(1e-6));
  }

  // d=2 factorizes over axes
  const auto expo2 = NoiseModel::exponential(2, 1.3);
  const double lag2[2] = {0.5, 1.25};
  const double a[1] = {0.5}, b[1] = {1.25};
  CHECK(expo2.lattice_covariance(lag2, dx, L) ==
        doctest::Approx(expo.lattice_covariance(a, dx, L) * expo.lattice_covariance(b, dx, L))
            .epsilon(1e-12));

  // discrete total mass: sum over the torus times cell volume
  for (const auto& m : {gauss, expo, dirac}) {
    LatticeGrid grid{1, 64, dx, 0.01};
    double mass = 0;
    for (int j = 0; j < grid.sites; ++j) {
      const double lag[1] = {grid.wrapped_lag(j)};
      mass += m.lattice_covariance(lag, dx, grid.length()) * dx;
    }
    CHECK(mass == doctest::Approx(m.total_mass()).epsilon(1e-8));
  }
}

TEST_CASE("dalang integral: closed forms and divergence classification") {
  const auto dirac = NoiseModel::dirac1d();

  const auto v0 = dalang_integral(dirac, 0.0);
  REQUIRE(v0.status == QuadratureValue::Status::finite);
  CHECK(v0.value == doctest::Approx(kPi).epsilon(1e-9));

  // closed form sqrt(pi)*Gamma(1/2 - a)/Gamma(1 - a) for the dirac kind
  for (double a : {0.1, 0.25, 0.45}) {
    const auto v = dalang_integral(dirac, a);
    REQUIRE(v.status == QuadratureValue::Status::finite);
    const double want = std::sqrt(kPi) * std::tgamma(0.5 - a) / std::tgamma(1.0 - a);
    CHECK(v.value == doctest::Approx(want).epsilon(1e-8));
  }

  CHECK(dalang_integral(dirac, 0.5).status == QuadratureValue::Status::divergent);
  CHECK(dalang_integral(dirac, 1.0).status == QuadratureValue::Status::divergent);

  // density kinds converge for every alpha in [0,1]
  for (double a : {0.0, 0.5, 1.0}) {
    CHECK(dalang_integral(NoiseModel::gaussian(2, 1.0), a).status ==
          QuadratureValue::Status::finite);
    CHECK(dalang_integral(NoiseModel::exponential(2, 1.0), a).status ==
          QuadratureValue::Status::finite);
  }

  // gaussian d=1 alpha=0: integral of e^{-z^2/2}/(1+z^2) dz has the closed
  // form pi * e^{1/2} * erfc(1/sqrt(2)).
  const auto g = dalang_integral(NoiseModel::gaussian(1, 1.0), 0.0);
  REQUIRE(g.status == QuadratureValue::Status::finite);
  CHECK(g.value ==
        doctest::Approx(kPi * std::exp(0.5) * std::erfc(1.0 / std::sqrt(2.0))).epsilon(1e-8));

  CHECK_THROWS_AS(dalang_integral(dirac, -0.1), std::domain_error);
  CHECK_THROWS_AS(dalang_integral(dirac, 1.2), std::domain_error);
}

TEST_CASE("upsilon closed form, monotonicity, and inverse round trip") {
  const auto dirac = NoiseModel::dirac1d();
  for (double lam : {0.1, 0.5, 1.0, 2.0, 10.0})
    CHECK(std::abs(upsilon(dirac, lam) - 1.0 / std::sqrt(2.0 * lam)) <= 1e-10);

  for (const auto& m :
       {NoiseModel::dirac1d(), NoiseModel::gaussian(2, 1.0), NoiseModel::exponential(1, 2.0)}) {
    CHECK(upsilon(m, 1.0) > upsilon(m, 4.0));
    for (double lam : {0.1, 1.0, 10.0}) CHECK(upsilon(m, lam) > upsilon(m, 2.0 * lam));
  }

  CHECK(lambda_inverse(dirac, 1.0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(lambda_inverse(dirac, 0.5) == doctest::Approx(2.0).epsilon(1e-10));
  for (const auto& m : {NoiseModel::dirac1d(), NoiseModel::gaussian(1, 1.0)})
    for (double y : {0.1, 1.0, 10.0})
      CHECK(std::abs(upsilon(m, lambda_inverse(m, y)) - y) <= 1e-10 * std::max(1.0, y));

  CHECK_THROWS_AS(upsilon(dirac, 0.0), std::domain_error);
  CHECK_THROWS_AS(upsilon(dirac, -1.0), std::domain_error);
  CHECK_THROWS_AS(lambda_inverse(dirac, 0.0), std::domain_error);
}

TEST_CASE("increment sampler: covariance curve, whiteness, wrapper") {
  const int draws = 100000;
  for (const auto& model : {NoiseModel::dirac1d(), NoiseModel::gaussian(1, 1.0),
                            NoiseModel::exponential(1, 2.0)}) {
    LatticeGrid grid{1, 32, 0.25, 0.02};
    SpectralWorkspace ws(grid);
    auto spectrum = noise_spectrum(model, grid, ws);
    for (double& s : spectrum) s *= grid.dt;

    RandomStream rng(99, 0, "noise-curve");
    const int n = grid.sites;
    std::vector<double> acc(std::size_t(n), 0.0), mean(std::size_t(n), 0.0), prev;
    Field x;
    double cross = 0;  // same-site correlation between consecutive draws
    for (int d = 0; d < draws; ++d) {
      ws.sample_stationary(spectrum, rng, x);
      for (int j = 0; j < n; ++j) {
        acc[std::size_t(j)] += x[0] * x[std::size_t(j)];
        mean[std::size_t(j)] += x[std::size_t(j)];
      }
      if (!prev.empty()) cross += prev[0] * x[0];
      prev = x;
    }
    const double var0 = acc[0] / draws;
    for (int j = 0; j < n; ++j) {
      const double lag[1] = {grid.wrapped_lag(j)};
      const double want = grid.dt * model.lattice_covariance(lag, grid.dx, grid.length());
      // SE of a product-moment estimate; var0 bounds both factors
      const double se = std::sqrt((var0 * var0 + want * want) / draws);
      CHECK(std::abs(acc[std::size_t(j)] / draws - want) <= 5.0 * se);
      CHECK(std::abs(mean[std::size_t(j)] / draws) <= 5.0 * std::sqrt(var0 / draws));
    }
    CHECK(std::abs(cross / (draws - 1)) <= 4.0 * var0 / std::sqrt(double(draws - 1)));

    // dirac: same-site variance dt/dx within 2%, neighbours uncorrelated
    if (model.kind == NoiseKind::dirac) {
      CHECK(var0 == doctest::Approx(grid.dt / grid.dx).epsilon(0.02));
      CHECK(std::abs(acc[1] / draws) <= 4.0 * var0 / std::sqrt(double(draws)));
    }
  }

  // convenience wrapper agrees with the cached-workspace path
  LatticeGrid grid{1, 32, 0.25, 0.02};
  RandomStream r1(5, 1, "wrap"), r2(5, 1, "wrap");
  const auto inc = sample_increment(NoiseModel::dirac1d(), grid, 0.02, r1);
  SpectralWorkspace ws(grid);
  auto spectrum = noise_spectrum(NoiseModel::dirac1d(), grid, ws);
  for (double& s : spectrum) s *= 0.02;
  Field y;
  ws.sample_stationary(spectrum, r2, y);
  REQUIRE(inc.values.size() == y.size());
  for (std::size_t j = 0; j < y.size(); ++j) CHECK(inc.values[j] == doctest::Approx(y[j]));
  CHECK(inc.dt == 0.02);
  RandomStream r3(5, 1, "wrap");
  CHECK_THROWS_AS(sample_increment(NoiseModel::dirac1d(), grid, -1.0, r3), std::domain_error);
}

TEST_CASE("d=2 sampler covariance spot check") {
  const auto model = NoiseModel::gaussian(2, 1.0);
  LatticeGrid grid{2, 16, 0.5, 0.05};
  SpectralWorkspace ws(grid);
  auto spectrum = noise_spectrum(model, grid, ws);
  for (double& s : spectrum) s *= grid.dt;
  RandomStream rng(17, 0, "noise-2d");
  const int draws = 20000;
  double v00 = 0, v01 = 0, v11 = 0;
  Field x;
  for (int d = 0; d < draws; ++d) {
    ws.sample_stationary(spectrum, rng, x);
    v00 += x[0] * x[0];
    v01 += x[0] * x[1];                          // lag (0, dx)
    v11 += x[0] * x[std::size_t(grid.sites) + 1];  // lag (dx, dx)
  }
  v00 /= draws;
  v01 /= draws;
  v11 /= draws;
  const double l00[2] = {0, 0}, l01[2] = {0, grid.dx}, l11[2] = {grid.dx, grid.dx};
  const double w00 = grid.dt * model.lattice_covariance(l00, grid.dx, grid.length());
  const double w01 = grid.dt * model.lattice_covariance(l01, grid.dx, grid.length());
  const double w11 = grid.dt * model.lattice_covariance(l11, grid.dx, grid.length());
  const double se = 2.0 * w00 / std::sqrt(double(draws));
  CHECK(std::abs(v00 - w00) <= 5.0 * se);
  CHECK(std::abs(v01 - w01) <= 5.0 * se);
  CHECK(std::abs(v11 - w11) <= 5.0 * se);
}
