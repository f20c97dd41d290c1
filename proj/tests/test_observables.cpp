#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "shelab/observables.hpp"
#include "shelab/oracles.hpp"
#include "shelab/rng.hpp"
#include "shelab/solver.hpp"
#include "shelab/stats.hpp"

using namespace shelab;

TEST_CASE("observable evaluators and domains") {
  const auto id = ObservableSpec::identity();
  CHECK(id.g(3.0) == 3.0);
  CHECK(id.dg(3.0) == 1.0);
  CHECK(id.d2g(3.0) == 0.0);
  CHECK(id.dsign == +1);

  const auto lg = ObservableSpec::logarithm();
  CHECK(lg.g(1.0) == 0.0);
  CHECK(lg.dg(1.0) == 1.0);
  CHECK(lg.d2g(1.0) == -1.0);
  CHECK(lg.dsign == +1);
  CHECK_THROWS_AS(lg.g(0.0), std::domain_error);
  CHECK_THROWS_AS(lg.g(-2.0), std::domain_error);

  const auto p2 = ObservableSpec::power(2.0);
  CHECK(p2.g(1.5) == doctest::Approx(2.25));
  CHECK(p2.dg(1.5) == doctest::Approx(3.0));
  CHECK(p2.d2g(1.5) == doctest::Approx(2.0));
  CHECK_THROWS_AS(p2.g(-1.0), std::domain_error);
  CHECK_THROWS_AS(ObservableSpec::power(0.0), std::invalid_argument);
}

TEST_CASE("spatial average: constants, scaling, windows, linearity") {
  LatticeGrid grid{1, 64, 0.25, 0.01};
  FieldFrame fr;
  fr.t = 0.5;
  fr.values.assign(grid.total_sites(), 2.0);

  const auto id = ObservableSpec::identity();
  const double N = 8.0;  // 32 sites
  const auto s0 = spatial_average(fr, grid, id, N, 2.0);
  CHECK(s0.value == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(s0.centering == 2.0);
  CHECK(s0.centering_analytic);

  const auto s1 = spatial_average(fr, grid, id, N, 1.5, false);
  CHECK(s1.value == doctest::Approx(std::sqrt(N) * 0.5).epsilon(1e-13));
  CHECK_FALSE(s1.centering_analytic);

  // initial condition with identity observable: exactly zero
  FieldFrame init;
  init.t = 0.0;
  init.values.assign(grid.total_sites(), 1.0);
  CHECK(spatial_average(init, grid, id, N, 1.0).value == 0.0);

  // linearity in g at fixed frame
  RandomStream rng(12, 0, "obs-lin");
  for (double& v : fr.values) v = 1.0 + 0.2 * rng.gaussian();
  ObservableSpec aff;
  aff.kind = ObservableKind::custom;
  aff.custom_g = [](double u) { return 2.0 * u + 3.0; };
  aff.custom_dg = [](double) { return 2.0; };
  aff.custom_d2g = [](double) { return 0.0; };
  const double sid = spatial_average(fr, grid, id, N, 1.0).value;
  const double saf = spatial_average(fr, grid, aff, N, 5.0).value;
  CHECK(saf == doctest::Approx(2.0 * sid).epsilon(1e-12));

  // base offset picks a different window
  const auto sa = spatial_average(fr, grid, id, N, 1.0, true, 0);
  const auto sb = spatial_average(fr, grid, id, N, 1.0, true, 32);
  CHECK(sa.value != sb.value);

  // window must be a positive multiple of dx that fits the grid
  CHECK_THROWS_AS(spatial_average(fr, grid, id, 0.3, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(spatial_average(fr, grid, id, 17.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(spatial_average(fr, grid, id, -1.0, 1.0), std::invalid_argument);

  // d = 2 scaling: value = N^{d/2} (mean - centering) = N * (...)
  LatticeGrid g2{2, 16, 0.5, 0.01};
  FieldFrame fr2;
  fr2.values.assign(g2.total_sites(), 3.0);
  const auto s2 = spatial_average(fr2, g2, id, 4.0, 2.0);
  CHECK(s2.value == doctest::Approx(4.0 * 1.0).epsilon(1e-13));
}

TEST_CASE("log observable propagates domain errors out of spatial_average") {
  LatticeGrid grid{1, 16, 0.25, 0.01};
  FieldFrame fr;
  fr.values.assign(grid.total_sites(), 1.0);
  fr.values[3] = -0.5;
  CHECK_THROWS_AS(spatial_average(fr, grid, ObservableSpec::logarithm(), 4.0, 0.0),
                  std::domain_error);
}

TEST_CASE("estimate_b: variance case, independence, refusal") {
  RandomStream rng(5, 0, "b-est");
  std::vector<double> x(400), y(400);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.gaussian();
    y[i] = rng.gaussian();
  }
  const auto vxx = estimate_b(x, x);
  double m = 0;
  for (double v : x) m += v;
  m /= double(x.size());
  double s2 = 0;
  for (double v : x) s2 += (v - m) * (v - m);
  s2 /= double(x.size() - 1);
  CHECK(vxx.value == doctest::Approx(s2).epsilon(1e-12));
  CHECK(vxx.n == 400);
  CHECK(vxx.se > 0);

  const auto vxy = estimate_b(x, y);
  CHECK(std::abs(vxy.value) <= 4.0 * vxy.se);

  std::vector<double> tiny(50, 1.0);
  CHECK_THROWS_AS(estimate_b(tiny, tiny), std::invalid_argument);
  std::vector<double> mismatched(400, 1.0), shorter(399, 1.0);
  CHECK_THROWS_AS(estimate_b(mismatched, shorter), std::invalid_argument);
}

TEST_CASE("lag covariance recovers a known stationary law") {
  // stationary Gaussian fields with covariance f_Delta of the gaussian noise
  LatticeGrid grid{1, 64, 0.25, 0.01};
  const auto model = NoiseModel::gaussian(1, 1.0);
  SpectralWorkspace ws(grid);
  const auto spectrum = noise_spectrum(model, grid, ws);
  const int R = 4000;
  std::vector<Field> fields(static_cast<std::size_t>(R));
  RandomStream rng(21, 0, "lagcov");
  for (auto& f : fields) ws.sample_stationary(spectrum, rng, f);

  const int max_lag = 16;
  const auto lc = lag_covariance(fields, fields, ObservableSpec::identity(), grid, max_lag);
  REQUIRE(lc.lag.size() == std::size_t(max_lag) + 1);
  CHECK(lc.dim == 1);
  CHECK(lc.dx == grid.dx);
  for (std::size_t i = 0; i < lc.lag.size(); ++i) {
    const double lag[1] = {lc.lag[i]};
    const double want = model.lattice_covariance(lag, grid.dx, grid.length());
    CHECK(std::abs(lc.cov[i] - want) <= 4.0 * lc.se[i] + 1e-12);
    CHECK(lc.weight[i] == (i == 0 ? 1.0 : 2.0));
  }

  CHECK_THROWS_AS(
      lag_covariance(fields, fields, ObservableSpec::identity(), grid, grid.sites),
      std::invalid_argument);
}

TEST_CASE("constant-sigma pipeline: b_n and b_limit agree with the closed form t") {
  // For sigma = sigma0 and dirac noise, B_t = sigma0^2 * t * f(R) = t exactly.
  LatticeGrid grid{1, 512, 0.0625, 0.125};
  const auto model = NoiseModel::dirac1d();
  const Simulator sim(grid, model, DiffusionSpec::constant(1.0));
  const double t = 0.5;
  const int R = 800;
  const double window = 16.0;

  std::vector<Field> fields(static_cast<std::size_t>(R));
  std::vector<double> s_values(static_cast<std::size_t>(R));
  const auto id = ObservableSpec::identity();
  for (int r = 0; r < R; ++r) {
    RandomStream rng(417, std::uint64_t(r), "obs-const");
    auto traj = sim.simulate(t, std::vector<double>{t}, rng);
    const FieldFrame& frame = traj.frames[0];
    s_values[std::size_t(r)] = spatial_average(frame, grid, id, window, 1.0).value;
    fields[std::size_t(r)] = std::move(traj.frames[0].values);
  }

  const auto bn = estimate_b(s_values, s_values);
  const int max_lag = int(std::lround(8.0 * std::sqrt(t) / grid.dx));
  const auto lc = lag_covariance(fields, fields, id, grid, max_lag);
  const auto report = make_covariance_report(t, t, id, window, bn, lc);

  CHECK(report.status == "ok");
  CHECK(report.tail_fraction < 0.1);
  CHECK(std::abs(report.b_limit - t) <= 3.0 * report.b_limit_se);
  CHECK(std::abs(report.b_n - report.b_limit) <=
        3.0 * std::sqrt(report.b_n_se * report.b_n_se + report.b_limit_se * report.b_limit_se) +
            0.02);  // finite-N window deficit ~ \int |x| C dx / N
  CHECK(report.g == "identity");
  CHECK(report.window == window);

  // integral against the analytic oracle: sum over lags of the oracle curve
  double oracle_integral = 0;
  for (std::size_t i = 0; i < lc.lag.size(); ++i) {
    const double lag[1] = {lc.lag[i]};
    oracle_integral +=
        lc.weight[i] * gaussian_oracle_covariance(model, 1.0, t, t, lag) * grid.dx;
  }
  CHECK(std::abs(report.b_limit - oracle_integral) <= 3.0 * report.b_limit_se);
}

TEST_CASE("pi weight: mass, bounds, decay, errors") {
  const double t = 0.5, s = 0.1, N = 4.0;
  // unit mass over y by lattice quadrature
  const double dy = 0.01;
  double mass = 0;
  for (double y = -12.0; y <= N + 12.0; y += dy) {
    const double yy[1] = {y};
    mass += pi_weight(N, t, s, yy, 1) * dy;
  }
  CHECK(std::abs(mass - 1.0) < 1e-8);

  const double yc[1] = {N / 2.0};
  CHECK(pi_weight(N, t, s, yc, 1) <= 1.0 / N + 1e-12);
  CHECK(pi_weight(N, t, s, yc, 1) > 0.0);
  const double far[1] = {N + 8.0 * std::sqrt(t - s) + 1.0};
  CHECK(pi_weight(N, t, s, far, 1) < 1e-8);

  // d=2 factorizes
  const double y2[2] = {1.0, 2.0};
  const double a1[1] = {1.0}, a2[1] = {2.0};
  CHECK(pi_weight(N, t, s, y2, 2) ==
        doctest::Approx(pi_weight(N, t, s, a1, 1) * pi_weight(N, t, s, a2, 1)).epsilon(1e-12));

  CHECK_THROWS_AS(pi_weight(N, 0.5, 0.5, yc, 1), std::domain_error);
  CHECK_THROWS_AS(pi_weight(N, 0.5, 0.7, yc, 1), std::domain_error);
}

TEST_CASE("variance lower bound: closed forms and limits") {
  const auto dirac = NoiseModel::dirac1d();
  const auto s1 = DiffusionSpec::constant(1.0);

  LowerBoundParams p3;
  p3.condition = 3;
  p3.delta = 0.1;
  p3.R = 1.0;
  // large window: correction vanishes, main term = delta/2^{d+1} = 0.025
  CHECK(variance_lower_bound(dirac, s1, p3, 1e6, 0.5) == doctest::Approx(0.025).epsilon(1e-9));
  // bound is nondecreasing in window and can be vacuous for tiny windows
  const double b16 = variance_lower_bound(dirac, s1, p3, 16.0, 0.5);
  const double b64 = variance_lower_bound(dirac, s1, p3, 64.0, 0.5);
  CHECK(b16 <= b64);
  CHECK(b64 <= 0.025 + 1e-12);
  // sigma(1) scales quadratically
  CHECK(variance_lower_bound(dirac, DiffusionSpec::constant(2.0), p3, 1e6, 0.5) ==
        doctest::Approx(0.1).epsilon(1e-9));

  LowerBoundParams p2;
  p2.condition = 2;
  p2.C = 1.0;
  CHECK(variance_lower_bound(dirac, s1, p2, 1e9, 0.5) == doctest::Approx(0.25).epsilon(1e-6));
  // t_N = N = o(N^2): bound over t_N stays positive and climbs toward C/2
  double prev_ratio = 0.0;
  for (int N = 16; N <= 512; N *= 2) {
    const double v = variance_lower_bound(dirac, s1, p2, double(N), double(N)) / double(N);
    CHECK(v > 0.0);
    CHECK(v >= prev_ratio);
    prev_ratio = v;
  }
  CHECK(prev_ratio > 0.4);

  LowerBoundParams bad;
  bad.condition = 7;
  CHECK_THROWS_AS(variance_lower_bound(dirac, s1, bad, 16.0, 0.5), std::invalid_argument);
  LowerBoundParams bad3;
  bad3.condition = 3;
  bad3.delta = -1.0;
  CHECK_THROWS_AS(variance_lower_bound(dirac, s1, bad3, 16.0, 0.5), std::domain_error);
  CHECK_THROWS_AS(variance_lower_bound(dirac, s1, p3, -4.0, 0.5), std::domain_error);
}

TEST_CASE("pam second moment oracle: monotonicity and series cross-check") {
  const auto dirac = NoiseModel::dirac1d();
  const double zero[1] = {0.0};
  double prev = 1.0;
  for (double t : {0.125, 0.25, 0.5, 1.0}) {
    const double m = pam_second_moment_oracle(dirac, t, zero);
    CHECK(m >= prev);
    prev = m;
  }
  // closed form 2 e^{t/4} Phi(sqrt(t/2)) for dirac d=1 at lag 0
  for (double t : {0.5, 1.0}) {
    const double want =
        2.0 * std::exp(t / 4.0) * 0.5 * std::erfc(-std::sqrt(t / 2.0) / std::sqrt(2.0));
    CHECK(pam_second_moment_oracle(dirac, t, zero) == doctest::Approx(want).epsilon(2e-4));
    CHECK(pam_second_moment_series_white1d(t) == doctest::Approx(want).epsilon(1e-10));
  }
  // small-t limit
  CHECK(pam_second_moment_oracle(dirac, 1e-6, zero) == doctest::Approx(1.0).epsilon(1e-2));
}
