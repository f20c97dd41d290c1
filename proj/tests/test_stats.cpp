// Statistical toolbox: calibrated KS normality test, TV proxy distance,
// normal-pair TV bound, log-log rate fits, and the composite campaign checks.
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "doctest.h"
#include "shelab/rng.hpp"
#include "shelab/special.hpp"
#include "shelab/stats.hpp"

using namespace shelab;

namespace {

std::vector<double> gaussian_draws(std::uint64_t seed, std::uint64_t stream, const char* purpose,
                                   std::size_t n, double mean = 0.0, double sd = 1.0) {
  RandomStream rng(seed, stream, purpose);
  std::vector<double> xs(n);
  for (double& x : xs) x = mean + sd * rng.gaussian();
  return xs;
}

}  // namespace

TEST_CASE("mean, SE and OLS helpers") {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  CHECK(mean_of(xs) == doctest::Approx(2.5).epsilon(1e-15));
  // sum of squared deviations is 5, so SE = sqrt(5 / (4*3))
  CHECK(se_of_mean(xs) == doctest::Approx(std::sqrt(5.0 / 12.0)).epsilon(1e-14));

  const std::vector<double> x{1.0, 2.0, 3.0}, y{2.0, 4.0, 6.0};
  CHECK(ols_slope(x, y) == doctest::Approx(2.0).epsilon(1e-14));

  CHECK_THROWS_AS(mean_of(std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(se_of_mean(std::vector<double>{1.0}), std::invalid_argument);
  CHECK_THROWS_AS(ols_slope(x, std::vector<double>{1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(ols_slope(std::vector<double>{1.0, 1.0}, std::vector<double>{1.0, 2.0}),
                  std::invalid_argument);
}

TEST_CASE("KS statistic: hand value, scale invariance, errors") {
  // Two-point sample {-1, 1}: the fitted scale is 1, so
  // D = Phi(1) - 1/2 at both jump points.
  std::vector<double> two;
  for (int i = 0; i < 4; ++i) {
    two.push_back(-1.0);
    two.push_back(1.0);
  }
  const double want = normal_cdf(1.0) - 0.5;
  CHECK(ks_statistic_normal(two) == doctest::Approx(want).epsilon(1e-12));

  // The reference variance is the second sample moment, so rescaling every
  // sample leaves the statistic unchanged.
  auto xs = gaussian_draws(11, 0, "ks-scale", 500);
  auto scaled = xs;
  for (double& v : scaled) v *= 7.25;
  CHECK(ks_statistic_normal(xs) == doctest::Approx(ks_statistic_normal(scaled)).epsilon(1e-13));

  CHECK_THROWS_AS(ks_statistic_normal(std::vector<double>(4, 1.0)), std::invalid_argument);
  CHECK_THROWS_AS(ks_statistic_normal(std::vector<double>(16, 0.0)), std::invalid_argument);
}

TEST_CASE("normality test: deterministic verdicts, null acceptance, mean-shift rejection") {
  auto xs = gaussian_draws(12, 0, "ks-normal", 1000);
  const auto v1 = normality_test(xs, 0.01);
  const auto v2 = normality_test(xs, 0.01);
  CHECK(v1.statistic == v2.statistic);
  CHECK(v1.p_value == v2.p_value);
  CHECK(v1.pass == v2.pass);
  CHECK(v1.n == 1000);
  CHECK(v1.pass);

  // A variance change alone cannot trip the scale-fitted test ...
  auto wide = gaussian_draws(12, 1, "ks-wide", 1000, 0.0, 3.0);
  CHECK(normality_test(wide, 0.01).pass);
  // ... but a mean shift of one standard deviation is decisively rejected.
  auto shifted = gaussian_draws(12, 2, "ks-shift", 1000, 1.0, 1.0);
  CHECK_FALSE(normality_test(shifted, 0.01).pass);
  // So is a strongly skewed sample (centered lognormal).
  std::vector<double> skew = gaussian_draws(12, 3, "ks-skew", 1000);
  for (double& v : skew) v = std::exp(v) - std::exp(0.5);
  CHECK_FALSE(normality_test(skew, 0.01).pass);

  CHECK_THROWS_AS(normality_test(xs, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(normality_test(xs, 1.0), std::invalid_argument);
}

TEST_CASE("normality test size calibration at levels 0.01 and 0.05") {
  // Under a true normal null the rejection rate must sit at the nominal
  // level: within +-beta/2 over 200 independent runs.  The run seed is fixed,
  // so the counts are a deterministic regression value; a miscalibrated table
  // (e.g. critical values ignoring the fitted scale) rejects at several times
  // the nominal rate and fails far outside the window at any seed.
  const int runs = 200;
  const std::size_t n = 200;
  int rej01 = 0, rej05 = 0;
  for (int r = 0; r < runs; ++r) {
    auto xs = gaussian_draws(2033, std::uint64_t(r), "null-cal", n);
    const auto v = normality_test(xs, 0.01);
    if (v.p_value < 0.01) ++rej01;
    if (v.p_value < 0.05) ++rej05;
  }
  const double rate01 = double(rej01) / runs;
  const double rate05 = double(rej05) / runs;
  CHECK(rate01 >= 0.005 - 1e-12);
  CHECK(rate01 <= 0.015 + 1e-12);
  CHECK(rate05 >= 0.025 - 1e-12);
  CHECK(rate05 <= 0.075 + 1e-12);
}

TEST_CASE("distance to gaussian: null level, discrimination, Pinsker-type bound") {
  // True normals: the bias-corrected proxy sits at zero within control noise.
  auto xs = gaussian_draws(31, 0, "dist-null", 2000);
  const auto d0 = distance_to_gaussian(xs);
  CHECK(std::abs(d0.corrected) <= 4.0 * d0.control_sd);
  CHECK(d0.bins >= 8);
  CHECK(d0.bias > 0);

  // A unit mean shift is an order of magnitude above the control spread.
  auto shifted = gaussian_draws(31, 1, "dist-shift", 2000, 1.0, 1.0);
  const auto d1 = distance_to_gaussian(shifted);
  CHECK(d1.corrected > 10.0 * d1.control_sd);

  // Normal-vs-normal: the proxy respects the TV bound for variance pairs.
  for (double c1 : {1.21, 2.0}) {
    auto ys = gaussian_draws(31, c1 == 2.0 ? 2 : 3, "dist-pair", 4000, 0.0, std::sqrt(c1));
    const auto d = distance_to_gaussian(ys, 1.0);
    CHECK(d.corrected <= tv_normals_bound(c1, 1.0) + 3.0 * d.control_sd);
  }

  CHECK_THROWS_AS(distance_to_gaussian(std::vector<double>(8, 1.0)), std::invalid_argument);
  CHECK_THROWS_AS(distance_to_gaussian(xs, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(distance_to_gaussian(std::vector<double>(64, 0.0)), std::invalid_argument);
}

TEST_CASE("normal-pair total variation bound") {
  CHECK(tv_normals_bound(2.0, 1.0) == 0.5);
  CHECK(tv_normals_bound(1.0, 2.0) == 0.5);
  CHECK(tv_normals_bound(1.21, 1.0) == doctest::Approx(0.22912878474779199).epsilon(1e-14));
  CHECK(tv_normals_bound(3.0, 3.0) == 0.0);
  CHECK_THROWS_AS(tv_normals_bound(0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(tv_normals_bound(1.0, -2.0), std::domain_error);
}

TEST_CASE("rate fit: exact power law, scale equivariance, errors") {
  const std::vector<double> N{32, 64, 128, 256, 512};
  std::vector<double> dist;
  for (double n : N) dist.push_back(3.0 * std::pow(n, -0.5));

  const auto fit = rate_fit(N, dist);
  CHECK(fit.slope == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(fit.used == 5);
  CHECK(fit.excluded == 0);
  // Zero residuals: the bootstrap CI collapses onto the point estimate.
  CHECK(fit.ci_lo == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(fit.ci_hi == doctest::Approx(-0.5).epsilon(1e-12));

  // Multiplying the distances moves the intercept only.
  std::vector<double> dist10;
  for (double d : dist) dist10.push_back(10.0 * d);
  const auto fit10 = rate_fit(N, dist10);
  CHECK(std::abs(fit10.slope - fit.slope) <= 1e-12);
  CHECK(fit10.intercept == doctest::Approx(fit.intercept + std::log(10.0)).epsilon(1e-12));

  // Nonpositive distances are excluded (and counted), rest of the fit intact.
  auto dist_holed = dist;
  dist_holed[1] = 0.0;
  const auto fit_holed = rate_fit(N, dist_holed);
  CHECK(fit_holed.excluded == 1);
  CHECK(fit_holed.used == 4);
  CHECK(fit_holed.slope == doctest::Approx(-0.5).epsilon(1e-12));

  // Noisy synthetic decay: slope recovered within the bootstrap CI.
  RandomStream rng(47, 0, "rate-noise");
  std::vector<double> noisy;
  for (double n : N) noisy.push_back(std::pow(n, -0.5) * std::exp(0.05 * rng.gaussian()));
  const auto nf = rate_fit(N, noisy);
  CHECK(nf.ci_lo <= -0.5);
  CHECK(nf.ci_hi >= nf.ci_lo);
  CHECK(nf.slope > -1.0);
  CHECK(nf.slope < 0.0);

  CHECK_THROWS_AS(rate_fit(std::vector<double>{32, 64}, std::vector<double>{1.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(rate_fit(std::vector<double>{32, 64, 128}, std::vector<double>{1, 1, 1}),
                  std::invalid_argument);  // < 4 distinct windows
  CHECK_THROWS_AS(
      rate_fit(std::vector<double>{32, 40, 50, 64}, std::vector<double>{1, 1, 1, 1}),
      std::invalid_argument);  // spans less than a decade
  CHECK_THROWS_AS(
      rate_fit(std::vector<double>{-1, 40, 50, 640}, std::vector<double>{1, 1, 1, 1}),
      std::invalid_argument);
}

TEST_CASE("joint gaussian limit check on synthetic correlated normals") {
  const double rho = 0.6;
  const std::size_t n = 1500;
  std::vector<std::vector<double>> samples(n);
  RandomStream rng(99, 0, "fclt-syn");
  for (auto& row : samples) {
    const double z1 = rng.gaussian(), z2 = rng.gaussian();
    row = {z1, rho * z1 + std::sqrt(1.0 - rho * rho) * z2};
  }
  GaussianLimitSpec target;
  target.times = {0.3, 0.6};
  target.cov = {{1.0, rho}, {rho, 1.0}};
  target.cov_se = {{0.0, 0.0}, {0.0, 0.0}};
  const std::vector<std::vector<double>> projections{{1.0, 0.0}, {0.0, 1.0}};

  const auto res = fclt_check(samples, target, 0.01, projections);
  CHECK(res.cov_pass);
  CHECK(res.marginals_pass);
  CHECK(res.pass);
  CHECK(res.entries.size() == 3);
  CHECK(res.marginals.size() == 2);

  // A target covariance off by a factor of two is rejected.
  GaussianLimitSpec wrong = target;
  wrong.cov = {{2.0, rho}, {rho, 2.0}};
  CHECK_FALSE(fclt_check(samples, wrong, 0.01, projections).cov_pass);

  // Shape errors.
  CHECK_THROWS_AS(
      fclt_check(std::vector<std::vector<double>>(50, {0.0, 0.0}), target, 0.01, projections),
      std::invalid_argument);
  auto ragged = samples;
  ragged[3] = {1.0};
  CHECK_THROWS_AS(fclt_check(ragged, target, 0.01, projections), std::invalid_argument);
  GaussianLimitSpec bad = target;
  bad.cov.pop_back();
  CHECK_THROWS_AS(fclt_check(samples, bad, 0.01, projections), std::invalid_argument);
  const std::vector<std::vector<double>> bad_proj{{1.0}};
  CHECK_THROWS_AS(fclt_check(samples, target, 0.01, bad_proj), std::invalid_argument);
}

TEST_CASE("moment-modulus check recovers synthetic exponents") {
  const double k = 2.0, gamma_delta = 0.45;
  const std::vector<double> gaps{0.0125, 0.025, 0.05, 0.1, 0.2};
  const std::vector<double> windows{64, 128, 256};

  // Deterministic surrogate with |S(t+g)-S(t)| = g^{0.45} and
  // |S| = N^{-1/2}: exponents k*0.45 = 0.9 and -k/2 = -1 exactly.
  std::vector<std::vector<double>> per_gap, per_window;
  for (double g : gaps) per_gap.push_back({std::pow(g, 0.45), -std::pow(g, 0.45)});
  for (double w : windows) per_window.push_back({2.0 / std::sqrt(w), -2.0 / std::sqrt(w)});
  const auto res = holder_moment_check(gaps, per_gap, windows, per_window, k, gamma_delta, 1);
  CHECK(res.gap_exponent == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(res.window_exponent == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(res.pass);

  // Brownian-like surrogate: increments N(0, g), so the variance-level gap
  // exponent is 1 and the window exponent stays -1.
  std::vector<std::vector<double>> bm_gap;
  for (std::size_t i = 0; i < gaps.size(); ++i)
    bm_gap.push_back(gaussian_draws(7, i, "holder-bm", 4000, 0.0, std::sqrt(gaps[i])));
  const auto bm = holder_moment_check(gaps, bm_gap, windows, per_window, k, gamma_delta, 1);
  CHECK(bm.gap_exponent > 0.9);
  CHECK(bm.gap_exponent < 1.1);
  CHECK(bm.pass);

  // Gap moments that do not shrink with the gap fail the modulus bound.
  std::vector<std::vector<double>> flat(gaps.size(), std::vector<double>{1.0, -1.0});
  CHECK_FALSE(holder_moment_check(gaps, flat, windows, per_window, k, gamma_delta, 1).pass);

  CHECK_THROWS_AS(holder_moment_check(std::vector<double>{0.1, 0.2}, per_gap, windows,
                                      per_window, k, gamma_delta, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(holder_moment_check(gaps, per_gap, std::vector<double>{64, 128}, per_window,
                                      k, gamma_delta, 1),
                  std::invalid_argument);
}

TEST_CASE("association check on correlated gaussian samples") {
  const double rho = 0.5;
  const std::size_t n = 2000;
  std::vector<std::vector<double>> samples(n);
  RandomStream rng(123, 0, "assoc-syn");
  for (auto& row : samples) {
    const double z1 = rng.gaussian(), z2 = rng.gaussian();
    row = {z1, rho * z1 + std::sqrt(1.0 - rho * rho) * z2};
  }

  std::vector<MonotoneFunctional> fns;
  fns.push_back({"x0", [](std::span<const double> x) { return x[0]; }, true});
  fns.push_back({"x1", [](std::span<const double> x) { return x[1]; }, true});
  fns.push_back({"-x0", [](std::span<const double> x) { return -x[0]; }, false});
  fns.push_back({"-x1", [](std::span<const double> x) { return -x[1]; }, false});
  const std::vector<std::pair<int, int>> pairs{{0, 1}, {2, 3}, {0, 3}};

  // Without an oracle: positive-corr field passes every monotone pair
  // (both-increasing and both-decreasing give +rho, mixed gives -rho which
  // is accepted on the <= side).
  const auto res = association_check(samples, fns, pairs, {});
  CHECK(res.pass);
  CHECK(res.pairs.size() == 3);
  CHECK(res.pairs[0].statistic == doctest::Approx(rho).epsilon(0.15));
  CHECK(res.pairs[1].statistic == doctest::Approx(rho).epsilon(0.15));
  CHECK(res.pairs[2].statistic == doctest::Approx(-rho).epsilon(0.15));

  // Correct oracle values pass, a wrong oracle fails.
  const std::vector<double> oracle{rho, rho, -rho};
  CHECK(association_check(samples, fns, pairs, oracle).pass);
  const std::vector<double> wrong{rho, rho, +rho};
  CHECK_FALSE(association_check(samples, fns, pairs, wrong).pass);

  // Functional declared nondecreasing but actually decreasing: refused.
  std::vector<MonotoneFunctional> lying;
  lying.push_back({"bad", [](std::span<const double> x) { return -x[0]; }, true});
  const std::vector<std::pair<int, int>> self{{0, 0}};
  CHECK_THROWS_AS(association_check(samples, lying, self, {}), std::invalid_argument);

  // Input validation.
  CHECK_THROWS_AS(association_check(std::vector<std::vector<double>>(50, {0.0, 0.0}), fns,
                                    pairs, {}),
                  std::invalid_argument);
  auto ragged = samples;
  ragged[1] = {1.0};
  CHECK_THROWS_AS(association_check(ragged, fns, pairs, {}), std::invalid_argument);
  const std::vector<std::pair<int, int>> oob{{0, 9}};
  CHECK_THROWS_AS(association_check(samples, fns, oob, {}), std::invalid_argument);
  const std::vector<double> long_oracle{1, 2, 3, 4};
  CHECK_THROWS_AS(association_check(samples, fns, pairs, long_oracle), std::invalid_argument);
}

TEST_CASE("growing-window normality check") {
  const std::vector<double> windows{64, 128, 256};
  std::vector<std::vector<double>> good;
  for (std::size_t i = 0; i < windows.size(); ++i)
    good.push_back(gaussian_draws(55, i, "tn-good", 800));
  const auto ok = tn_clt_check(windows, good, 0.01);
  CHECK(ok.pass);
  CHECK(ok.per_window.size() == 3);
  CHECK(ok.distances.size() == 3);
  CHECK(ok.per_window.back().pass);

  // Strong skew at the largest window sinks the verdict.
  auto bad = good;
  for (double& v : bad.back()) v = std::exp(v) - std::exp(0.5);
  CHECK_FALSE(tn_clt_check(windows, bad, 0.01).pass);

  CHECK_THROWS_AS(tn_clt_check(std::vector<double>{64}, std::vector<std::vector<double>>{good[0]},
                               0.01),
                  std::invalid_argument);
  CHECK_THROWS_AS(tn_clt_check(windows, std::vector<std::vector<double>>{good[0]}, 0.01),
                  std::invalid_argument);
}
