#pragma once
// Statistical verification toolbox: Monte-Carlo-calibrated KS normality test,
// bias-corrected histogram-L1 distance to a reference normal, the normal-pair
// total-variation bound, log-log rate fits with bootstrap CIs, and the
// composite checks used by the campaigns (FCLT covariance, Holder moduli,
// association, growing-time CLT).

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace shelab {

struct TestVerdict {
  std::string name;
  double statistic = 0;
  double p_value = 0;
  double threshold = 0;  // level or tolerance the verdict was taken at
  bool pass = false;
  int n = 0;
};

// Kolmogorov-Smirnov distance of `samples` to N(0, sigma^2) with sigma^2 the
// second sample moment about 0 (mean pinned at 0); the null distribution of
// the statistic is calibrated by Monte Carlo at the same sample size
// (Lilliefors-style).  Tables are cached per size and seeded independently of
// campaign seeds.
TestVerdict normality_test(std::span<const double> samples, double level,
                           int calibration_reps = 4000);

// Raw KS statistic (exposed for the calibration tests).
double ks_statistic_normal(std::span<const double> samples);

// Histogram-L1/2 proxy for the total-variation distance between the law of
// `samples` and N(0, variance) (sample second moment when not given).
// Scott-rule bins; `bias` is the mean proxy value over pure-normal control
// runs of the same size (subtracted), `control_sd` their spread.
struct DistanceResult {
  double raw = 0;
  double bias = 0;
  double corrected = 0;  // raw - bias (can be <= 0 within noise)
  double control_sd = 0;
  int bins = 0;
};
DistanceResult distance_to_gaussian(std::span<const double> samples,
                                    std::optional<double> variance = std::nullopt,
                                    int control_reps = 200);

// d_TV[N(0,c1), N(0,c2)] <= (1/2) sqrt((c1 - c2)/c2) for 0 < c2 < c1
// (arguments in either order; equal variances give 0).
double tv_normals_bound(double c1, double c2);

// OLS fit of log(distance) on log(N) with a residual-bootstrap percentile CI.
// Requires >= 4 distinct N spanning at least one decade; nonpositive distances
// are excluded (count reported).
struct RateFit {
  double slope = 0, intercept = 0;
  double ci_lo = 0, ci_hi = 0;
  int used = 0, excluded = 0;
};
RateFit rate_fit(std::span<const double> window, std::span<const double> distance,
                 int bootstrap_reps = 2000, std::uint64_t seed = 0x5eedf17u);

// Joint Gaussian-limit check: entrywise |emp_cov - target| <= 3 * combined SE
// and each configured projection passes the calibrated KS test.
struct GaussianLimitSpec {
  std::vector<double> times;
  std::vector<std::vector<double>> cov;     // target covariance (limit estimate)
  std::vector<std::vector<double>> cov_se;  // its SEs
};
struct FcltResult {
  bool cov_pass = false;
  bool marginals_pass = false;
  bool pass = false;
  std::vector<TestVerdict> entries;    // covariance comparisons
  std::vector<TestVerdict> marginals;  // projection normality
};
FcltResult fclt_check(std::span<const std::vector<double>> joint_samples,
                      const GaussianLimitSpec& target, double level,
                      std::span<const std::vector<double>> projections);

// Moment-modulus check: fits log E|S(t1+gap) - S(t1)|^k against log gap (fixed
// N) and against log N (fixed gap).  Passes when the gap exponent is at least
// 0.8 * k * gamma_delta and the N exponent is within +-0.2 of -k d/2.
struct HolderResult {
  double gap_exponent = 0;
  double window_exponent = 0;
  bool pass = false;
};
HolderResult holder_moment_check(std::span<const double> gaps,
                                 std::span<const std::vector<double>> diff_samples_per_gap,
                                 std::span<const double> windows,
                                 std::span<const std::vector<double>> diff_samples_per_window,
                                 double k, double gamma_delta, int dim);

// Association: every configured pair of coordinatewise-monotone functionals
// must have covariance >= -3 SE (and match supplied oracle values within 3 SE
// when given).  Functionals are declared monotone and spot-checked on random
// coordinate pairs; non-monotone ones are refused.
struct MonotoneFunctional {
  std::string name;
  std::function<double(std::span<const double>)> eval;
  bool nondecreasing = true;
};
struct AssociationResult {
  bool pass = false;
  std::vector<TestVerdict> pairs;
};
AssociationResult association_check(std::span<const std::vector<double>> vector_samples,
                                    std::span<const MonotoneFunctional> functionals,
                                    std::span<const std::pair<int, int>> pairs,
                                    std::span<const double> oracle,  // empty = no oracle
                                    std::uint64_t spotcheck_seed = 0xa550c1a7eu);

// Growing-time CLT: KS at the largest window must pass and the distance
// sequence must be nonincreasing within noise (first vs last, 3 control SDs).
struct TnCltResult {
  bool pass = false;
  std::vector<TestVerdict> per_window;
  std::vector<double> distances;
};
TnCltResult tn_clt_check(std::span<const double> windows,
                         std::span<const std::vector<double>> samples_per_window, double level);

// Plain OLS slope helper (log-log fits elsewhere reuse it).
double ols_slope(std::span<const double> x, std::span<const double> y);

// Mean / SE / jackknife utilities shared by campaigns.
double mean_of(std::span<const double> xs);
double se_of_mean(std::span<const double> xs);

}  // namespace shelab
