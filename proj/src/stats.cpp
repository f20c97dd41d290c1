#include "shelab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "shelab/rng.hpp"
#include "shelab/observables.hpp"
#include "shelab/special.hpp"

namespace shelab {

double mean_of(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean_of: empty");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
}

double se_of_mean(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 2) throw std::invalid_argument("se_of_mean: need >= 2");
  const double m = mean_of(xs);
  double v = 0;
  for (double x : xs) v += (x - m) * (x - m);
  return std::sqrt(v / (double(n) * double(n - 1)));
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ols_slope: bad input");
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("ols_slope: degenerate x");
  return sxy / sxx;
}

namespace {

double second_moment(std::span<const double> xs) {
  double s = 0;
  for (double x : xs) s += x * x;
  return s / double(xs.size());
}

double ks_of_sorted_standardized(std::vector<double>& xs) {
  std::sort(xs.begin(), xs.end());
  const double n = double(xs.size());
  double d = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = normal_cdf(xs[i]);
    d = std::max(d, std::max(std::abs((double(i) + 1.0) / n - f), std::abs(double(i) / n - f)));
  }
  return d;
}

// Null tables for the scale-estimated KS statistic, one per (n, reps); the
// calibration stream is fixed and unrelated to campaign seeds.
const std::vector<double>& ks_null_table(int n, int reps) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::vector<double>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find({n, reps});
  if (it != cache.end()) return it->second;
  std::vector<double> table(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    RandomStream rng(0x4b534e554c4cull, std::uint64_t(r), "ks-null");
    std::vector<double> xs(static_cast<std::size_t>(n));
    for (double& x : xs) x = rng.gaussian();
    const double sd = std::sqrt(second_moment(xs));
    for (double& x : xs) x /= sd;
    table[std::size_t(r)] = ks_of_sorted_standardized(xs);
  }
  std::sort(table.begin(), table.end());
  return cache.emplace(std::make_pair(n, reps), std::move(table)).first->second;
}

}  // namespace

double ks_statistic_normal(std::span<const double> samples) {
  if (samples.size() < 8) throw std::invalid_argument("ks_statistic_normal: need >= 8 samples");
  const double sd = std::sqrt(second_moment(samples));
  if (!(sd > 0)) throw std::invalid_argument("ks_statistic_normal: zero scale");
  std::vector<double> xs(samples.begin(), samples.end());
  for (double& x : xs) x /= sd;
  return ks_of_sorted_standardized(xs);
}

TestVerdict normality_test(std::span<const double> samples, double level, int calibration_reps) {
  if (!(level > 0 && level < 1)) throw std::invalid_argument("normality_test: bad level");
  TestVerdict v;
  v.name = "ks-normal";
  v.n = int(samples.size());
  v.statistic = ks_statistic_normal(samples);
  const auto& table = ks_null_table(v.n, calibration_reps);
  const auto ge = std::lower_bound(table.begin(), table.end(), v.statistic);
  const double exceed = double(table.end() - ge);
  v.p_value = (1.0 + exceed) / (double(table.size()) + 1.0);
  v.threshold = level;
  v.pass = v.p_value >= level;
  return v;
}

namespace {

// Half L1 distance between the standardized histogram and N(0,1) on fixed
// bins over [-5, 5] plus two overflow bins.
double histogram_l1_half(std::span<const double> xs, int bins) {
  const double lo = -5.0, hi = 5.0;
  const double h = (hi - lo) / bins;
  std::vector<double> counts(std::size_t(bins) + 2, 0.0);
  for (double x : xs) {
    if (x < lo)
      counts[0] += 1;
    else if (x >= hi)
      counts[std::size_t(bins) + 1] += 1;
    else
      counts[1 + std::size_t((x - lo) / h)] += 1;
  }
  const double n = double(xs.size());
  double l1 = std::abs(counts[0] / n - normal_cdf(lo));
  for (int b = 0; b < bins; ++b) {
    const double p = normal_cdf(lo + (b + 1) * h) - normal_cdf(lo + b * h);
    l1 += std::abs(counts[std::size_t(b) + 1] / n - p);
  }
  l1 += std::abs(counts[std::size_t(bins) + 1] / n - (1.0 - normal_cdf(hi)));
  return 0.5 * l1;
}

int scott_bins(std::size_t n) {
  const double h = 3.49 * std::pow(double(n), -1.0 / 3.0);  // unit-variance Scott rule
  return std::max(8, int(std::ceil(10.0 / h)));
}

struct ControlStats {
  double bias = 0, sd = 0;
};

const ControlStats& distance_control(int n, int reps) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, ControlStats> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find({n, reps});
  if (it != cache.end()) return it->second;
  const int bins = scott_bins(std::size_t(n));
  std::vector<double> vals(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    RandomStream rng(0xd157c047e011ull, std::uint64_t(r), "distance-control");
    std::vector<double> xs(static_cast<std::size_t>(n));
    for (double& x : xs) x = rng.gaussian();
    const double sd = std::sqrt(second_moment(xs));
    for (double& x : xs) x /= sd;
    vals[std::size_t(r)] = histogram_l1_half(xs, bins);
  }
  ControlStats cs;
  cs.bias = mean_of(vals);
  double v = 0;
  for (double x : vals) v += (x - cs.bias) * (x - cs.bias);
  cs.sd = std::sqrt(v / (reps - 1.0));
  return cache.emplace(std::make_pair(n, reps), cs).first->second;
}

}  // namespace

DistanceResult distance_to_gaussian(std::span<const double> samples, std::optional<double> variance,
                                    int control_reps) {
  if (samples.size() < 32) throw std::invalid_argument("distance_to_gaussian: need >= 32 samples");
  const double var = variance.value_or(second_moment(samples));
  if (!(var > 0)) throw std::invalid_argument("distance_to_gaussian: variance must be positive");
  std::vector<double> xs(samples.begin(), samples.end());
  const double sd = std::sqrt(var);
  for (double& x : xs) x /= sd;
  DistanceResult r;
  r.bins = scott_bins(xs.size());
  r.raw = histogram_l1_half(xs, r.bins);
  const auto& cs = distance_control(int(samples.size()), control_reps);
  r.bias = cs.bias;
  r.control_sd = cs.sd;
  r.corrected = r.raw - r.bias;
  return r;
}

double tv_normals_bound(double c1, double c2) {
  if (!(c1 > 0) || !(c2 > 0)) throw std::domain_error("tv_normals_bound: variances must be > 0");
  const double hi = std::max(c1, c2), lo = std::min(c1, c2);
  return 0.5 * std::sqrt((hi - lo) / lo);
}

RateFit rate_fit(std::span<const double> window, std::span<const double> distance,
                 int bootstrap_reps, std::uint64_t seed) {
  if (window.size() != distance.size()) throw std::invalid_argument("rate_fit: size mismatch");
  std::vector<double> lx, ly;
  int excluded = 0;
  for (std::size_t i = 0; i < window.size(); ++i) {
    if (!(window[i] > 0)) throw std::invalid_argument("rate_fit: windows must be positive");
    if (distance[i] > 0) {
      lx.push_back(std::log(window[i]));
      ly.push_back(std::log(distance[i]));
    } else {
      ++excluded;
    }
  }
  std::vector<double> distinct(lx);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 4) throw std::invalid_argument("rate_fit: need >= 4 distinct windows");
  if (distinct.back() - distinct.front() < std::log(10.0) * (1.0 - 1e-12))
    throw std::invalid_argument("rate_fit: windows must span at least a decade");

  RateFit fit;
  fit.used = int(lx.size());
  fit.excluded = excluded;
  fit.slope = ols_slope(lx, ly);
  fit.intercept = mean_of(ly) - fit.slope * mean_of(lx);

  std::vector<double> resid(lx.size()), fitted(lx.size());
  for (std::size_t i = 0; i < lx.size(); ++i) {
    fitted[i] = fit.intercept + fit.slope * lx[i];
    resid[i] = ly[i] - fitted[i];
  }
  RandomStream rng(seed, 0, "rate-bootstrap");
  std::vector<double> slopes(static_cast<std::size_t>(bootstrap_reps));
  std::vector<double> yb(lx.size());
  for (int b = 0; b < bootstrap_reps; ++b) {
    for (std::size_t i = 0; i < lx.size(); ++i) {
      const std::size_t j = std::size_t(rng.raw64() % lx.size());
      yb[i] = fitted[i] + resid[j];
    }
    slopes[std::size_t(b)] = ols_slope(lx, yb);
  }
  std::sort(slopes.begin(), slopes.end());
  const auto pick = [&](double q) {
    const double pos = q * (slopes.size() - 1);
    const std::size_t i = std::size_t(pos);
    const double w = pos - double(i);
    return i + 1 < slopes.size() ? (1 - w) * slopes[i] + w * slopes[i + 1] : slopes[i];
  };
  fit.ci_lo = pick(0.025);
  fit.ci_hi = pick(0.975);
  return fit;
}

FcltResult fclt_check(std::span<const std::vector<double>> joint_samples,
                      const GaussianLimitSpec& target, double level,
                      std::span<const std::vector<double>> projections) {
  const std::size_t m = target.times.size();
  const std::size_t n = joint_samples.size();
  if (n < 100) throw std::invalid_argument("fclt_check: need >= 100 replicas");
  for (const auto& row : joint_samples)
    if (row.size() != m) throw std::invalid_argument("fclt_check: ragged joint samples");
  if (target.cov.size() != m || target.cov_se.size() != m)
    throw std::invalid_argument("fclt_check: target shape mismatch");

  std::vector<double> mean(m, 0.0);
  for (const auto& row : joint_samples)
    for (std::size_t i = 0; i < m; ++i) mean[i] += row[i];
  for (double& v : mean) v /= double(n);
  std::vector<std::vector<double>> emp(m, std::vector<double>(m, 0.0));
  for (const auto& row : joint_samples)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) emp[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]);
  for (auto& r : emp)
    for (double& v : r) v /= double(n - 1);

  FcltResult res;
  res.cov_pass = true;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      const double se_emp =
          std::sqrt((emp[i][i] * emp[j][j] + emp[i][j] * emp[i][j]) / double(n));
      const double se =
          std::sqrt(se_emp * se_emp + target.cov_se[i][j] * target.cov_se[i][j]);
      TestVerdict v;
      std::ostringstream os;
      os << "cov(" << target.times[i] << "," << target.times[j] << ")";
      v.name = os.str();
      v.statistic = emp[i][j] - target.cov[i][j];
      v.threshold = 3.0 * se;
      v.n = int(n);
      v.pass = std::abs(v.statistic) <= v.threshold;
      res.cov_pass = res.cov_pass && v.pass;
      res.entries.push_back(std::move(v));
    }

  res.marginals_pass = true;
  for (const auto& w : projections) {
    if (w.size() != m) throw std::invalid_argument("fclt_check: projection shape mismatch");
    std::vector<double> y(n);
    for (std::size_t r = 0; r < n; ++r) {
      double acc = 0;
      for (std::size_t i = 0; i < m; ++i) acc += w[i] * joint_samples[r][i];
      y[r] = acc;
    }
    auto v = normality_test(y, level);
    std::ostringstream os;
    os << "projection[";
    for (std::size_t i = 0; i < m; ++i) os << (i ? "," : "") << w[i];
    os << "]";
    v.name = os.str();
    res.marginals_pass = res.marginals_pass && v.pass;
    res.marginals.push_back(std::move(v));
  }
  res.pass = res.cov_pass && res.marginals_pass;
  return res;
}

HolderResult holder_moment_check(std::span<const double> gaps,
                                 std::span<const std::vector<double>> diff_samples_per_gap,
                                 std::span<const double> windows,
                                 std::span<const std::vector<double>> diff_samples_per_window,
                                 double k, double gamma_delta, int dim) {
  if (gaps.size() != diff_samples_per_gap.size() || gaps.size() < 3)
    throw std::invalid_argument("holder_moment_check: need >= 3 gaps");
  if (windows.size() != diff_samples_per_window.size() || windows.size() < 3)
    throw std::invalid_argument("holder_moment_check: need >= 3 windows");
  auto log_moment = [&](const std::vector<double>& xs) {
    double acc = 0;
    for (double x : xs) acc += std::pow(std::abs(x), k);
    return std::log(acc / double(xs.size()));
  };
  std::vector<double> lg, lm;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    lg.push_back(std::log(gaps[i]));
    lm.push_back(log_moment(diff_samples_per_gap[i]));
  }
  HolderResult res;
  res.gap_exponent = ols_slope(lg, lm);
  std::vector<double> lw, lmw;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    lw.push_back(std::log(windows[i]));
    lmw.push_back(log_moment(diff_samples_per_window[i]));
  }
  res.window_exponent = ols_slope(lw, lmw);
  const double want_gap = 0.8 * k * gamma_delta;
  const double want_win = -0.5 * k * double(dim);
  res.pass = res.gap_exponent >= want_gap && std::abs(res.window_exponent - want_win) <= 0.2;
  return res;
}

AssociationResult association_check(std::span<const std::vector<double>> vector_samples,
                                    std::span<const MonotoneFunctional> functionals,
                                    std::span<const std::pair<int, int>> pairs,
                                    std::span<const double> oracle, std::uint64_t spotcheck_seed) {
  if (vector_samples.size() < 100)
    throw std::invalid_argument("association_check: need >= 100 samples");
  const std::size_t dim = vector_samples.front().size();
  for (const auto& v : vector_samples)
    if (v.size() != dim) throw std::invalid_argument("association_check: ragged samples");
  if (!oracle.empty() && oracle.size() != pairs.size())
    throw std::invalid_argument("association_check: oracle size mismatch");

  // Spot-check the declared monotonicity on random coordinate bumps.
  RandomStream rng(spotcheck_seed, 0, "assoc-spotcheck");
  std::vector<double> x(dim);
  for (const auto& f : functionals) {
    for (int trial = 0; trial < 20; ++trial) {
      for (double& xi : x) xi = 2.0 * rng.gaussian();
      const double before = f.eval(x);
      const std::size_t i = std::size_t(rng.raw64() % dim);
      x[i] += 0.5 + 2.0 * rng.uniform();
      const double after = f.eval(x);
      const bool ok = f.nondecreasing ? after >= before - 1e-12 : after <= before + 1e-12;
      if (!ok)
        throw std::invalid_argument("association_check: functional '" + f.name +
                                    "' violates its declared monotonicity");
    }
  }

  AssociationResult res;
  res.pass = true;
  const std::size_t n = vector_samples.size();
  std::vector<double> fa(n), fb(n);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [ia, ib] = pairs[p];
    if (ia < 0 || ib < 0 || ia >= int(functionals.size()) || ib >= int(functionals.size()))
      throw std::invalid_argument("association_check: pair index out of range");
    for (std::size_t r = 0; r < n; ++r) {
      fa[r] = functionals[std::size_t(ia)].eval(vector_samples[r]);
      fb[r] = functionals[std::size_t(ib)].eval(vector_samples[r]);
    }
    const auto est = estimate_b(fa, fb);
    const bool same_direction =
        functionals[std::size_t(ia)].nondecreasing == functionals[std::size_t(ib)].nondecreasing;
    TestVerdict v;
    v.name = functionals[std::size_t(ia)].name + ":" + functionals[std::size_t(ib)].name;
    v.statistic = est.value;
    v.threshold = 3.0 * est.se;
    v.n = est.n;
    v.pass = same_direction ? est.value >= -v.threshold : est.value <= v.threshold;
    if (!oracle.empty())
      v.pass = v.pass && std::abs(est.value - oracle[p]) <= v.threshold;
    res.pass = res.pass && v.pass;
    res.pairs.push_back(std::move(v));
  }
  return res;
}

TnCltResult tn_clt_check(std::span<const double> windows,
                         std::span<const std::vector<double>> samples_per_window, double level) {
  if (windows.size() != samples_per_window.size() || windows.size() < 2)
    throw std::invalid_argument("tn_clt_check: need >= 2 windows");
  TnCltResult res;
  double first_sd = 0, last_sd = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    auto v = normality_test(samples_per_window[i], level);
    std::ostringstream os;
    os << "window=" << windows[i];
    v.name = os.str();
    res.per_window.push_back(std::move(v));
    const auto d = distance_to_gaussian(samples_per_window[i]);
    res.distances.push_back(d.corrected);
    if (i == 0) first_sd = d.control_sd;
    if (i + 1 == windows.size()) last_sd = d.control_sd;
  }
  const bool largest_ok = res.per_window.back().pass;
  const double slack = 3.0 * std::sqrt(first_sd * first_sd + last_sd * last_sd);
  const bool nonincreasing = res.distances.back() <= res.distances.front() + slack;
  res.pass = largest_ok && nonincreasing;
  return res;
}

}  // namespace shelab
