#include "shelab/observables.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "shelab/special.hpp"

namespace shelab {

namespace {
[[noreturn]] void domain_fail(const char* what, double u) {
  std::ostringstream os;
  os << what << " undefined at u = " << u;
  throw std::domain_error(os.str());
}
}  // namespace

double ObservableSpec::g(double u) const {
  switch (kind) {
    case ObservableKind::identity:
      return u;
    case ObservableKind::logarithm:
      if (u <= 0) domain_fail("log", u);
      return std::log(u);
    case ObservableKind::power:
      if (u <= 0) domain_fail("power", u);  // declared domain is (0, inf)
      return std::pow(u, exponent);
    case ObservableKind::custom:
      return custom_g(u);
  }
  return 0;
}

double ObservableSpec::dg(double u) const {
  if (!differentiable) throw std::logic_error("observable is not differentiable");
  switch (kind) {
    case ObservableKind::identity:
      return 1.0;
    case ObservableKind::logarithm:
      if (u <= 0) domain_fail("dlog", u);
      return 1.0 / u;
    case ObservableKind::power:
      if (u <= 0) domain_fail("dpower", u);
      return exponent * std::pow(u, exponent - 1.0);
    case ObservableKind::custom:
      return custom_dg(u);
  }
  return 0;
}

double ObservableSpec::d2g(double u) const {
  if (!differentiable) throw std::logic_error("observable is not differentiable");
  switch (kind) {
    case ObservableKind::identity:
      return 0.0;
    case ObservableKind::logarithm:
      if (u <= 0) domain_fail("d2log", u);
      return -1.0 / (u * u);
    case ObservableKind::power:
      if (u <= 0) domain_fail("d2power", u);
      return exponent * (exponent - 1.0) * std::pow(u, exponent - 2.0);
    case ObservableKind::custom:
      return custom_d2g(u);
  }
  return 0;
}

std::string ObservableSpec::name() const {
  switch (kind) {
    case ObservableKind::identity:
      return "identity";
    case ObservableKind::logarithm:
      return "log";
    case ObservableKind::power: {
      std::ostringstream os;
      os << "power" << exponent;
      return os.str();
    }
    case ObservableKind::custom:
      return "custom";
  }
  return "?";
}

ObservableSpec ObservableSpec::identity() { return {}; }
ObservableSpec ObservableSpec::logarithm() {
  ObservableSpec o;
  o.kind = ObservableKind::logarithm;
  return o;
}
ObservableSpec ObservableSpec::power(double exponent) {
  if (exponent == 0.0)
    throw std::invalid_argument("observable: power exponent must be nonzero");
  ObservableSpec o;
  o.kind = ObservableKind::power;
  o.exponent = exponent;
  o.dsign = exponent > 0 ? +1 : -1;
  return o;
}

AverageSample spatial_average(const FieldFrame& frame, const LatticeGrid& grid,
                              const ObservableSpec& obs, double window, double centering,
                              bool centering_analytic, int base) {
  const long w = std::lround(window / grid.dx);
  if (w < 1 || std::abs(w * grid.dx - window) > 1e-9 * std::max(1.0, window))
    throw std::invalid_argument("spatial_average: window must be a positive multiple of dx");
  if (w > grid.sites) throw std::invalid_argument("spatial_average: window exceeds the grid");
  const int M = grid.sites;
  double sum = 0;
  if (grid.dim == 1) {
    for (long j = 0; j < w; ++j) sum += obs.g(frame.values[std::size_t((base + j) % M)]);
    sum /= double(w);
  } else {
    for (long jx = 0; jx < w; ++jx)
      for (long jy = 0; jy < w; ++jy) {
        const std::size_t idx = std::size_t((base + jx) % M) * M + std::size_t((base + jy) % M);
        sum += obs.g(frame.values[idx]);
      }
    sum /= double(w) * double(w);
  }
  AverageSample s;
  s.centering = centering;
  s.centering_analytic = centering_analytic;
  s.value = std::pow(window, 0.5 * grid.dim) * (sum - centering);
  return s;
}

CovEstimate estimate_b(std::span<const double> samples_t1, std::span<const double> samples_t2) {
  const int n = int(samples_t1.size());
  if (samples_t2.size() != samples_t1.size())
    throw std::invalid_argument("estimate_b: sample size mismatch");
  if (n < 100) throw std::invalid_argument("estimate_b: need at least 100 pairs");
  const double sx = std::accumulate(samples_t1.begin(), samples_t1.end(), 0.0);
  const double sy = std::accumulate(samples_t2.begin(), samples_t2.end(), 0.0);
  double sxy = 0;
  for (int i = 0; i < n; ++i) sxy += samples_t1[i] * samples_t2[i];
  CovEstimate est;
  est.n = n;
  est.value = (sxy - sx * sy / n) / (n - 1);
  // jackknife over leave-one-out covariances
  double jsum = 0, jsumsq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = samples_t1[i], y = samples_t2[i];
    const double c =
        (sxy - x * y - (sx - x) * (sy - y) / (n - 1)) / (n - 2);
    jsum += c;
    jsumsq += c * c;
  }
  const double jmean = jsum / n;
  est.se = std::sqrt(std::max(0.0, (n - 1.0) / n * (jsumsq - n * jmean * jmean)));
  return est;
}

namespace {
// Per-replica lag covariance curves; the public estimate averages replicas and
// jackknifes over them.  Centering uses the ensemble grand means mu1/mu2:
// centering by the per-replica spatial mean would remove the zero mode and
// bias every lag down by about (integrated covariance)/L.
std::vector<double> replica_lag_curve(const Field& f1, const Field& f2, const ObservableSpec& obs,
                                      const LatticeGrid& grid, int max_lag, double mu1,
                                      double mu2) {
  const int M = grid.sites;
  std::vector<double> g1(f1.size()), g2(f2.size());
  for (std::size_t i = 0; i < f1.size(); ++i) g1[i] = obs.g(f1[i]) - mu1;
  for (std::size_t i = 0; i < f2.size(); ++i) g2[i] = obs.g(f2[i]) - mu2;

  std::vector<double> out;
  if (grid.dim == 1) {
    out.resize(std::size_t(max_lag) + 1, 0.0);
    for (int l = 0; l <= max_lag; ++l) {
      double acc = 0;
      for (int j = 0; j < M; ++j) acc += (g1[std::size_t((j + l) % M)] * g2[std::size_t(j)] +
                                          g1[std::size_t(j)] * g2[std::size_t((j + l) % M)]);
      out[std::size_t(l)] = acc / (2.0 * M);
    }
  } else {
    out.resize(std::size_t(max_lag + 1) * (max_lag + 1), 0.0);
    auto at = [&](const std::vector<double>& g, int jx, int jy) {
      return g[std::size_t((jx % M + M) % M) * M + std::size_t((jy % M + M) % M)];
    };
    for (int lx = 0; lx <= max_lag; ++lx)
      for (int ly = 0; ly <= max_lag; ++ly) {
        double acc = 0;
        // symmetrize over the 4 sign combinations of (lx, ly)
        for (int jx = 0; jx < M; ++jx)
          for (int jy = 0; jy < M; ++jy) {
            const double b = at(g2, jx, jy);
            acc += 0.25 * b *
                   (at(g1, jx + lx, jy + ly) + at(g1, jx + lx, jy - ly) +
                    at(g1, jx - lx, jy + ly) + at(g1, jx - lx, jy - ly));
          }
        out[std::size_t(lx) * (max_lag + 1) + ly] = acc / double(M) / double(M);
      }
  }
  return out;
}
}  // namespace

LagCovariance lag_covariance(std::span<const Field> fields_t1, std::span<const Field> fields_t2,
                             const ObservableSpec& obs, const LatticeGrid& grid,
                             int max_lag_sites) {
  if (fields_t1.size() != fields_t2.size() || fields_t1.size() < 2)
    throw std::invalid_argument("lag_covariance: need >= 2 paired replicas");
  if (max_lag_sites < 1 || max_lag_sites > grid.sites / 2)
    throw std::invalid_argument("lag_covariance: max lag must be in [1, sites/2]");
  const int R = int(fields_t1.size());

  double mu1 = 0, mu2 = 0;
  std::size_t n1 = 0, n2 = 0;
  for (int r = 0; r < R; ++r) {
    for (double v : fields_t1[std::size_t(r)]) {
      mu1 += obs.g(v);
      ++n1;
    }
    for (double v : fields_t2[std::size_t(r)]) {
      mu2 += obs.g(v);
      ++n2;
    }
  }
  mu1 /= double(n1);
  mu2 /= double(n2);

  std::vector<std::vector<double>> curves(static_cast<std::size_t>(R));
  for (int r = 0; r < R; ++r)
    curves[std::size_t(r)] =
        replica_lag_curve(fields_t1[std::size_t(r)], fields_t2[std::size_t(r)], obs, grid,
                          max_lag_sites, mu1, mu2);
  const std::size_t K = curves[0].size();

  LagCovariance lc;
  lc.dim = grid.dim;
  lc.dx = grid.dx;
  lc.lag.resize(K);
  lc.cov.resize(K);
  lc.se.resize(K);
  lc.weight.resize(K);
  if (grid.dim == 1) {
    for (std::size_t l = 0; l < K; ++l) {
      lc.lag[l] = double(l) * grid.dx;
      lc.weight[l] = l == 0 ? 1.0 : 2.0;
    }
  } else {
    const int W = max_lag_sites + 1;
    for (int lx = 0; lx < W; ++lx)
      for (int ly = 0; ly < W; ++ly) {
        const std::size_t k = std::size_t(lx) * W + ly;
        lc.lag[k] = grid.dx * std::hypot(double(lx), double(ly));
        lc.weight[k] = (lx == 0 ? 1.0 : 2.0) * (ly == 0 ? 1.0 : 2.0);
      }
  }
  for (std::size_t k = 0; k < K; ++k) {
    double m = 0;
    for (int r = 0; r < R; ++r) m += curves[std::size_t(r)][k];
    m /= R;
    double var = 0;
    for (int r = 0; r < R; ++r) {
      const double d = curves[std::size_t(r)][k] - m;
      var += d * d;
    }
    lc.cov[k] = m;
    lc.se[k] = std::sqrt(var / (double(R) * (R - 1.0)));
  }
  return lc;
}

CovarianceReport make_covariance_report(double t1, double t2, const ObservableSpec& obs,
                                        double window, const CovEstimate& bn,
                                        const LagCovariance& lags) {
  CovarianceReport rep;
  rep.t1 = t1;
  rep.t2 = t2;
  rep.g = obs.name();
  rep.window = window;
  rep.b_n = bn.value;
  rep.b_n_se = bn.se;

  const double cell = std::pow(lags.dx, lags.dim);
  double total = 0, total_var = 0, abs_total = 0, abs_tail = 0;
  const double lag_max = *std::max_element(lags.lag.begin(), lags.lag.end());
  for (std::size_t k = 0; k < lags.cov.size(); ++k) {
    const double w = lags.weight[k];
    total += w * lags.cov[k];
    total_var += w * w * lags.se[k] * lags.se[k];
    abs_total += w * std::abs(lags.cov[k]);
    if (lags.lag[k] > 0.5 * lag_max) abs_tail += w * std::abs(lags.cov[k]);
  }
  rep.b_limit = cell * total;
  rep.b_limit_se = cell * std::sqrt(total_var);
  rep.tail_fraction = abs_total > 0 ? abs_tail / abs_total : 0.0;
  rep.status = rep.tail_fraction > 0.10 ? "window-too-small" : "ok";
  return rep;
}

double pi_weight(double window, double t, double s, std::span<const double> y, int dim) {
  if (!(window > 0)) throw std::domain_error("pi_weight: window must be positive");
  if (!(t > s)) throw std::domain_error("pi_weight: requires t > s");
  if (int(y.size()) != dim) throw std::invalid_argument("pi_weight: y has wrong dimension");
  const double sd = std::sqrt(t - s);
  double prod = 1.0;
  for (double yi : y)
    prod *= (normal_cdf((window - yi) / sd) - normal_cdf(-yi / sd)) / window;
  return prod;
}

double variance_lower_bound(const NoiseModel& model, const DiffusionSpec& sigma,
                            const LowerBoundParams& params, double window, double t) {
  model.validate();
  if (!(window > 0) || !(t > 0))
    throw std::domain_error("variance_lower_bound: window and t must be positive");
  const int d = model.dim;
  const double mass = model.total_mass();
  if (params.condition == 1 || params.condition == 2) {
    const double inside = 1.0 - p2_tail_outside_cube(window / (8.0 * std::sqrt(t)), d);
    const double outside_mass = mass - model.mass_cube(window / 8.0);
    return params.C / std::pow(2.0, d) * t * (mass * inside - outside_mass);
  }
  if (params.condition == 3) {
    if (!(params.delta > 0) || !(params.R > 0))
      throw std::domain_error("variance_lower_bound: condition 3 needs delta, R > 0");
    const double s1 = sigma.sigma(1.0);
    const double near_mass = model.mass_cube(params.R);
    const double tail =
        p2_tail_outside_cube((window / 4.0 - params.R) / std::sqrt(t), d);
    return s1 * s1 * params.delta / std::pow(2.0, d + 1) * (near_mass - mass * tail);
  }
  throw std::invalid_argument("variance_lower_bound: condition must be 1, 2 or 3");
}

}  // namespace shelab
