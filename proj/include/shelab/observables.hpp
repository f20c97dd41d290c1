#pragma once
// Observables g applied to the solution field, spatial window averages
//   S_{N,t}(g) = N^{-d} integral_{[0,N]^d} g(u(t,x)) dx - centering,
// the rescaled covariance estimators
//   b_N = Cov[ N^{d/2} S_{N,t1}(g), N^{d/2} S_{N,t2}(g) ],
// its limit b = integral Cov[g(u(t1,x)), g(u(t2,0))] dx obtained by lag
// integration, the window weight Pi, and the explicit variance lower bounds.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shelab/grid.hpp"
#include "shelab/noise.hpp"
#include "shelab/solver.hpp"

namespace shelab {

enum class ObservableKind { identity, logarithm, power, custom };

struct ObservableSpec {
  ObservableKind kind = ObservableKind::identity;
  double exponent = 2.0;  // power kind
  std::function<double(double)> custom_g, custom_dg, custom_d2g;
  bool differentiable = true;
  int dsign = +1;  // sign of g' (monotonicity flag used by association)

  // Throw std::domain_error (carrying the offending value) outside the domain.
  double g(double u) const;
  double dg(double u) const;
  double d2g(double u) const;
  std::string name() const;

  static ObservableSpec identity();
  static ObservableSpec logarithm();
  static ObservableSpec power(double exponent);
};

// One replica's window average.  value = N^{d/2} * (window mean of g(u) - centering).
struct AverageSample {
  double value = 0;
  double centering = 0;
  bool centering_analytic = true;
};

// Window [0,N)^d starting at site `base`; N must be a multiple of dx (within
// 1e-9) and fit in the grid.  Plain Riemann quadrature with cell weight dx^d.
AverageSample spatial_average(const FieldFrame& frame, const LatticeGrid& grid,
                              const ObservableSpec& obs, double window, double centering,
                              bool centering_analytic = true, int base = 0);

// Unbiased sample covariance of paired samples with jackknife SE; n >= 100.
struct CovEstimate {
  double value = 0;
  double se = 0;
  int n = 0;
};
CovEstimate estimate_b(std::span<const double> samples_t1, std::span<const double> samples_t2);

// Stationary lag covariance curve of g(u(t1, . )) vs g(u(t2, . )), averaged
// over base sites and replicas.  In d=1 the lags are 0..max_lag_sites; in d=2
// the quadrant 0 <= lx, ly <= max_lag_sites is enumerated and `weight` carries
// the sign-flip multiplicity, so integrals are sum(weight * cov) * dx^d.
struct LagCovariance {
  std::vector<double> lag;     // physical lag magnitude >= 0
  std::vector<double> cov;     // symmetrized covariance at that lag
  std::vector<double> se;      // jackknife over replicas
  std::vector<double> weight;  // lattice multiplicity of the lag class
  int dim = 1;
  double dx = 0;
};
LagCovariance lag_covariance(std::span<const Field> fields_t1, std::span<const Field> fields_t2,
                             const ObservableSpec& obs, const LatticeGrid& grid,
                             int max_lag_sites);

// Integrated limit covariance with tail accounting.  tail_fraction is the
// share of |cov| mass carried by the outer half of the lag range (conservative
// remainder proxy); status "window-too-small" when it exceeds 10%.
struct CovarianceReport {
  double t1 = 0, t2 = 0;
  std::string g;
  double window = 0;  // N
  double b_n = 0, b_n_se = 0;
  double b_limit = 0, b_limit_se = 0;
  double tail_fraction = 0;
  std::string status = "ok";
};
CovarianceReport make_covariance_report(double t1, double t2, const ObservableSpec& obs,
                                        double window, const CovEstimate& bn,
                                        const LagCovariance& lags);

// Pi^{(N)}_{s,y}(t) = N^{-d} integral_{[0,N]^d} p_{t-s}(x-y) dx, exact per
// axis via the normal CDF.  0 <= Pi <= N^{-d}; integrates to 1 over y.
double pi_weight(double window, double t, double s, std::span<const double> y, int dim);

// Explicit lower bounds on B_{N,t}(g).
//  conditions 1-2 :   (C/2^d) * t * [ f(R^d)(1 - tail_cube(N/(8 sqrt t)))
//                                     - f(R^d \ [-N/8,N/8]^d) ]
//  condition 3    :   (sigma(1)^2 delta / 2^{d+1}) * [ f([-R,R]^d)
//                       - f(R^d) * tail_cube((N/4 - R)/sqrt t) ]
// where tail_cube(a) is the N(0,2I) mass outside [-a,a]^d.  Values can be
// negative for small N (vacuous bound).
struct LowerBoundParams {
  int condition = 3;   // 1, 2 (shared constant C) or 3
  double C = 1.0;      // conditions 1-2 prefactor constant
  double delta = 0.1;  // condition 3
  double R = 1.0;      // condition 3
};
double variance_lower_bound(const NoiseModel& model, const DiffusionSpec& sigma,
                            const LowerBoundParams& params, double window, double t);

}  // namespace shelab
