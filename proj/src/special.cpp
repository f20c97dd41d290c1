#include "shelab/special.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>

namespace shelab {

double normal_cdf(double x) { return 0.5 * boost::math::erfc(-x / std::numbers::sqrt2); }

// exp(x^2) erfc(x).  Direct product below x = 5 (no overflow there), Laplace
// continued fraction above:
//   erfcx(x) = 1/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + 2/(x + ...))))).
double erfcx(double x) {
  if (x < 0) {
    // erfcx(-x) = 2 exp(x^2) - erfcx(x); callers keep x^2 modest here.
    return 2.0 * std::exp(x * x) - erfcx(-x);
  }
  if (x < 5.0) return std::exp(x * x) * boost::math::erfc(x);
  double cf = 0.0;
  for (int n = 40; n >= 1; --n) cf = (0.5 * n) / (x + cf);
  return 1.0 / (std::sqrt(std::numbers::pi) * (x + cf));
}

double p2_tail_outside_cube(double a, int dim) {
  if (a <= 0) return 1.0;
  // per-axis N(0,2) mass inside [-a,a]: erf(a/(sqrt(2)*sqrt(2))) = erf(a/2)
  const double inside = boost::math::erf(a / 2.0);
  double prod = 1.0;
  for (int i = 0; i < dim; ++i) prod *= inside;
  return 1.0 - prod;
}

}  // namespace shelab
