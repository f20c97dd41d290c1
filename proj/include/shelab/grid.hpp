#pragma once
// Periodic simulation lattice.  `sites` points per axis with spacing dx give a
// torus of length sites*dx per axis; dt is the solver time step.

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace shelab {

using Field = std::vector<double>;

struct LatticeGrid {
  int dim = 1;     // 1 or 2
  int sites = 0;   // per axis, even
  double dx = 0;   // lattice spacing
  double dt = 0;   // time step

  double length() const { return sites * dx; }
  std::size_t total_sites() const {
    return dim == 1 ? std::size_t(sites) : std::size_t(sites) * std::size_t(sites);
  }

  // Signed wrapped displacement (in physical units) for a lag of j sites.
  double wrapped_lag(int j) const {
    int m = j % sites;
    if (m < 0) m += sites;
    if (m > sites / 2) m -= sites;
    return m * dx;
  }

  void validate() const {
    if (dim != 1 && dim != 2) throw std::invalid_argument("grid: dim must be 1 or 2");
    if (sites < 4 || sites % 2 != 0)
      throw std::invalid_argument("grid: sites must be even and >= 4");
    if (!(dx > 0.0)) throw std::invalid_argument("grid: dx must be positive");
    if (!(dt > 0.0)) throw std::invalid_argument("grid: dt must be positive");
  }
};

}  // namespace shelab
