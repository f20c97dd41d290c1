#pragma once
// Exponential-Euler solver for  du = (1/2) Lap u dt + sigma(u) dW  on the
// periodic lattice, started from u(0) == 1.  Per step
//   u_{k+1} = E_dt[u_k] + Q_dt[ sigma(u_k) . xi_k ],
// where E_dt is the exact heat semigroup multiplier exp(-dt|z|^2/2), xi_k is a
// stationary Gaussian increment with site covariance dt * f_Delta, and Q_dt is
// the exact one-step stochastic-convolution filter
//   Q_dt(z) = sqrt( (1 - exp(-dt|z|^2)) / (dt|z|^2) ),
// which removes the O(sqrt(dt)) variance deficit of plain end-point smoothing
// (for constant sigma the scheme reproduces the continuum torus covariance at
// grid times exactly, up to wrap/cutoff).  sigma is frozen at the left
// endpoint of each step.

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shelab/grid.hpp"
#include "shelab/noise.hpp"
#include "shelab/rng.hpp"
#include "shelab/spectral.hpp"

namespace shelab {

enum class SigmaKind { constant, linear, affine, custom };

struct DiffusionSpec {
  SigmaKind kind = SigmaKind::linear;
  double a = 0;  // constant: sigma(u) = a;     affine: sigma(u) = a + b*u
  double b = 1;  // linear:  sigma(u) = b*u
  std::function<double(double)> custom_sigma;
  std::function<double(double)> custom_dsigma;  // required by the derivative solver
  double custom_lip = 0;

  double sigma(double u) const;
  double dsigma(double u) const;
  double lip() const;                // Lipschitz constant
  double sigma0_abs_or_lip() const;  // |sigma(0)| v Lip(sigma)
  bool is_pam() const { return kind == SigmaKind::linear && b == 1.0; }
  // Requires sigma(1) != 0 (nondegeneracy at the flat initial condition) and,
  // for custom sigma, spot-checks the declared Lipschitz constant.
  void validate() const;

  static DiffusionSpec constant(double s0);
  static DiffusionSpec pam();
  static DiffusionSpec affine(double a, double b);
};

std::string to_string(SigmaKind kind);

struct FieldFrame {
  double t = 0;
  Field values;
};

struct Trajectory {
  LatticeGrid grid;
  std::vector<FieldFrame> frames;           // at the requested output times
  std::vector<Field> noise;                 // per-step increments when stored
  bool stored_noise = false;
  int steps = 0;
};

// Summary statistics of one frame (used by the trajectory export).
struct FrameSummary {
  double t = 0;
  double mean = 0, second_moment = 0, min = 0, max = 0;
  std::size_t nonpositive_sites = 0;
};
FrameSummary summarize_frame(const FieldFrame& frame);

class Simulator {
 public:
  Simulator(const LatticeGrid& grid, const NoiseModel& model, const DiffusionSpec& sigma);

  const LatticeGrid& grid() const { return grid_; }
  const DiffusionSpec& sigma() const { return sigma_; }
  const NoiseModel& model() const { return model_; }

  // Evolve from u == 1 to t_end, capturing frames at output_times (each must
  // be a multiple of dt within [0, t_end] up to 1e-9).  When store_noise is
  // set, all per-step increments are kept (required by the Malliavin module).
  Trajectory simulate(double t_end, std::span<const double> output_times, RandomStream& rng,
                      bool store_noise = false) const;

  // One step in place with a caller-supplied increment (site covariance
  // dt * f_Delta).  Exposed for the coupled solvers and the refinement tests.
  void step(Field& u, const Field& increment) const;

  // Coupled step for the linearized equation: advances v driven by the same
  // increment with multiplier sigma'(u); used by the derivative solver.
  // Advances u as well (v must be updated with the pre-step u).
  void step_pair(Field& u, Field& v, const Field& increment) const;

  // Draw one increment with the cached spectrum.
  void draw_increment(RandomStream& rng, Field& out) const;

  // Propagate a field by the exact lattice semigroup over time tau >= 0.
  void semigroup(Field& u, double tau) const;

 private:
  LatticeGrid grid_;
  NoiseModel model_;
  DiffusionSpec sigma_;
  mutable SpectralWorkspace ws_;
  std::vector<double> semigroup_mult_;   // exp(-dt|z|^2/2)
  std::vector<double> stoch_filter_;     // Q_dt(z)
  std::vector<double> increment_spec_;   // dt * circulant spectrum of f_Delta
};

// CSV/JSON trajectory export: one row per (frame, site).
void export_trajectory_csv(const Trajectory& traj, const std::string& path);
void export_frame_summaries_json(const Trajectory& traj, const std::string& path);

}  // namespace shelab
