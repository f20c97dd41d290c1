#pragma once
// FFTW-backed spectral transforms on the periodic lattice (real-to-halfcomplex,
// double precision).  One workspace per thread; plan creation is serialized
// internally because FFTW planning is not thread-safe.

#include <complex>
#include <cstddef>
#include <vector>

#include "shelab/grid.hpp"
#include "shelab/rng.hpp"

struct fftw_plan_s;

namespace shelab {

class SpectralWorkspace {
 public:
  explicit SpectralWorkspace(const LatticeGrid& grid);
  ~SpectralWorkspace();
  SpectralWorkspace(const SpectralWorkspace&) = delete;
  SpectralWorkspace& operator=(const SpectralWorkspace&) = delete;

  const LatticeGrid& grid() const { return grid_; }
  std::size_t n_modes() const { return mode_sq_.size(); }
  // |z|^2 for each stored mode, z the continuum wavevector 2*pi*k/L.
  const std::vector<double>& mode_sq() const { return mode_sq_; }

  // Unnormalized forward r2c transform.
  void forward(const Field& in, std::vector<std::complex<double>>& out);
  // c2r transform divided by the total number of sites (exact inverse of
  // forward); clobbers `in`.
  void backward(std::vector<std::complex<double>>& in, Field& out);

  // field <- inverse( mult .* forward(field) ), mult real per stored mode.
  void apply_multiplier(Field& field, const std::vector<double>& mult);

  // Draw a real stationary field whose circulant spectrum (the DFT of the
  // target covariance sequence) is `spectrum` (nonnegative, one entry per
  // stored mode).  Gaussian draws are consumed from `rng` in a fixed order.
  void sample_stationary(const std::vector<double>& spectrum, RandomStream& rng, Field& out);

  // DFT of a real even sequence: returns the (real) spectrum per stored mode.
  // Throws if a significantly complex or negative component shows up unless
  // clip_negative, in which case small negatives are clipped to zero.
  std::vector<double> covariance_spectrum(const Field& covariance, bool clip_negative = true);

 private:
  LatticeGrid grid_;
  fftw_plan_s* fwd_ = nullptr;
  fftw_plan_s* bwd_ = nullptr;
  double* rbuf_ = nullptr;
  std::complex<double>* cbuf_ = nullptr;
  std::vector<double> mode_sq_;
  std::size_t n_modes_ = 0;
};

}  // namespace shelab
