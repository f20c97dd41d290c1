#include "shelab/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace shelab {

namespace {
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

SpectralWorkspace::SpectralWorkspace(const LatticeGrid& grid) : grid_(grid) {
  grid_.validate();
  const int M = grid_.sites;
  const std::size_t ntot = grid_.total_sites();
  n_modes_ = (grid_.dim == 1) ? std::size_t(M / 2 + 1) : std::size_t(M) * (M / 2 + 1);

  rbuf_ = fftw_alloc_real(ntot);
  cbuf_ = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(n_modes_));
  if (!rbuf_ || !cbuf_) throw std::bad_alloc();

  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    auto* cb = reinterpret_cast<fftw_complex*>(cbuf_);
    if (grid_.dim == 1) {
      fwd_ = reinterpret_cast<fftw_plan_s*>(fftw_plan_dft_r2c_1d(M, rbuf_, cb, FFTW_ESTIMATE));
      bwd_ = reinterpret_cast<fftw_plan_s*>(fftw_plan_dft_c2r_1d(M, cb, rbuf_, FFTW_ESTIMATE));
    } else {
      fwd_ = reinterpret_cast<fftw_plan_s*>(fftw_plan_dft_r2c_2d(M, M, rbuf_, cb, FFTW_ESTIMATE));
      bwd_ = reinterpret_cast<fftw_plan_s*>(fftw_plan_dft_c2r_2d(M, M, cb, rbuf_, FFTW_ESTIMATE));
    }
  }
  if (!fwd_ || !bwd_) throw std::runtime_error("spectral: FFTW plan creation failed");

  // Continuum wavevectors z = 2*pi*k/L per axis, with the usual signed
  // convention for the full-range axis of the 2-d layout.
  mode_sq_.resize(n_modes_);
  const double dz = 2.0 * std::numbers::pi / grid_.length();
  if (grid_.dim == 1) {
    for (int k = 0; k <= M / 2; ++k) mode_sq_[k] = (dz * k) * (dz * k);
  } else {
    for (int kx = 0; kx < M; ++kx) {
      const int sx = (kx <= M / 2) ? kx : kx - M;
      for (int ky = 0; ky <= M / 2; ++ky) {
        const double zx = dz * sx, zy = dz * ky;
        mode_sq_[std::size_t(kx) * (M / 2 + 1) + ky] = zx * zx + zy * zy;
      }
    }
  }
}

SpectralWorkspace::~SpectralWorkspace() {
  std::lock_guard<std::mutex> lock(plan_mutex());
  if (fwd_) fftw_destroy_plan(reinterpret_cast<fftw_plan>(fwd_));
  if (bwd_) fftw_destroy_plan(reinterpret_cast<fftw_plan>(bwd_));
  fftw_free(rbuf_);
  fftw_free(reinterpret_cast<fftw_complex*>(cbuf_));
}

void SpectralWorkspace::forward(const Field& in, std::vector<std::complex<double>>& out) {
  if (in.size() != grid_.total_sites()) throw std::invalid_argument("spectral: bad field size");
  std::memcpy(rbuf_, in.data(), in.size() * sizeof(double));
  fftw_execute(reinterpret_cast<fftw_plan>(fwd_));
  out.assign(cbuf_, cbuf_ + n_modes_);
}

void SpectralWorkspace::backward(std::vector<std::complex<double>>& in, Field& out) {
  if (in.size() != n_modes_) throw std::invalid_argument("spectral: bad spectrum size");
  std::memcpy(cbuf_, in.data(), n_modes_ * sizeof(std::complex<double>));
  fftw_execute(reinterpret_cast<fftw_plan>(bwd_));
  const std::size_t ntot = grid_.total_sites();
  out.resize(ntot);
  const double scale = 1.0 / double(ntot);
  for (std::size_t i = 0; i < ntot; ++i) out[i] = rbuf_[i] * scale;
}

void SpectralWorkspace::apply_multiplier(Field& field, const std::vector<double>& mult) {
  if (mult.size() != n_modes_) throw std::invalid_argument("spectral: bad multiplier size");
  std::memcpy(rbuf_, field.data(), field.size() * sizeof(double));
  fftw_execute(reinterpret_cast<fftw_plan>(fwd_));
  for (std::size_t i = 0; i < n_modes_; ++i) cbuf_[i] *= mult[i];
  fftw_execute(reinterpret_cast<fftw_plan>(bwd_));
  const double scale = 1.0 / double(grid_.total_sites());
  for (std::size_t i = 0; i < field.size(); ++i) field[i] = rbuf_[i] * scale;
}

// Spectral coefficients Y_k = sqrt(C_k / Ntot) * zeta_k with Hermitian
// symmetry reproduce Cov(X_i, X_j) = c_{i-j} after the unnormalized c2r
// transform.  Self-conjugate bins get real unit draws; for the 2-d layout the
// columns ky in {0, M/2} carry their own within-column symmetry, handled by
// drawing the kx <= M/2 half and mirroring.
void SpectralWorkspace::sample_stationary(const std::vector<double>& spectrum, RandomStream& rng,
                                          Field& out) {
  if (spectrum.size() != n_modes_) throw std::invalid_argument("spectral: bad spectrum size");
  const int M = grid_.sites;
  const std::size_t ntot = grid_.total_sites();
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

  auto amp = [&](std::size_t idx) { return std::sqrt(spectrum[idx] / double(ntot)); };

  if (grid_.dim == 1) {
    for (int k = 0; k <= M / 2; ++k) {
      const double a = amp(k);
      if (k == 0 || k == M / 2) {
        cbuf_[k] = {a * rng.gaussian(), 0.0};
      } else {
        cbuf_[k] = {a * inv_sqrt2 * rng.gaussian(), a * inv_sqrt2 * rng.gaussian()};
      }
    }
  } else {
    const int H = M / 2 + 1;
    for (int kx = 0; kx < M; ++kx)
      for (int ky = 0; ky < H; ++ky) cbuf_[std::size_t(kx) * H + ky] = {0.0, 0.0};
    for (int ky = 0; ky < H; ++ky) {
      const bool edge_col = (ky == 0 || ky == M / 2);
      if (edge_col) {
        for (int kx = 0; kx <= M / 2; ++kx) {
          const std::size_t idx = std::size_t(kx) * H + ky;
          const double a = amp(idx);
          const bool self_conj = (kx == 0 || kx == M / 2);
          if (self_conj) {
            cbuf_[idx] = {a * rng.gaussian(), 0.0};
          } else {
            const std::complex<double> v{a * inv_sqrt2 * rng.gaussian(),
                                         a * inv_sqrt2 * rng.gaussian()};
            cbuf_[idx] = v;
            cbuf_[std::size_t(M - kx) * H + ky] = std::conj(v);
          }
        }
      } else {
        for (int kx = 0; kx < M; ++kx) {
          const std::size_t idx = std::size_t(kx) * H + ky;
          const double a = amp(idx);
          cbuf_[idx] = {a * inv_sqrt2 * rng.gaussian(), a * inv_sqrt2 * rng.gaussian()};
        }
      }
    }
  }
  fftw_execute(reinterpret_cast<fftw_plan>(bwd_));
  out.resize(ntot);
  std::memcpy(out.data(), rbuf_, ntot * sizeof(double));
}

std::vector<double> SpectralWorkspace::covariance_spectrum(const Field& covariance,
                                                           bool clip_negative) {
  std::vector<std::complex<double>> spec;
  forward(covariance, spec);
  double max_mag = 0;
  for (const auto& c : spec) max_mag = std::max(max_mag, std::abs(c.real()));
  std::vector<double> result(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (std::abs(spec[i].imag()) > 1e-9 * std::max(max_mag, 1.0)) {
      std::ostringstream os;
      os << "spectral: covariance spectrum not real at mode " << i;
      throw std::runtime_error(os.str());
    }
    double v = spec[i].real();
    if (v < 0) {
      if (!clip_negative || v < -1e-9 * std::max(max_mag, 1.0)) {
        std::ostringstream os;
        os << "spectral: negative covariance spectrum at mode " << i << " (value " << v << ")";
        throw std::runtime_error(os.str());
      }
      v = 0;
    }
    result[i] = v;
  }
  return result;
}

}  // namespace shelab
