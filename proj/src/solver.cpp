#include "shelab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace shelab {

double DiffusionSpec::sigma(double u) const {
  switch (kind) {
    case SigmaKind::constant:
      return a;
    case SigmaKind::linear:
      return b * u;
    case SigmaKind::affine:
      return a + b * u;
    case SigmaKind::custom:
      return custom_sigma(u);
  }
  return 0;
}

double DiffusionSpec::dsigma(double u) const {
  switch (kind) {
    case SigmaKind::constant:
      return 0;
    case SigmaKind::linear:
    case SigmaKind::affine:
      return b;
    case SigmaKind::custom:
      return custom_dsigma(u);
  }
  return 0;
}

double DiffusionSpec::lip() const {
  switch (kind) {
    case SigmaKind::constant:
      return 0;
    case SigmaKind::linear:
    case SigmaKind::affine:
      return std::abs(b);
    case SigmaKind::custom:
      return custom_lip;
  }
  return 0;
}

double DiffusionSpec::sigma0_abs_or_lip() const { return std::max(std::abs(sigma(0.0)), lip()); }

void DiffusionSpec::validate() const {
  if (kind == SigmaKind::custom) {
    if (!custom_sigma || !custom_dsigma)
      throw std::invalid_argument("diffusion: custom sigma requires sigma and dsigma");
    if (!(custom_lip > 0)) throw std::invalid_argument("diffusion: custom sigma requires lip > 0");
    // Spot-check the declared Lipschitz constant on a coarse grid.
    const int n = 64;
    for (int i = 0; i < n; ++i) {
      const double x = -10.0 + 20.0 * i / (n - 1);
      for (double h : {0.01, 1.0, 7.0}) {
        const double gap = std::abs(custom_sigma(x + h) - custom_sigma(x));
        if (gap > custom_lip * h * (1.0 + 1e-9) + 1e-12)
          throw std::invalid_argument("diffusion: declared Lipschitz constant violated");
      }
    }
  }
  if (sigma(1.0) == 0.0)
    throw std::invalid_argument("diffusion: sigma(1) must be nonzero for flat initial data");
}

DiffusionSpec DiffusionSpec::constant(double s0) {
  DiffusionSpec d;
  d.kind = SigmaKind::constant;
  d.a = s0;
  return d;
}
DiffusionSpec DiffusionSpec::pam() {
  DiffusionSpec d;
  d.kind = SigmaKind::linear;
  d.b = 1.0;
  return d;
}
DiffusionSpec DiffusionSpec::affine(double a, double b) {
  DiffusionSpec d;
  d.kind = SigmaKind::affine;
  d.a = a;
  d.b = b;
  return d;
}

std::string to_string(SigmaKind kind) {
  switch (kind) {
    case SigmaKind::constant:
      return "constant";
    case SigmaKind::linear:
      return "linear";
    case SigmaKind::affine:
      return "affine";
    case SigmaKind::custom:
      return "custom";
  }
  return "?";
}

FrameSummary summarize_frame(const FieldFrame& frame) {
  FrameSummary s;
  s.t = frame.t;
  if (frame.values.empty()) return s;
  s.min = s.max = frame.values.front();
  double sum = 0, sumsq = 0;
  for (double v : frame.values) {
    sum += v;
    sumsq += v * v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    if (v <= 0) ++s.nonpositive_sites;
  }
  s.mean = sum / double(frame.values.size());
  s.second_moment = sumsq / double(frame.values.size());
  return s;
}

Simulator::Simulator(const LatticeGrid& grid, const NoiseModel& model, const DiffusionSpec& sigma)
    : grid_(grid), model_(model), sigma_(sigma), ws_(grid) {
  grid_.validate();
  model_.validate();
  sigma_.validate();
  if (model_.dim != grid_.dim) throw std::invalid_argument("simulator: dimension mismatch");

  increment_spec_ = noise_spectrum(model_, grid_, ws_);
  for (double& s : increment_spec_) s *= grid_.dt;

  const auto& q = ws_.mode_sq();
  semigroup_mult_.resize(q.size());
  stoch_filter_.resize(q.size());
  for (std::size_t m = 0; m < q.size(); ++m) {
    const double a = grid_.dt * q[m];
    semigroup_mult_[m] = std::exp(-0.5 * a);
    stoch_filter_[m] = a > 1e-12 ? std::sqrt(-std::expm1(-a) / a) : std::sqrt(1.0 - 0.5 * a);
  }
}

void Simulator::draw_increment(RandomStream& rng, Field& out) const {
  ws_.sample_stationary(increment_spec_, rng, out);
}

void Simulator::semigroup(Field& u, double tau) const {
  if (tau < 0) throw std::domain_error("semigroup: tau must be nonnegative");
  if (tau == 0) return;
  const auto& q = ws_.mode_sq();
  std::vector<double> mult(q.size());
  for (std::size_t m = 0; m < q.size(); ++m) mult[m] = std::exp(-0.5 * tau * q[m]);
  ws_.apply_multiplier(u, mult);
}

void Simulator::step(Field& u, const Field& increment) const {
  const std::size_t n = u.size();
  if (increment.size() != n) throw std::invalid_argument("step: size mismatch");
  Field b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = sigma_.sigma(u[i]) * increment[i];
  std::vector<std::complex<double>> bhat, uhat;
  ws_.forward(b, bhat);
  ws_.forward(u, uhat);
  for (std::size_t m = 0; m < uhat.size(); ++m)
    uhat[m] = semigroup_mult_[m] * uhat[m] + stoch_filter_[m] * bhat[m];
  ws_.backward(uhat, u);
}

void Simulator::step_pair(Field& u, Field& v, const Field& increment) const {
  const std::size_t n = u.size();
  if (v.size() != n || increment.size() != n) throw std::invalid_argument("step_pair: size mismatch");
  Field bu(n), bv(n);
  for (std::size_t i = 0; i < n; ++i) {
    bu[i] = sigma_.sigma(u[i]) * increment[i];
    bv[i] = sigma_.dsigma(u[i]) * v[i] * increment[i];
  }
  std::vector<std::complex<double>> hat, src;
  ws_.forward(bu, hat);
  ws_.forward(u, src);
  for (std::size_t m = 0; m < src.size(); ++m)
    src[m] = semigroup_mult_[m] * src[m] + stoch_filter_[m] * hat[m];
  ws_.backward(src, u);
  ws_.forward(bv, hat);
  ws_.forward(v, src);
  for (std::size_t m = 0; m < src.size(); ++m)
    src[m] = semigroup_mult_[m] * src[m] + stoch_filter_[m] * hat[m];
  ws_.backward(src, v);
}

Trajectory Simulator::simulate(double t_end, std::span<const double> output_times,
                               RandomStream& rng, bool store_noise) const {
  if (t_end < 0) throw std::invalid_argument("simulate: t_end must be nonnegative");
  const double dt = grid_.dt;
  const double tol = 1e-9 * std::max(1.0, t_end);
  const long steps = std::lround(t_end / dt);
  if (std::abs(double(steps) * dt - t_end) > tol)
    throw std::invalid_argument("simulate: t_end is not a multiple of dt");

  // Map each output time to its step index, preserving the requested order.
  std::vector<std::pair<long, std::size_t>> slots;
  slots.reserve(output_times.size());
  for (std::size_t i = 0; i < output_times.size(); ++i) {
    const double t = output_times[i];
    const long k = std::lround(t / dt);
    if (k < 0 || k > steps || std::abs(double(k) * dt - t) > tol)
      throw std::invalid_argument("simulate: output time is not a grid time in [0, t_end]");
    slots.emplace_back(k, i);
  }
  std::sort(slots.begin(), slots.end());

  Trajectory traj;
  traj.grid = grid_;
  traj.stored_noise = store_noise;
  traj.steps = int(steps);
  traj.frames.resize(output_times.size());

  Field u(grid_.total_sites(), 1.0);
  Field inc;
  std::size_t next = 0;
  auto capture = [&](long k) {
    while (next < slots.size() && slots[next].first == k) {
      auto& fr = traj.frames[slots[next].second];
      fr.t = double(k) * dt;
      fr.values = u;
      ++next;
    }
  };
  capture(0);
  for (long k = 1; k <= steps; ++k) {
    draw_increment(rng, inc);
    if (store_noise) traj.noise.push_back(inc);
    step(u, inc);
    double acc = 0;  // NaN/Inf at any site poisons the sum
    for (double x : u) acc += x;
    if (!std::isfinite(acc))
      throw std::runtime_error("simulate: field blew up at step " + std::to_string(k) +
                               " (t = " + std::to_string(double(k) * dt) + ")");
    capture(k);
  }
  return traj;
}

void export_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  const int M = traj.grid.sites;
  out << "t,x_index,u\n";
  for (const auto& fr : traj.frames)
    for (std::size_t j = 0; j < fr.values.size(); ++j)
      out << fr.t << ',' << j << ',' << fr.values[j] << '\n';
}

void export_frame_summaries_json(const Trajectory& traj, const std::string& path) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& fr : traj.frames) {
    const auto s = summarize_frame(fr);
    doc.push_back({{"t", s.t},
                   {"mean", s.mean},
                   {"second_moment", s.second_moment},
                   {"min", s.min},
                   {"max", s.max},
                   {"nonpositive_sites", s.nonpositive_sites}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace shelab
