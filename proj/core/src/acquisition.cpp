// SPDX-License-Identifier: Apache-2.0
#include "nwi/acquisition.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace nwi {

double Waveform::eval(double t) const {
  const double tc = cycles / (2.0 * f0);
  const double sigma = cycles / (6.0 * f0);
  const double arg = (t - tc) / sigma;
  return amplitude * std::sin(2.0 * std::numbers::pi * f0 * (t - tc)) *
         std::exp(-0.5 * arg * arg);
}

void EmissionPlan::validate(int nc, double dt) const {
  if (n_emissions < 1) throw InvalidGeometry("plan: n_emissions must be >= 1");
  if (aperture_elements < 1 || stride_elements < 0)
    throw InvalidGeometry("plan: bad aperture/stride");
  if (aperture_elements + (n_emissions - 1) * stride_elements > nc)
    throw ApertureOutOfArray("plan: aperture + (n_emissions-1)*stride exceeds nc = " +
                             std::to_string(nc));
  if (!(waveform.f0 < 0.5 / dt))
    throw NyquistViolation("plan: f0 = " + std::to_string(waveform.f0) +
                           " Hz is not below Nyquist " + std::to_string(0.5 / dt) + " Hz");
  if (!(assumed_sos > 0.0)) throw InvalidProperty("plan: assumed_sos must be > 0");
  if (!(focus_depth > 0.0)) throw InvalidProperty("plan: focus_depth must be > 0");
}

std::vector<double> focal_delays(const EmissionPlan& plan,
                                 const std::vector<double>& offsets) {
  std::vector<double> tau(offsets.size());
  const double p = plan.focus_depth, c = plan.assumed_sos;
  for (size_t j = 0; j < offsets.size(); ++j)
    tau[j] = (p - std::sqrt(p * p + offsets[j] * offsets[j])) / c;
  return tau;
}

std::vector<double> aperture_offsets(const ProbeGeometry& geom, double dx, int first_element,
                                     int count) {
  if (first_element < 0 || first_element + count > geom.nc())
    throw ApertureOutOfArray("aperture [" + std::to_string(first_element) + ", " +
                             std::to_string(first_element + count) + ") outside array of " +
                             std::to_string(geom.nc()) + " elements");
  double centre = 0.0;
  for (int j = 0; j < count; ++j)
    centre += geom.element_cells[first_element + j].second;
  centre /= count;
  std::vector<double> d(count);
  for (int j = 0; j < count; ++j)
    d[j] = (geom.element_cells[first_element + j].second - centre) * dx;
  return d;
}

PulseField synthesize_from_delays(const Waveform& waveform, const ProbeGeometry& geom,
                                  const SimulationGrid& grid, int first_element, int count,
                                  const std::vector<double>& delays) {
  if (static_cast<int>(delays.size()) != count)
    throw ShapeMismatch("synthesize: delays size must equal element count");
  geom.validate_inside(grid.nx, grid.nz);
  PulseField pulse(grid.nx, grid.nz, grid.nt);
  for (int j = 0; j < count; ++j) {
    const auto [r, c] = geom.element_cells[first_element + j];
    std::vector<double> trace(grid.nt);
    for (int n = 0; n < grid.nt; ++n) trace[n] = waveform.eval(n * grid.dt - delays[j]);
    pulse.add_source(r, c, std::move(trace));
  }
  return pulse;
}

PulseField synthesize_focused(const EmissionPlan& plan, const ProbeGeometry& geom,
                              const SimulationGrid& grid, int emission_index) {
  plan.validate(geom.nc(), grid.dt);
  if (emission_index < 0 || emission_index >= plan.n_emissions)
    throw ApertureOutOfArray("synthesize_focused: emission index out of plan");
  const int first = emission_index * plan.stride_elements;
  const auto offsets = aperture_offsets(geom, grid.dx, first, plan.aperture_elements);
  const auto delays = focal_delays(plan, offsets);
  return synthesize_from_delays(plan.waveform, geom, grid, first, plan.aperture_elements, delays);
}

PulseField synthesize_plane(const Waveform& waveform, const ProbeGeometry& geom,
                            const SimulationGrid& grid, double steer_angle, double assumed_sos) {
  if (!(std::fabs(steer_angle) < std::numbers::pi / 2))
    throw InvalidGeometry("synthesize_plane: |steer_angle| must be < pi/2");
  const int nc = geom.nc();
  const auto offsets = aperture_offsets(geom, grid.dx, 0, nc);
  std::vector<double> delays(nc);
  for (int j = 0; j < nc; ++j) delays[j] = offsets[j] * std::sin(steer_angle) / assumed_sos;
  return synthesize_from_delays(waveform, geom, grid, 0, nc, delays);
}

PulseField synthesize_diverging(const Waveform&, const ProbeGeometry&,
                                const SimulationGrid&) {
  throw Error("synthesize_diverging: not implemented (no delay law defined)");
}

namespace {

// splitmix64; used to decorrelate derived seeds.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Box-Muller on top of mt19937_64; self-contained so streams are
// reproducible independent of the standard library's distributions.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : eng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  double uniform() { return (eng_() >> 11) * 0x1.0p-53; }
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace

std::uint64_t emission_seed(std::uint64_t base_seed, int emission_index) {
  return mix64(base_seed ^ mix64(static_cast<std::uint64_t>(emission_index) + 1));
}

ChannelData add_noise(const ChannelData& ch, double snr, std::uint64_t seed) {
  if (std::isinf(snr)) return ch;
  if (!(snr > 0.0)) throw InvalidProperty("add_noise: snr must be > 0 or infinity");

  double power = 0.0;
  for (double s : ch.samples) power += s * s;
  power /= static_cast<double>(ch.samples.size());
  if (power == 0.0) throw ZeroSignal("add_noise: signal power is zero with finite snr");

  const double sigma = std::sqrt(power / snr);
  GaussianStream g(seed);
  ChannelData out = ch;
  for (double& s : out.samples) s += sigma * g.next();
  return out;
}

std::vector<Emission> acquire_sequence(const PropertySet& props_true, const EmissionPlan& plan,
                                       const ProbeGeometry& geom, const SimulationGrid& grid,
                                       const PmlConfig& pml, double snr, std::uint64_t seed,
                                       const SolverLimits& limits) {
  plan.validate(geom.nc(), grid.dt);
  std::vector<Emission> out;
  out.reserve(plan.n_emissions);
  for (int l = 0; l < plan.n_emissions; ++l) {
    Emission e;
    e.pulse = synthesize_focused(plan, geom, grid, l);
    e.noise_seed = emission_seed(seed, l);
    const ChannelData clean = simulate_channels(props_true, e.pulse, grid, pml, geom, limits);
    e.measured = add_noise(clean, snr, e.noise_seed);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace nwi
