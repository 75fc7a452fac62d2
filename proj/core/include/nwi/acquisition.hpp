// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "nwi/forward.hpp"
#include "nwi/inversion.hpp"
#include "nwi/pulse.hpp"

namespace nwi {

/// Gaussian-modulated sinusoid: amplitude * sin(2 pi f0 (t - tc)) with a
/// Gaussian envelope spanning roughly `cycles` periods (tc = cycles/(2 f0),
/// sigma = cycles/(6 f0)), evaluated analytically.
struct Waveform {
  double f0 = 4e6;       // Hz
  double cycles = 3.0;
  double amplitude = 0;  // forcing units (Pa/s^2)

  double eval(double t) const;
};

/// A sweep of focused-beam emissions across the array.
struct EmissionPlan {
  int n_emissions = 1;
  int aperture_elements = 16;
  int stride_elements = 4;
  Waveform waveform;
  double focus_depth = 5e-3;  // m
  double assumed_sos = 1480;  // m/s

  void validate(int nc, double dt) const;
};

/// Per-element focusing delays tau_j = (P - sqrt(P^2 + d_j^2)) / c_bar,
/// with d_j the lateral offset from the aperture centre. All delays are
/// <= 0, zero at the centre.
std::vector<double> focal_delays(const EmissionPlan& plan,
                                 const std::vector<double>& element_lateral_offsets);

/// Lateral offsets (metres) of count elements starting at first_element,
/// measured from that aperture's centroid.
std::vector<double> aperture_offsets(const ProbeGeometry& geom, double dx, int first_element,
                                     int count);

/// Apply the waveform with explicit per-element delays:
/// F[r_j][c_j][n] = s(n dt - tau_j).
PulseField synthesize_from_delays(const Waveform& waveform, const ProbeGeometry& geom,
                                  const SimulationGrid& grid, int first_element, int count,
                                  const std::vector<double>& delays);

/// Focused beam for one emission of the plan; the active aperture starts
/// at emission_index * stride.
PulseField synthesize_focused(const EmissionPlan& plan, const ProbeGeometry& geom,
                              const SimulationGrid& grid, int emission_index);

/// Steered plane wave over the full array: tau_j = x_j sin(angle) / c_bar
/// with x_j measured from the array centre.
PulseField synthesize_plane(const Waveform& waveform, const ProbeGeometry& geom,
                            const SimulationGrid& grid, double steer_angle, double assumed_sos);

/// Diverging waves are named alongside plane and focused beams but no
/// delay law is specified for them; this always throws.
PulseField synthesize_diverging(const Waveform& waveform, const ProbeGeometry& geom,
                                const SimulationGrid& grid);

/// Additive zero-mean i.i.d. Gaussian noise at the given linear-power SNR;
/// snr = infinity returns the input unchanged. Deterministic per seed.
ChannelData add_noise(const ChannelData& ch, double snr, std::uint64_t seed);

/// Derive the per-emission noise seed from the dataset seed.
std::uint64_t emission_seed(std::uint64_t base_seed, int emission_index);

/// Synthesize, simulate with the ground-truth properties, and add noise
/// for every emission of the plan.
std::vector<Emission> acquire_sequence(const PropertySet& props_true, const EmissionPlan& plan,
                                       const ProbeGeometry& geom, const SimulationGrid& grid,
                                       const PmlConfig& pml, double snr, std::uint64_t seed,
                                       const SolverLimits& limits = {});

}  // namespace nwi
