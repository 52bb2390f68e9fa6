#pragma once

#include <array>
#include <string>

namespace qbp {

enum class SensorKind { Spad, Jot, Conventional };

/// Physical sensor description. Efficiency (PDE / QE) is stored per RGB
/// channel; single-channel (grayscale) work reads channel 1 (green) by
/// convention, matching the measured green-channel values used throughout.
struct SensorSpec {
  SensorKind kind = SensorKind::Spad;
  int bit_depth = 1;                        // ADC bits (1 for binary sensors)
  std::array<double, 3> pde{0.17, 0.23, 0.21};  // quantum/photon detection efficiency per channel
  double read_noise_e = 0.0;                // RMS read noise, electrons
  double dark_rate = 0.0;                   // dark counts: cps for SPAD/jot, e-/s for conventional
  double frame_rate_fps = 97700.0;          // frames per second
  double full_well_e = 10000.0;             // conventional full-well capacity, electrons
  int active_channel = 1;                   // channel used for grayscale simulation/analysis

  double exposure_s() const { return 1.0 / frame_rate_fps; }
  double eta() const { return pde[static_cast<size_t>(active_channel)]; }

  void validate() const;
};

/// Named presets mirroring the hardware this model targets.
/// - "spad-swiss2":        512x256 SwissSPAD2 array, 1-bit, PDE 17/23/21 %, zero read
///                         noise, 7.5 cps dark count rate, 97 700 fps.
/// - "conv-machinevision": 10-bit machine-vision sensor, QE 59/64/47 %, read noise
///                         2.4 e-, dark current 1 e-/s.
/// - "conv-iphone7":       machine-vision parameters with 0.68 e- read noise (the
///                         only published figure for that sensor; rest inherited).
/// - "jot":                1-bit jot array, PDE 64/71/62 %, read noise 0.24 e-,
///                         dark current 0.16 e-/s, 1000 fps.
/// Full-well capacity is not published for these parts; the configurable default
/// is 10 000 e-.
SensorSpec sensor_preset(const std::string& name);

/// Serialize/parse a spec as key=value lines (used by the .qbs metadata block).
std::string sensor_to_metadata(const SensorSpec& spec);
SensorSpec sensor_from_metadata(const std::string& text);

}  // namespace qbp
