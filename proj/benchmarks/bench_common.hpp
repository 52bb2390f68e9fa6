#pragma once

#include <cmath>

#include "qbp/image.hpp"
#include "qbp/sensor.hpp"

namespace bench {

/// Multi-scale sinusoid texture around a mean flux level, strictly positive.
inline qbp::FluxImage textured_flux(int w, int h, double mean_flux) {
  qbp::FluxImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double s = 1.0 + 0.5 * std::sin(2 * M_PI * x / 17.0) * std::sin(2 * M_PI * y / 13.0) +
                       0.3 * std::sin(2 * M_PI * (x + y) / 41.0) +
                       0.15 * std::sin(2 * M_PI * x / 7.0) * std::cos(2 * M_PI * y / 5.0);
      img.at(x, y) = mean_flux * std::max(s, 0.05);
    }
  }
  return img;
}

inline qbp::SensorSpec bench_spad() {
  qbp::SensorSpec spec;  // SPAD defaults; pin the rate so timings stay comparable
  spec.frame_rate_fps = 100000.0;
  spec.dark_rate = 0.0;
  return spec;
}

}  // namespace bench
