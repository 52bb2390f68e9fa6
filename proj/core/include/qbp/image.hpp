#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qbp {

/// Row-major 2D array. Single plane; multi-channel data is handled as one
/// Image per channel (sensor specs carry per-channel efficiencies).
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(checked_area(w, h), fill) {}

  T& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }

  /// Clamped read: out-of-bounds coordinates are clipped to the border pixel.
  const T& at_clamped(int x, int y) const {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return at(x, y);
  }

  size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const { return width == o.width && height == o.height; }

 private:
  static size_t checked_area(int w, int h) {
    if (w < 0 || h < 0) throw std::invalid_argument("image dimensions must be nonnegative");
    return static_cast<size_t>(w) * static_cast<size_t>(h);
  }
};

/// Linear-intensity photon flux map (photons/pixel/second), finite and >= 0.
using FluxImage = Image<double>;

/// Integer photon-count image formed by summing binary frames.
struct SumImage {
  Image<int32_t> counts;
  int n_frames_summed = 0;
};

template <typename T, typename U>
void require_same_shape(const Image<T>& a, const Image<U>& b, const char* what) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

/// Bilinear sample with border clamping; (x, y) in pixel-center coordinates.
inline double bilinear_at(const Image<double>& img, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  const double v00 = img.at_clamped(x0, y0), v10 = img.at_clamped(x0 + 1, y0);
  const double v01 = img.at_clamped(x0, y0 + 1), v11 = img.at_clamped(x0 + 1, y0 + 1);
  return (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 + fx * fy * v11;
}

}  // namespace qbp
