#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qbp/image.hpp"
#include "qbp/sensor.hpp"

namespace qbp {

/// Ordered burst of sensor frames at a fixed period. Binary frames
/// (bit_depth 1) are stored bit-packed row-major, LSB-first within each byte
/// (the on-disk payload layout); deeper frames use one int16 per pixel.
/// Signed storage lets conventional-sensor frames keep negative read-noise
/// excursions (black-level-subtracted convention), which the closed-form
/// noise model assumes; bit depths up to 8 only ever hold 0..255.
class FrameSequence {
 public:
  FrameSequence() = default;
  FrameSequence(int width, int height, int n_frames, int bit_depth);

  int width() const { return width_; }
  int height() const { return height_; }
  int n_frames() const { return n_frames_; }
  int bit_depth() const { return bit_depth_; }
  bool binary() const { return bit_depth_ == 1; }

  double frame_period_s = 0.0;   // start-to-start spacing
  double exposure_s = 0.0;       // integration time (defaults to the period)
  uint64_t seed = 0;             // seed the sequence was generated from
  SensorSpec spec;               // sensor that produced it
  std::string extra_metadata;    // additional key=value lines carried in-container

  int get(int frame, int x, int y) const {
    if (bit_depth_ == 1) {
      const size_t bit = static_cast<size_t>(y) * width_ + x;
      return (packed_[frame][bit >> 3] >> (bit & 7)) & 1;
    }
    return wide_[frame][static_cast<size_t>(y) * width_ + x];
  }

  void set(int frame, int x, int y, int value);

  /// Raw packed payload of one binary frame ((W*H+7)/8 bytes).
  const std::vector<uint8_t>& packed_frame(int frame) const { return packed_[frame]; }
  std::vector<uint8_t>& packed_frame(int frame) { return packed_[frame]; }
  const std::vector<int16_t>& wide_frame(int frame) const { return wide_[frame]; }
  std::vector<int16_t>& wide_frame(int frame) { return wide_[frame]; }

  /// Number of set bits in a row of a binary frame (fast path for sums).
  void add_frame_to(int frame, Image<double>& acc) const;

  /// Timestamp of a frame's midpoint, frame 0 starting at t = 0.
  double frame_mid_time(int frame) const { return frame * frame_period_s + 0.5 * exposure_s; }

 private:
  int width_ = 0, height_ = 0, n_frames_ = 0, bit_depth_ = 1;
  std::vector<std::vector<uint8_t>> packed_;   // bit_depth == 1
  std::vector<std::vector<int16_t>> wide_;    // bit_depth > 1
};

/// Sum of frames [first, first + count) into an integer count image.
SumImage sum_frames(const FrameSequence& seq, int first, int count);

/// Sum of all frames.
SumImage sum_all_frames(const FrameSequence& seq);

}  // namespace qbp
