#include "qbp/frame_sequence.hpp"

#include <stdexcept>

#include "qbp/parallel.hpp"

namespace qbp {

FrameSequence::FrameSequence(int width, int height, int n_frames, int bit_depth)
    : width_(width), height_(height), n_frames_(n_frames), bit_depth_(bit_depth) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("frame dimensions must be positive");
  if (n_frames < 0) throw std::invalid_argument("n_frames must be >= 0");
  if (bit_depth < 1 || bit_depth > 16) throw std::invalid_argument("bit_depth must be in [1, 16]");
  if (bit_depth == 1) {
    const size_t bytes = (static_cast<size_t>(width) * height + 7) / 8;
    packed_.assign(static_cast<size_t>(n_frames), std::vector<uint8_t>(bytes, 0));
  } else {
    wide_.assign(static_cast<size_t>(n_frames),
                 std::vector<int16_t>(static_cast<size_t>(width) * height, 0));
  }
}

void FrameSequence::set(int frame, int x, int y, int value) {
  const int maxv = (1 << bit_depth_) - 1;
  const int minv = bit_depth_ > 8 ? INT16_MIN : 0;  // deep frames carry signed noise
  if (value < minv || value > std::min<int>(maxv, INT16_MAX))
    throw std::invalid_argument("pixel value out of range for bit depth");
  if (bit_depth_ == 1) {
    const size_t bit = static_cast<size_t>(y) * width_ + x;
    auto& byte = packed_[frame][bit >> 3];
    const uint8_t mask = static_cast<uint8_t>(1u << (bit & 7));
    byte = value ? (byte | mask) : (byte & ~mask);
  } else {
    wide_[frame][static_cast<size_t>(y) * width_ + x] = static_cast<int16_t>(value);
  }
}

void FrameSequence::add_frame_to(int frame, Image<double>& acc) const {
  if (bit_depth_ == 1) {
    const auto& buf = packed_[frame];
    const size_t npix = static_cast<size_t>(width_) * height_;
    for (size_t i = 0; i < npix; ++i) {
      acc.data[i] += (buf[i >> 3] >> (i & 7)) & 1;
    }
  } else {
    const auto& buf = wide_[frame];
    for (size_t i = 0; i < buf.size(); ++i) acc.data[i] += buf[i];
  }
}

SumImage sum_frames(const FrameSequence& seq, int first, int count) {
  if (first < 0 || count <= 0 || first + count > seq.n_frames())
    throw std::invalid_argument("sum_frames: frame range out of bounds");
  SumImage out;
  out.counts = Image<int32_t>(seq.width(), seq.height(), 0);
  out.n_frames_summed = count;
  if (seq.binary()) {
    // Parallel over rows: each row reads all frames once; disjoint writes.
    parallel_for(0, seq.height(), [&](int64_t y) {
      const size_t row0 = static_cast<size_t>(y) * seq.width();
      for (int f = first; f < first + count; ++f) {
        const auto& buf = seq.packed_frame(f);
        for (int x = 0; x < seq.width(); ++x) {
          const size_t i = row0 + x;
          out.counts.data[i] += (buf[i >> 3] >> (i & 7)) & 1;
        }
      }
    });
  } else {
    parallel_for(0, seq.height(), [&](int64_t y) {
      const size_t row0 = static_cast<size_t>(y) * seq.width();
      for (int f = first; f < first + count; ++f) {
        const auto& buf = seq.wide_frame(f);
        for (int x = 0; x < seq.width(); ++x) out.counts.data[row0 + x] += buf[row0 + x];
      }
    });
  }
  return out;
}

SumImage sum_all_frames(const FrameSequence& seq) { return sum_frames(seq, 0, seq.n_frames()); }

}  // namespace qbp
