#pragma once

#include <string>

#include "qbp/frame_sequence.hpp"

namespace qbp {

/// .qbs binary-burst container.
///
/// Layout (all integers little-endian):
///   offset  size  field
///        0     4  magic "QBS1"
///        4     2  version (currently 1)
///        6     2  width
///        8     2  height
///       10     1  bit_depth
///       11     1  reserved (0)
///       12     4  n_frames
///       16     8  frame_period, nanoseconds
///       24     8  seed
///   ---- 32 bytes total ----
///   frame payload, n_frames frames back to back, row-major:
///     bit_depth 1    -> (width*height + 7)/8 bytes, bits LSB-first per byte
///     bit_depth 2..8 -> one byte per pixel
///   optional metadata block: u32 byte length + UTF-8 key=value lines
///   (sensor spec, exposure_s, and any extra lines round-trip here).
///
/// Sequences with bit_depth > 8 (e.g. 10-bit conventional bursts) are not
/// representable and are rejected with a domain error.
void write_qbs(const std::string& path, const FrameSequence& seq);
FrameSequence read_qbs(const std::string& path);

}  // namespace qbp
