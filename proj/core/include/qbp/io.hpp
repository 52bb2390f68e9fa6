#pragma once

#include <string>

#include "qbp/image.hpp"

namespace qbp {

/// Thrown for malformed or unreadable files (distinct from model-domain errors).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Reads a flux image: PFM (32-bit float, grayscale or RGB collapsed to the
/// green channel) or 16-bit binary PGM (values taken as-is). Pixels must be
/// finite and >= 0.
FluxImage read_flux_image(const std::string& path);

/// PFM grayscale writer (little-endian, scale -1), top row last per convention.
void write_pfm(const std::string& path, const Image<double>& img);
Image<double> read_pfm(const std::string& path);

/// Binary PGM writers. 16-bit values are big-endian per the format.
/// `img` values are clamped to [0, 1] and scaled to the full range.
void write_pgm16(const std::string& path, const Image<double>& img);
void write_pgm8(const std::string& path, const Image<double>& img);
Image<double> read_pgm16(const std::string& path);  // returns raw values in [0, 65535]

}  // namespace qbp
