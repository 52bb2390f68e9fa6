#include "qbp/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <utility>
#include <vector>

namespace qbp {

namespace {

// PNM-family header token: skips whitespace and '#' comment lines.
std::string next_token(std::istream& in) {
  std::string tok;
  for (;;) {
    const int c = in.get();
    if (c == EOF) throw IoError("unexpected end of header");
    if (c == '#') {
      std::string junk;
      std::getline(in, junk);
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
}

bool host_little_endian() {
  const uint16_t probe = 1;
  uint8_t byte;
  std::memcpy(&byte, &probe, 1);
  return byte == 1;
}

void byteswap_f32(float* v, size_t n) {
  auto* b = reinterpret_cast<uint8_t*>(v);
  for (size_t i = 0; i < n; ++i) {
    std::swap(b[4 * i + 0], b[4 * i + 3]);
    std::swap(b[4 * i + 1], b[4 * i + 2]);
  }
}

}  // namespace

Image<double> read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  const std::string magic = next_token(in);
  if (magic != "Pf" && magic != "PF") throw IoError(path + ": not a PFM file");
  const int channels = magic == "PF" ? 3 : 1;
  const int w = std::stoi(next_token(in));
  const int h = std::stoi(next_token(in));
  const double scale = std::stod(next_token(in));
  if (w <= 0 || h <= 0) throw IoError(path + ": bad dimensions");
  const bool file_little = scale < 0.0;
  std::vector<float> row(static_cast<size_t>(w) * channels);
  Image<double> img(w, h);
  // PFM stores rows bottom-to-top.
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    if (!in) throw IoError(path + ": truncated pixel data");
    if (file_little != host_little_endian()) byteswap_f32(row.data(), row.size());
    for (int x = 0; x < w; ++x) {
      // RGB input: keep the green channel (analysis is single-channel).
      img.at(x, y) = channels == 3 ? row[static_cast<size_t>(x) * 3 + 1] : row[static_cast<size_t>(x)];
    }
  }
  return img;
}

void write_pfm(const std::string& path, const Image<double>& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path);
  out << "Pf\n" << img.width << " " << img.height << "\n-1.0\n";
  std::vector<float> row(static_cast<size_t>(img.width));
  for (int y = img.height - 1; y >= 0; --y) {
    for (int x = 0; x < img.width; ++x) row[static_cast<size_t>(x)] = static_cast<float>(img.at(x, y));
    if (!host_little_endian()) byteswap_f32(row.data(), row.size());
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
  }
  if (!out) throw IoError("write failed: " + path);
}

Image<double> read_pgm16(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  if (next_token(in) != "P5") throw IoError(path + ": not a binary PGM");
  const int w = std::stoi(next_token(in));
  const int h = std::stoi(next_token(in));
  const int maxval = std::stoi(next_token(in));
  if (w <= 0 || h <= 0) throw IoError(path + ": bad dimensions");
  Image<double> img(w, h);
  if (maxval > 255) {
    std::vector<uint8_t> row(static_cast<size_t>(w) * 2);
    for (int y = 0; y < h; ++y) {
      in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
      if (!in) throw IoError(path + ": truncated pixel data");
      for (int x = 0; x < w; ++x)
        img.at(x, y) = row[2 * static_cast<size_t>(x)] * 256 + row[2 * static_cast<size_t>(x) + 1];
    }
  } else {
    std::vector<uint8_t> row(static_cast<size_t>(w));
    for (int y = 0; y < h; ++y) {
      in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
      if (!in) throw IoError(path + ": truncated pixel data");
      for (int x = 0; x < w; ++x) img.at(x, y) = row[static_cast<size_t>(x)];
    }
  }
  return img;
}

FluxImage read_flux_image(const std::string& path) {
  Image<double> img;
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".pfm") {
    img = read_pfm(path);
  } else if (ext == ".pgm") {
    img = read_pgm16(path);
  } else {
    throw IoError("unsupported flux image format (want .pfm or .pgm): " + path);
  }
  for (const double v : img.data) {
    if (!std::isfinite(v) || v < 0.0) throw IoError(path + ": flux pixels must be finite and >= 0");
  }
  return img;
}

void write_pgm16(const std::string& path, const Image<double>& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path);
  out << "P5\n" << img.width << " " << img.height << "\n65535\n";
  std::vector<uint8_t> row(static_cast<size_t>(img.width) * 2);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double v = std::clamp(img.at(x, y), 0.0, 1.0);
      const auto q = static_cast<uint16_t>(std::lround(v * 65535.0));
      row[2 * static_cast<size_t>(x)] = static_cast<uint8_t>(q >> 8);
      row[2 * static_cast<size_t>(x) + 1] = static_cast<uint8_t>(q & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("write failed: " + path);
}

void write_pgm8(const std::string& path, const Image<double>& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<uint8_t> row(static_cast<size_t>(img.width));
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double v = std::clamp(img.at(x, y), 0.0, 1.0);
      row[static_cast<size_t>(x)] = static_cast<uint8_t>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace qbp
