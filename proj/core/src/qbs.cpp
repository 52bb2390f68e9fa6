#include "qbp/qbs.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "qbp/io.hpp"

namespace qbp {

namespace {

constexpr char kMagic[4] = {'Q', 'B', 'S', '1'};
constexpr uint16_t kVersion = 1;

template <typename T>
void put_le(std::string& buf, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const uint8_t* p) {
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void write_qbs(const std::string& path, const FrameSequence& seq) {
  if (seq.bit_depth() > 8)
    throw std::invalid_argument("the .qbs container holds at most 8-bit frames; got bit depth " +
                                std::to_string(seq.bit_depth()));
  if (seq.width() > 0xffff || seq.height() > 0xffff)
    throw std::invalid_argument(".qbs dimensions are limited to 65535");
  if (!(seq.frame_period_s > 0.0)) throw std::invalid_argument(".qbs needs a positive frame period");

  std::string header;
  header.append(kMagic, 4);
  put_le<uint16_t>(header, kVersion);
  put_le<uint16_t>(header, static_cast<uint16_t>(seq.width()));
  put_le<uint16_t>(header, static_cast<uint16_t>(seq.height()));
  header.push_back(static_cast<char>(seq.bit_depth()));
  header.push_back(0);  // reserved
  put_le<uint32_t>(header, static_cast<uint32_t>(seq.n_frames()));
  put_le<uint64_t>(header, static_cast<uint64_t>(std::llround(seq.frame_period_s * 1e9)));
  put_le<uint64_t>(header, seq.seed);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  if (seq.bit_depth() == 1) {
    for (int f = 0; f < seq.n_frames(); ++f) {
      const auto& buf = seq.packed_frame(f);
      out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }
  } else {
    std::vector<uint8_t> row(static_cast<size_t>(seq.width()) * seq.height());
    for (int f = 0; f < seq.n_frames(); ++f) {
      const auto& buf = seq.wide_frame(f);
      for (size_t i = 0; i < buf.size(); ++i) row[i] = static_cast<uint8_t>(buf[i]);
      out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
  }

  std::ostringstream meta;
  meta << sensor_to_metadata(seq.spec);
  meta.precision(17);
  meta << "exposure_s=" << seq.exposure_s << "\n";
  if (!seq.extra_metadata.empty()) meta << seq.extra_metadata;
  const std::string meta_str = meta.str();
  std::string meta_len;
  put_le<uint32_t>(meta_len, static_cast<uint32_t>(meta_str.size()));
  out.write(meta_len.data(), 4);
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  if (!out) throw IoError("write failed: " + path);
}

FrameSequence read_qbs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  uint8_t header[32];
  in.read(reinterpret_cast<char*>(header), 32);
  if (!in) throw IoError(path + ": truncated header");
  if (std::memcmp(header, kMagic, 4) != 0) throw IoError(path + ": not a .qbs file");
  const auto version = get_le<uint16_t>(header + 4);
  if (version != kVersion) throw IoError(path + ": unsupported version " + std::to_string(version));
  const int w = get_le<uint16_t>(header + 6);
  const int h = get_le<uint16_t>(header + 8);
  const int bit_depth = header[10];
  const auto n_frames = get_le<uint32_t>(header + 12);
  const auto period_ns = get_le<uint64_t>(header + 16);
  const auto seed = get_le<uint64_t>(header + 24);
  if (w <= 0 || h <= 0 || bit_depth < 1 || bit_depth > 8) throw IoError(path + ": bad header fields");

  FrameSequence seq(w, h, static_cast<int>(n_frames), bit_depth);
  seq.frame_period_s = static_cast<double>(period_ns) * 1e-9;
  seq.exposure_s = seq.frame_period_s;
  seq.seed = seed;

  if (bit_depth == 1) {
    for (uint32_t f = 0; f < n_frames; ++f) {
      auto& buf = seq.packed_frame(static_cast<int>(f));
      in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
      if (!in) throw IoError(path + ": truncated frame payload");
    }
  } else {
    std::vector<uint8_t> row(static_cast<size_t>(w) * h);
    for (uint32_t f = 0; f < n_frames; ++f) {
      in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
      if (!in) throw IoError(path + ": truncated frame payload");
      auto& buf = seq.wide_frame(static_cast<int>(f));
      for (size_t i = 0; i < row.size(); ++i) buf[i] = row[i];
    }
  }

  // Optional metadata block.
  uint8_t len_buf[4];
  in.read(reinterpret_cast<char*>(len_buf), 4);
  if (in) {
    const auto meta_len = get_le<uint32_t>(len_buf);
    std::string meta(meta_len, '\0');
    in.read(meta.data(), meta_len);
    if (!in) throw IoError(path + ": truncated metadata block");
    seq.spec = sensor_from_metadata(meta);
    std::istringstream is(meta);
    std::string line;
    std::ostringstream extra;
    while (std::getline(is, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(0, eq);
      if (key == "exposure_s") {
        seq.exposure_s = std::stod(line.substr(eq + 1));
      } else if (key.rfind("sensor_", 0) != 0 && key.rfind("pde_", 0) != 0 && key != "bit_depth" &&
                 key != "read_noise_e" && key != "dark_rate" && key != "frame_rate_fps" &&
                 key != "full_well_e" && key != "active_channel") {
        extra << line << "\n";
      }
    }
    seq.extra_metadata = extra.str();
  }
  return seq;
}

}  // namespace qbp
