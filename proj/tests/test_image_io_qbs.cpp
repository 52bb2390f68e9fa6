#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "qbp/image.hpp"
#include "qbp/io.hpp"
#include "qbp/qbs.hpp"
#include "qbp/rng.hpp"
#include "qbp/sensor.hpp"

using namespace qbp;

namespace {

std::string tmp_path(const std::string& name) {
  return std::string("qbp_test_") + name;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("image access and bilinear sampling") {
  Image<double> img(4, 3, 0.0);
  img.at(1, 2) = 5.0;
  CHECK(img.at_clamped(-3, 2) == img.at(0, 2));
  CHECK(img.at_clamped(9, 9) == img.at(3, 2));
  CHECK(img.size() == 12);

  Image<double> ramp(4, 4, 0.0);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) ramp.at(x, y) = x + 10.0 * y;
  CHECK(bilinear_at(ramp, 2.0, 1.0) == doctest::Approx(12.0));
  CHECK(bilinear_at(ramp, 1.5, 1.0) == doctest::Approx(11.5));
  CHECK(bilinear_at(ramp, 1.5, 1.5) == doctest::Approx(16.5));

  CHECK_THROWS_AS(Image<double>(-1, 4), std::invalid_argument);
}

TEST_CASE("pfm round trip") {
  Image<double> img(5, 3, 0.0);
  RngStream r(1, 0, 0);
  for (auto& v : img.data) v = 1000.0 * r.uniform();
  const std::string path = tmp_path("a.pfm");
  write_pfm(path, img);
  const Image<double> back = read_pfm(path);
  REQUIRE(back.width == 5);
  REQUIRE(back.height == 3);
  for (size_t i = 0; i < img.data.size(); ++i)
    CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-7));  // 32-bit storage

  const FluxImage flux = read_flux_image(path);
  CHECK(flux.width == 5);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_pfm(path), IoError);
}

TEST_CASE("negative flux pixels are rejected at load") {
  Image<double> img(2, 2, 1.0);
  img.at(0, 0) = -3.0;
  const std::string path = tmp_path("neg.pfm");
  write_pfm(path, img);
  CHECK_THROWS_AS(read_flux_image(path), IoError);
  std::remove(path.c_str());
}

TEST_CASE("pgm16 round trip and scaling") {
  Image<double> img(3, 2, 0.0);
  img.at(0, 0) = 0.0;
  img.at(1, 0) = 0.5;
  img.at(2, 0) = 1.0;
  img.at(0, 1) = 2.0;  // clamped to 1
  const std::string path = tmp_path("a.pgm");
  write_pgm16(path, img);
  const Image<double> raw = read_pgm16(path);
  CHECK(raw.at(0, 0) == 0.0);
  CHECK(raw.at(1, 0) == doctest::Approx(std::round(0.5 * 65535.0)));
  CHECK(raw.at(2, 0) == 65535.0);
  CHECK(raw.at(0, 1) == 65535.0);
  std::remove(path.c_str());
}

TEST_CASE("qbs container round trips byte-identically") {
  FrameSequence seq(10, 7, 4, 1);
  seq.frame_period_s = 1e-5;
  seq.exposure_s = 1e-5;
  seq.seed = 987654321;
  seq.spec = sensor_preset("spad-swiss2");
  seq.extra_metadata = "velocity_x=2.5\nnote=alpha\n";
  RngStream r(5, 0, 0);
  for (int f = 0; f < 4; ++f)
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 10; ++x) seq.set(f, x, y, r.uniform() < 0.3 ? 1 : 0);

  const std::string p1 = tmp_path("s1.qbs");
  const std::string p2 = tmp_path("s2.qbs");
  write_qbs(p1, seq);
  const FrameSequence back = read_qbs(p1);

  CHECK(back.width() == 10);
  CHECK(back.height() == 7);
  CHECK(back.n_frames() == 4);
  CHECK(back.bit_depth() == 1);
  CHECK(back.frame_period_s == seq.frame_period_s);
  CHECK(back.seed == seq.seed);
  CHECK(back.spec.kind == SensorKind::Spad);
  CHECK(back.spec.pde[1] == doctest::Approx(0.23));
  CHECK(back.spec.frame_rate_fps == doctest::Approx(97700.0));
  CHECK(back.extra_metadata.find("velocity_x=2.5") != std::string::npos);
  bool all_equal = true;
  for (int f = 0; f < 4; ++f)
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 10; ++x) all_equal &= back.get(f, x, y) == seq.get(f, x, y);
  CHECK(all_equal);

  write_qbs(p2, back);  // write -> read -> write is byte-identical
  CHECK(slurp(p1) == slurp(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("qbs bit packing is LSB-first row-major") {
  FrameSequence seq(8, 1, 1, 1);
  seq.frame_period_s = 1e-3;
  seq.set(0, 0, 0, 1);
  seq.set(0, 3, 0, 1);  // bits 0 and 3 -> byte 0b00001001
  CHECK(seq.packed_frame(0)[0] == 0x09);
  CHECK(seq.get(0, 0, 0) == 1);
  CHECK(seq.get(0, 1, 0) == 0);
  CHECK(seq.get(0, 3, 0) == 1);
}

TEST_CASE("qbs multi-bit payload and limits") {
  FrameSequence seq(3, 2, 2, 8);
  seq.frame_period_s = 1e-3;
  seq.spec = sensor_preset("jot");
  seq.spec.bit_depth = 8;
  int v = 0;
  for (int f = 0; f < 2; ++f)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 3; ++x) seq.set(f, x, y, (v += 37) % 256);
  const std::string p = tmp_path("w.qbs");
  write_qbs(p, seq);
  const FrameSequence back = read_qbs(p);
  bool all_equal = true;
  for (int f = 0; f < 2; ++f)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 3; ++x) all_equal &= back.get(f, x, y) == seq.get(f, x, y);
  CHECK(all_equal);
  std::remove(p.c_str());

  // Frames deeper than 8 bits cannot be containerized.
  FrameSequence deep(2, 2, 1, 10);
  deep.frame_period_s = 1e-3;
  CHECK_THROWS_AS(write_qbs(tmp_path("deep.qbs"), deep), std::invalid_argument);

  // Truncated payloads are I/O errors.
  const std::string pt = tmp_path("trunc.qbs");
  write_qbs(pt, seq);
  {
    const std::string full = slurp(pt);
    std::ofstream out(pt, std::ios::binary | std::ios::trunc);
    out.write(full.data(), static_cast<std::streamsize>(full.size() / 2));
  }
  CHECK_THROWS_AS(read_qbs(pt), IoError);
  std::remove(pt.c_str());
}

TEST_CASE("frame sums") {
  FrameSequence seq(4, 2, 5, 1);
  seq.frame_period_s = 1e-4;
  for (int f = 0; f < 5; ++f) seq.set(f, 1, 1, 1);
  seq.set(0, 0, 0, 1);
  seq.set(4, 0, 0, 1);

  const SumImage all = sum_all_frames(seq);
  CHECK(all.n_frames_summed == 5);
  CHECK(all.counts.at(1, 1) == 5);
  CHECK(all.counts.at(0, 0) == 2);
  CHECK(all.counts.at(3, 0) == 0);

  const SumImage part = sum_frames(seq, 1, 3);
  CHECK(part.n_frames_summed == 3);
  CHECK(part.counts.at(1, 1) == 3);
  CHECK(part.counts.at(0, 0) == 0);

  // Signed deep frames accumulate with sign.
  FrameSequence conv(2, 1, 2, 12);
  conv.frame_period_s = 1e-3;
  conv.set(0, 0, 0, -5);
  conv.set(1, 0, 0, 3);
  CHECK(conv.get(0, 0, 0) == -5);
  const SumImage s = sum_all_frames(conv);
  CHECK(s.counts.at(0, 0) == -2);

  CHECK(seq.frame_mid_time(3) == doctest::Approx(3 * 1e-4 + 0.5 * seq.exposure_s));
}

TEST_CASE("sensor metadata round trip") {
  SensorSpec spec = sensor_preset("conv-machinevision");
  spec.full_well_e = 4321.0;
  spec.active_channel = 2;
  const SensorSpec back = sensor_from_metadata(sensor_to_metadata(spec));
  CHECK(back.kind == SensorKind::Conventional);
  CHECK(back.bit_depth == spec.bit_depth);
  CHECK(back.pde[0] == doctest::Approx(0.59));
  CHECK(back.pde[2] == doctest::Approx(0.47));
  CHECK(back.read_noise_e == doctest::Approx(2.4));
  CHECK(back.dark_rate == doctest::Approx(1.0));
  CHECK(back.full_well_e == doctest::Approx(4321.0));
  CHECK(back.active_channel == 2);

  CHECK(sensor_preset("conv-iphone7").read_noise_e == doctest::Approx(0.68));
  CHECK(sensor_preset("jot").pde[1] == doctest::Approx(0.71));
  CHECK(sensor_preset("jot").read_noise_e == doctest::Approx(0.24));
  CHECK_THROWS_AS(sensor_preset("nope"), std::invalid_argument);
}
