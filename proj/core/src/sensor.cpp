#include "qbp/sensor.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

namespace qbp {

void SensorSpec::validate() const {
  if (bit_depth < 1 || bit_depth > 16) throw std::invalid_argument("bit_depth must be in [1, 16]");
  for (const double e : pde) {
    if (!(e > 0.0) || e > 1.0) throw std::invalid_argument("efficiency must be in (0, 1]");
  }
  if (!(read_noise_e >= 0.0)) throw std::invalid_argument("read_noise_e must be >= 0");
  if (!(dark_rate >= 0.0)) throw std::invalid_argument("dark_rate must be >= 0");
  if (!(frame_rate_fps > 0.0)) throw std::invalid_argument("frame_rate_fps must be > 0");
  if (!(full_well_e > 1.0)) throw std::invalid_argument("full_well_e must be > 1");
  if (active_channel < 0 || active_channel > 2) throw std::invalid_argument("active_channel must be 0..2");
  if (kind != SensorKind::Conventional && bit_depth > 8)
    throw std::invalid_argument("binary-family sensors are at most 8-bit");
}

SensorSpec sensor_preset(const std::string& name) {
  SensorSpec s;
  if (name == "spad-swiss2") {
    s.kind = SensorKind::Spad;
    s.bit_depth = 1;
    s.pde = {0.17, 0.23, 0.21};
    s.read_noise_e = 0.0;
    s.dark_rate = 7.5;
    s.frame_rate_fps = 97700.0;
  } else if (name == "conv-machinevision") {
    s.kind = SensorKind::Conventional;
    s.bit_depth = 10;
    s.pde = {0.59, 0.64, 0.47};
    s.read_noise_e = 2.4;
    s.dark_rate = 1.0;
    s.frame_rate_fps = 1000.0;
  } else if (name == "conv-iphone7") {
    s.kind = SensorKind::Conventional;
    s.bit_depth = 10;
    s.pde = {0.59, 0.64, 0.47};
    s.read_noise_e = 0.68;
    s.dark_rate = 1.0;
    s.frame_rate_fps = 1000.0;
  } else if (name == "jot") {
    s.kind = SensorKind::Jot;
    s.bit_depth = 1;
    s.pde = {0.64, 0.71, 0.62};
    s.read_noise_e = 0.24;
    s.dark_rate = 0.16;
    s.frame_rate_fps = 1000.0;
  } else {
    throw std::invalid_argument("unknown sensor preset: " + name);
  }
  s.validate();
  return s;
}

namespace {

const char* kind_name(SensorKind k) {
  switch (k) {
    case SensorKind::Spad: return "spad";
    case SensorKind::Jot: return "jot";
    case SensorKind::Conventional: return "conventional";
  }
  throw std::logic_error("bad sensor kind");
}

SensorKind kind_from(const std::string& s) {
  if (s == "spad") return SensorKind::Spad;
  if (s == "jot") return SensorKind::Jot;
  if (s == "conventional") return SensorKind::Conventional;
  throw std::invalid_argument("unknown sensor kind: " + s);
}

}  // namespace

std::string sensor_to_metadata(const SensorSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  os << "sensor_kind=" << kind_name(spec.kind) << "\n"
     << "bit_depth=" << spec.bit_depth << "\n"
     << "pde_r=" << spec.pde[0] << "\n"
     << "pde_g=" << spec.pde[1] << "\n"
     << "pde_b=" << spec.pde[2] << "\n"
     << "read_noise_e=" << spec.read_noise_e << "\n"
     << "dark_rate=" << spec.dark_rate << "\n"
     << "frame_rate_fps=" << spec.frame_rate_fps << "\n"
     << "full_well_e=" << spec.full_well_e << "\n"
     << "active_channel=" << spec.active_channel << "\n";
  return os.str();
}

SensorSpec sensor_from_metadata(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;  // tolerate foreign metadata lines
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  SensorSpec s;
  const auto want = [&](const char* key) -> std::string {
    const auto it = kv.find(key);
    if (it == kv.end()) throw std::invalid_argument(std::string("metadata missing key: ") + key);
    return it->second;
  };
  s.kind = kind_from(want("sensor_kind"));
  s.bit_depth = std::stoi(want("bit_depth"));
  s.pde = {std::stod(want("pde_r")), std::stod(want("pde_g")), std::stod(want("pde_b"))};
  s.read_noise_e = std::stod(want("read_noise_e"));
  s.dark_rate = std::stod(want("dark_rate"));
  s.frame_rate_fps = std::stod(want("frame_rate_fps"));
  if (kv.count("full_well_e")) s.full_well_e = std::stod(kv.at("full_well_e"));
  if (kv.count("active_channel")) s.active_channel = std::stoi(kv.at("active_channel"));
  s.validate();
  return s;
}

}  // namespace qbp
