#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "config.hpp"

namespace qbp::cli {

/// Flag values shared across subcommands; optionals override config keys.
struct CommonFlags {
  std::string config_path;
  std::string out;
  std::optional<uint64_t> seed;
  std::optional<int> block_size;
  std::optional<int> merge_block_size;
  std::optional<int> patch_size;
  std::optional<int> levels;
  std::optional<double> lambda_reg;
  std::optional<double> noise_scale_c;
  std::optional<int> sr_factor;
  bool naive = false;
  std::optional<std::string> preset;
};

int cmd_simulate(const Config& cfg, const CommonFlags& flags);
int cmd_pipeline(const std::string& seq_path, const Config& cfg, const CommonFlags& flags);
int cmd_analyze(const std::string& kind, const Config& cfg, const CommonFlags& flags);

/// Config key documentation printed in each subcommand's --help.
extern const char* kSimulateKeyHelp;
extern const char* kPipelineKeyHelp;
extern const char* kAnalyzeKeyHelp;

}  // namespace qbp::cli
