#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "config.hpp"
#include "qbp/io.hpp"
#include "qbp/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"quanta burst photography: simulate, reconstruct, and analyze single-photon "
               "sensor sequences"};
  app.require_subcommand(1);

  qbp::cli::CommonFlags flags;
  std::string config_path;
  std::string seq_path;
  std::string kind;
  int threads = 0;

  auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", threads, "worker threads (0 = all cores)")
        ->envname("QBS_THREADS");
  };

  CLI::App* sim =
      app.add_subcommand("simulate", "sample a sensor sequence from a flux image into .qbs");
  sim->footer(qbp::cli::kSimulateKeyHelp);
  sim->add_option("--config", config_path, "key=value config file")->required();
  sim->add_option("--out", flags.out, "output .qbs path")->required();
  sim->add_option("--seed", flags.seed, "RNG seed (overrides the config's seed)");
  sim->add_option("--preset", flags.preset, "sensor preset (overrides the config's preset)");
  add_threads(sim);

  CLI::App* pipe =
      app.add_subcommand("pipeline", "align, merge, and reconstruct a .qbs sequence");
  pipe->footer(qbp::cli::kPipelineKeyHelp);
  pipe->add_option("sequence", seq_path, "input .qbs sequence")->required();
  pipe->add_option("--config", config_path, "key=value config file");
  pipe->add_option("--out", flags.out, "output path prefix")->required();
  pipe->add_option("--seed", flags.seed, "hot-pixel correction seed");
  pipe->add_option("--block-size", flags.block_size, "frames per alignment block");
  pipe->add_option("--merge-block-size", flags.merge_block_size, "frames per merge block");
  pipe->add_option("--patch-size", flags.patch_size, "alignment patch size, px");
  pipe->add_option("--levels", flags.levels, "alignment pyramid levels");
  pipe->add_option("--lambda", flags.lambda_reg, "flow regularization weight");
  pipe->add_option("--c", flags.noise_scale_c, "Wiener shrinkage strength (0 = plain sum)");
  pipe->add_option("--sr", flags.sr_factor, "super-resolution upsampling factor");
  pipe->add_flag("--naive", flags.naive, "plain sum of all frames, no alignment");
  add_threads(pipe);

  CLI::App* ana = app.add_subcommand("analyze", "emit SNR-surface or dynamic-range CSV tables");
  ana->footer(qbp::cli::kAnalyzeKeyHelp);
  ana->add_option("kind", kind, "analysis kind: snr or dr")->required();
  ana->add_option("--config", config_path, "key=value config file");
  ana->add_option("--out", flags.out, "output .csv path")->required();
  add_threads(ana);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    qbp::set_thread_count(threads);
    const qbp::cli::Config cfg =
        config_path.empty() ? qbp::cli::Config{} : qbp::cli::Config::load(config_path);
    if (sim->parsed()) return qbp::cli::cmd_simulate(cfg, flags);
    if (pipe->parsed()) return qbp::cli::cmd_pipeline(seq_path, cfg, flags);
    return qbp::cli::cmd_analyze(kind, cfg, flags);
  } catch (const qbp::cli::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const qbp::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
