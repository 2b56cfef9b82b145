#include "cli.hpp"

#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "experiments.hpp"

namespace itemper::app {

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interacting tempering experiments"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed, replicas;
  std::optional<unsigned> threads;
  std::optional<std::string> out_dir;
  for (const auto& kind : experiment_kinds()) {
    auto* sub = app.add_subcommand(kind);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--seed", seed, "root seed override");
    sub->add_option("--replicas", replicas, "replica count override");
    sub->add_option("--out", out_dir, "output directory override");
    sub->add_option("--threads", threads, "worker threads (does not change outputs)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kExitOk : kExitConfig;
  }
  const std::string kind = app.get_subcommands().front()->get_name();
  try {
    auto cfg = load_config(config_path, kind);
    if (seed) cfg.seed = *seed;
    if (replicas) {
      if (*replicas < 1) throw ConfigError("--replicas", "need at least one replica");
      cfg.replicas = *replicas;
    }
    if (threads) cfg.threads = *threads;
    if (out_dir) cfg.out = *out_dir;
    out << run_experiment(cfg, err) << '\n';
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const GuardError& e) {
    err << "guard: " << e.what() << '\n';
    return kExitGuard;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace itemper::app
