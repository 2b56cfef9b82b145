#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "itemper/analysis.hpp"
#include "itemper/engine.hpp"
#include "itemper/models.hpp"

namespace itemper::app {

/// Bad or unknown configuration; `key` is the dotted path of the culprit.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds{"run", "couple", "forget", "needle", "lemma-uniform", "diag", "dbar-check"};
  return kinds;
}

struct GraphSpec {
  std::string generator;  // cycle, path, complete, torus, random_regular; empty when read from file
  std::size_t vertices = 0;
  std::size_t side = 0;
  std::size_t degree = 0;
  std::uint64_t seed = 0;
  std::filesystem::path file;
};

struct ModelSpec {
  std::string name;
  std::size_t n = 0;
  unsigned q = 2;
  double beta = 1.0;
  double field = 0.0;
  double delta = 0.25;
  std::optional<State> needle;
  std::optional<std::uint64_t> needle_seed;
  std::optional<GraphSpec> graph;
  std::uint64_t disorder_seed = 0;
  std::size_t nu = 0;
  double beta1 = 0.0;
  double beta2 = 0.0;
};

struct KernelSpec {
  std::string type = "gibbs";  // gibbs (the level-0 kernel) or metropolis
  std::size_t level = 0;
};

struct DiagnosticsSpec {
  std::size_t processes = 8;
  std::optional<Window> window;
  double z = 3.0;
  std::int64_t report_stride = 100;
  std::optional<std::size_t> coordinate;
};

/// Start spec as written in the config; monochrome starts need n, so the
/// conversion to StartSpec happens once the model is built.
struct StartConfig {
  std::string kind = "uniform";  // uniform, constant, monochrome, per_coordinate
  Symbol symbol = 0;
  State state;
  std::vector<State> states;
};

StartSpec to_start_spec(const StartConfig& start, std::size_t n);

struct ExperimentConfig {
  std::string kind;
  std::optional<ModelSpec> model;
  double epsilon = 0.5;
  double v = 0.5;
  std::optional<double> c_override;
  std::optional<std::int64_t> steps;  // empty: run to the horizon t_n
  std::size_t replicas = 1;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency
  StartConfig start;
  StartConfig start_y;
  ObservationPlan observe;
  bool observe_given = false;
  DiagnosticsSpec diagnostics;
  KernelSpec kernel;
  std::filesystem::path input;
  std::filesystem::path out = "itemper_out";
  std::filesystem::path base_dir;
  nlohmann::json echo;
};

/// Strict parse of a config document for experiment `kind`. Relative paths
/// resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::string& kind,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path, const std::string& kind);

AnyModel build_model(const ModelSpec& spec);
Graph build_graph(const GraphSpec& spec);

}  // namespace itemper::app
