#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace itemper::app {
namespace {

using nlohmann::json;

// Object view that remembers which keys were read, so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const { return node_.contains(key); }

  // Rejects keys outside `allowed` before anything else is read, so a typo is
  // reported as unknown rather than as a missing required key.
  void expect_keys(std::initializer_list<const char*> allowed) const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; })) {
        throw ConfigError(key_path(it.key()), "unknown key");
      }
    }
  }

  const json& take(const std::string& key) {
    if (!node_.contains(key)) throw ConfigError(key_path(key), "missing required key");
    used_.insert(key);
    return node_.at(key);
  }

  std::uint64_t uint(const std::string& key) { return as_uint(take(key), key_path(key)); }
  std::uint64_t uint(const std::string& key, std::uint64_t fallback) { return has(key) ? uint(key) : fallback; }
  std::int64_t integer(const std::string& key) {
    const auto& v = take(key);
    if (!v.is_number_integer()) throw ConfigError(key_path(key), "expected an integer");
    return v.get<std::int64_t>();
  }
  double number(const std::string& key) { return as_number(take(key), key_path(key)); }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }
  std::string string(const std::string& key) {
    const auto& v = take(key);
    if (!v.is_string()) throw ConfigError(key_path(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) { return has(key) ? string(key) : fallback; }
  Section child(const std::string& key) { return Section(take(key), key_path(key)); }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
    }
  }

  static std::uint64_t as_uint(const json& v, const std::string& path) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ConfigError(path, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }
  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> used_;
};

State parse_state(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of symbols");
  State x;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto s = Section::as_uint(v[i], path + "[" + std::to_string(i) + "]");
    if (s > 255) throw ConfigError(path + "[" + std::to_string(i) + "]", "symbol out of range");
    x.push_back(static_cast<Symbol>(s));
  }
  return x;
}

GraphSpec parse_graph(Section g, const std::filesystem::path& base_dir) {
  GraphSpec spec;
  if (g.has("file")) {
    g.expect_keys({"file", "vertices"});
    spec.file = base_dir / g.string("file");
    spec.vertices = g.uint("vertices", 0);
  } else {
    g.expect_keys({"generator", "vertices", "side", "degree", "seed"});
    spec.generator = g.string("generator");
    if (spec.generator == "cycle" || spec.generator == "path" || spec.generator == "complete") {
      spec.vertices = g.uint("vertices");
    } else if (spec.generator == "torus") {
      spec.side = g.uint("side");
    } else if (spec.generator == "random_regular") {
      spec.vertices = g.uint("vertices");
      spec.degree = g.uint("degree");
      spec.seed = g.uint("seed");
    } else {
      throw ConfigError(g.key_path("generator"), "unknown graph generator '" + spec.generator + "'");
    }
  }
  g.finish();
  return spec;
}

ModelSpec parse_model(Section m, const std::filesystem::path& base_dir) {
  ModelSpec spec;
  spec.name = m.string("name");
  const auto& name = spec.name;
  const auto alphabet = [&] {
    const auto q = m.uint("q");
    if (q < 2 || q > 256) throw ConfigError(m.key_path("q"), "alphabet size must lie in [2, 256]");
    return static_cast<unsigned>(q);
  };
  if (name == "uniform") {
    m.expect_keys({"name", "n", "q"});
    spec.n = m.uint("n");
    spec.q = m.has("q") ? alphabet() : 2;
  } else if (name == "ising") {
    m.expect_keys({"name", "graph", "beta", "field"});
    spec.graph = parse_graph(m.child("graph"), base_dir);
    spec.beta = m.number("beta");
    spec.field = m.number("field", 0.0);
  } else if (name == "potts") {
    m.expect_keys({"name", "graph", "q", "beta"});
    spec.graph = parse_graph(m.child("graph"), base_dir);
    spec.q = alphabet();
    spec.beta = m.number("beta");
  } else if (name == "curie_weiss_potts") {
    m.expect_keys({"name", "n", "q", "beta"});
    spec.n = m.uint("n");
    spec.q = alphabet();
    spec.beta = m.number("beta");
  } else if (name == "spin_glass") {
    m.expect_keys({"name", "graph", "beta", "disorder_seed"});
    spec.graph = parse_graph(m.child("graph"), base_dir);
    spec.beta = m.number("beta");
    spec.disorder_seed = m.uint("disorder_seed");
  } else if (name == "ergm_edge_triangle") {
    m.expect_keys({"name", "nu", "beta1", "beta2"});
    spec.nu = m.uint("nu");
    spec.beta1 = m.number("beta1");
    spec.beta2 = m.number("beta2");
  } else if (name == "needle") {
    m.expect_keys({"name", "n", "delta", "needle", "needle_seed"});
    spec.n = m.uint("n");
    spec.delta = m.number("delta");
    if (m.has("needle") && m.has("needle_seed")) {
      throw ConfigError(m.key_path("needle_seed"), "give either needle or needle_seed, not both");
    }
    if (m.has("needle")) spec.needle = parse_state(m.take("needle"), m.key_path("needle"));
    if (m.has("needle_seed")) spec.needle_seed = m.uint("needle_seed");
  } else {
    throw ConfigError(m.key_path("name"), "unknown model '" + name + "'");
  }
  m.finish();
  return spec;
}

StartConfig parse_start(Section s) {
  StartConfig start;
  s.expect_keys({"kind", "state", "symbol", "states"});
  start.kind = s.string("kind");
  if (start.kind == "uniform") {
  } else if (start.kind == "constant") {
    start.state = parse_state(s.take("state"), s.key_path("state"));
  } else if (start.kind == "monochrome") {
    const auto symbol = s.uint("symbol");
    if (symbol > 255) throw ConfigError(s.key_path("symbol"), "symbol out of range");
    start.symbol = static_cast<Symbol>(symbol);
  } else if (start.kind == "per_coordinate") {
    const auto& states = s.take("states");
    if (!states.is_array()) throw ConfigError(s.key_path("states"), "expected an array of states");
    for (std::size_t j = 0; j < states.size(); ++j) {
      start.states.push_back(parse_state(states[j], s.key_path("states") + "[" + std::to_string(j) + "]"));
    }
  } else {
    throw ConfigError(s.key_path("kind"), "unknown start kind '" + start.kind + "'");
  }
  s.finish();
  return start;
}

ObservationPlan parse_observe(Section o) {
  ObservationPlan plan;
  o.expect_keys({"mode", "coordinates", "stride", "times", "state_cap"});
  const auto mode = o.string("mode", "statistic");
  if (mode == "states") {
    plan.mode = ObserveMode::states;
  } else if (mode != "statistic") {
    throw ConfigError(o.key_path("mode"), "expected 'statistic' or 'states'");
  }
  if (o.has("coordinates")) {
    const auto& list = o.take("coordinates");
    if (!list.is_array()) throw ConfigError(o.key_path("coordinates"), "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      plan.coordinates.push_back(Section::as_uint(list[i], o.key_path("coordinates") + "[" + std::to_string(i) + "]"));
    }
  }
  if (o.has("stride")) {
    plan.stride = o.integer("stride");
    if (plan.stride < 1) throw ConfigError(o.key_path("stride"), "stride must be >= 1");
  }
  if (o.has("times")) {
    const auto& list = o.take("times");
    if (!list.is_array()) throw ConfigError(o.key_path("times"), "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      plan.times.push_back(static_cast<std::int64_t>(
          Section::as_uint(list[i], o.key_path("times") + "[" + std::to_string(i) + "]")));
    }
    std::sort(plan.times.begin(), plan.times.end());
  }
  plan.state_cap = o.uint("state_cap", kDefaultEnumerationCap);
  o.finish();
  return plan;
}

DiagnosticsSpec parse_diagnostics(Section d) {
  DiagnosticsSpec spec;
  d.expect_keys({"processes", "window", "z", "report_stride", "coordinate"});
  spec.processes = d.uint("processes", spec.processes);
  if (spec.processes < 2) throw ConfigError(d.key_path("processes"), "PSRF needs at least two processes");
  if (d.has("window")) {
    const auto& w = d.take("window");
    const auto path = d.key_path("window");
    if (!w.is_array() || w.size() != 2) throw ConfigError(path, "expected [begin, end]");
    Window window{Section::as_uint(w[0], path + "[0]"), Section::as_uint(w[1], path + "[1]")};
    if (window.end <= window.begin) throw ConfigError(path, "window needs end > begin");
    spec.window = window;
  }
  spec.z = d.number("z", spec.z);
  if (!(spec.z > 0.0)) throw ConfigError(d.key_path("z"), "confidence multiplier must be positive");
  if (d.has("report_stride")) {
    spec.report_stride = d.integer("report_stride");
    if (spec.report_stride < 1) throw ConfigError(d.key_path("report_stride"), "report stride must be >= 1");
  }
  if (d.has("coordinate")) spec.coordinate = d.uint("coordinate");
  d.finish();
  return spec;
}

}  // namespace

StartSpec to_start_spec(const StartConfig& start, std::size_t n) {
  if (start.kind == "constant") return ConstantStart{start.state};
  if (start.kind == "monochrome") return ConstantStart{State(n, start.symbol)};
  if (start.kind == "per_coordinate") return PerCoordinateStart{start.states};
  return UniformStart{};
}

ExperimentConfig parse_config(const nlohmann::json& doc, const std::string& kind,
                              const std::filesystem::path& base_dir) {
  const auto& kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
    throw ConfigError("experiment", "unknown experiment '" + kind + "'");
  }
  Section root(doc, "");
  ExperimentConfig cfg;
  cfg.kind = kind;
  cfg.base_dir = base_dir;
  cfg.echo = doc;
  if (root.has("experiment")) {
    const auto declared = root.string("experiment");
    if (declared != kind) {
      throw ConfigError("experiment", "config declares '" + declared + "' but subcommand is '" + kind + "'");
    }
  }
  cfg.seed = root.uint("seed", 0);
  cfg.replicas = root.uint("replicas", 1);
  if (cfg.replicas < 1) throw ConfigError("replicas", "need at least one replica");
  cfg.threads = static_cast<unsigned>(root.uint("threads", 0));
  if (root.has("out")) cfg.out = root.string("out");

  const bool engine_kind = kind == "run" || kind == "needle" || kind == "lemma-uniform" || kind == "couple" || kind == "forget";
  if (kind != "diag") cfg.model = parse_model(root.child("model"), base_dir);
  if (engine_kind) {
    if (root.has("schedule")) {
      auto s = root.child("schedule");
      s.expect_keys({"epsilon", "v", "c_override"});
      cfg.epsilon = s.number("epsilon", cfg.epsilon);
      cfg.v = s.number("v", cfg.v);
      if (s.has("c_override")) cfg.c_override = s.number("c_override");
      s.finish();
    }
  }
  if (kind != "forget" && kind != "diag" && root.has("steps")) {
    const auto& v = root.take("steps");
    if (v.is_string() && v.get<std::string>() == "horizon") {
      cfg.steps.reset();
    } else if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
      cfg.steps = v.get<std::int64_t>();
    } else {
      throw ConfigError("steps", "expected a non-negative integer or \"horizon\"");
    }
  }
  if (kind == "run" || kind == "needle" || kind == "lemma-uniform") {
    if (root.has("start")) cfg.start = parse_start(root.child("start"));
    if (root.has("observe")) {
      cfg.observe = parse_observe(root.child("observe"));
      cfg.observe_given = true;
    }
  }
  if (kind == "couple" || kind == "forget") {
    if (root.has("starts")) {
      auto s = root.child("starts");
      s.expect_keys({"x", "y"});
      cfg.start = parse_start(s.child("x"));
      cfg.start_y = parse_start(s.child("y"));
      s.finish();
    }
  }
  if (kind == "run" || kind == "needle" || kind == "diag") {
    if (root.has("diagnostics")) cfg.diagnostics = parse_diagnostics(root.child("diagnostics"));
  }
  if (kind == "diag") cfg.input = root.string("input");
  if (kind == "dbar-check" && root.has("kernel")) {
    auto k = root.child("kernel");
    k.expect_keys({"type", "level"});
    cfg.kernel.type = k.string("type", "gibbs");
    if (cfg.kernel.type == "metropolis") {
      cfg.kernel.level = k.uint("level");
    } else if (cfg.kernel.type != "gibbs") {
      throw ConfigError(k.key_path("type"), "expected 'gibbs' or 'metropolis'");
    }
    k.finish();
  }
  root.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::string& kind) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("--config", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(doc, kind, path.parent_path());
}

Graph build_graph(const GraphSpec& spec) {
  if (!spec.file.empty()) return read_edge_list_file(spec.file.string(), spec.vertices);
  if (spec.generator == "cycle") return cycle_graph(spec.vertices);
  if (spec.generator == "path") return path_graph(spec.vertices);
  if (spec.generator == "complete") return complete_graph(spec.vertices);
  if (spec.generator == "torus") return torus_graph(spec.side);
  return random_regular_graph(spec.vertices, spec.degree, spec.seed);
}

AnyModel build_model(const ModelSpec& spec) {
  try {
    const auto& name = spec.name;
    if (name == "uniform") return UniformModel(spec.n, spec.q);
    if (name == "curie_weiss_potts") return make_curie_weiss_potts(spec.n, spec.q, spec.beta);
    if (name == "ergm_edge_triangle") return make_ergm_edge_triangle(spec.nu, spec.beta1, spec.beta2);
    if (name == "needle") {
      State z(spec.n, 1);
      if (spec.needle) z = *spec.needle;
      if (spec.needle_seed) {
        RandomStream rng(*spec.needle_seed);
        for (auto& s : z) s = rng.bernoulli(0.5) ? 1 : 0;
      }
      return make_needle(spec.n, spec.delta, z);
    }
    Graph graph;
    try {
      graph = build_graph(*spec.graph);
    } catch (const std::exception& e) {
      throw ConfigError("model.graph", e.what());
    }
    if (name == "ising") return make_ising(std::move(graph), spec.beta, spec.field);
    if (name == "potts") return make_potts(std::move(graph), spec.q, spec.beta);
    return make_spin_glass(std::move(graph), spec.beta, spec.disorder_seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("model", e.what());
  }
}

}  // namespace itemper::app
