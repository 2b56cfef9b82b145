#include "experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "itemper/analysis.hpp"
#include "itemper/coupling.hpp"
#include "itemper/parallel.hpp"

namespace itemper::app {

using nlohmann::json;

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string format_fixed(double x, int digits) {
  if (!std::isfinite(x)) return format_number(x);
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed, digits);
  return std::string(buf, r.ptr);
}

namespace {

// json stores non-finite doubles as null; keep them readable instead.
json number_json(double x) {
  if (std::isfinite(x)) return x;
  return format_number(x);
}

std::ofstream open_output(const ExperimentConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out);
  std::ofstream out(cfg.out / name, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (cfg.out / name).string());
  return out;
}

unsigned thread_count(const ExperimentConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

template <TargetModel M>
json model_json(const M& model) {
  return json{{"name", std::string(model.name())},
              {"n", model.size()},
              {"q", model.alphabet()},
              {"beta", model.beta()},
              {"bound", model.bound()}};
}

json schedule_json(const Schedule& s) {
  return json{{"n", s.n},         {"epsilon", s.epsilon}, {"v", s.v},   {"lambda", s.lambda},
              {"c_epsilon", s.c_epsilon}, {"g0", s.g0},   {"g", s.g},   {"horizon", s.horizon()}};
}

void write_summary(const ExperimentConfig& cfg, json body, const std::string& line) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["experiment"] = cfg.kind;
  doc["seed"] = cfg.seed;
  doc["replicas"] = cfg.replicas;
  doc["config"] = cfg.echo;
  for (auto it = body.begin(); it != body.end(); ++it) doc[it.key()] = it.value();
  doc["summary"] = line;
  auto out = open_output(cfg, "summary.json");
  out << doc.dump(2) << '\n';
}

template <TargetModel M>
Schedule schedule_for(const M& model, const ExperimentConfig& cfg, std::ostream& log) {
  Schedule s;
  try {
    s = make_schedule(model, cfg.epsilon, cfg.v, cfg.c_override);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("schedule", e.what());
  }
  if (s.vacuous()) log << "warning: schedule.epsilon >= 1 makes the forgetting guarantee vacuous\n";
  return s;
}

template <TargetModel M>
StartSpec start_for(const M& model, const StartConfig& start, const std::string& key) {
  auto spec = to_start_spec(start, model.size());
  try {
    realize_start(spec, model.size(), model.alphabet(), 0, 0);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
  return spec;
}

std::int64_t steps_for(const ExperimentConfig& cfg, const Schedule& s) { return cfg.steps.value_or(s.horizon()); }

// Statistic trajectories of one coordinate across replicas, on a common time grid.
struct Trajectories {
  std::vector<std::int64_t> times;
  std::vector<std::vector<double>> values;
  std::vector<std::vector<bool>> hits;
};

Trajectories collect(const std::vector<RunRecord>& records, std::size_t coordinate) {
  Trajectories tr;
  for (const auto& record : records) {
    std::vector<double> values;
    std::vector<bool> hits;
    std::vector<std::int64_t> times;
    for (const auto& o : record.observations) {
      if (o.coordinate != coordinate) continue;
      times.push_back(o.t);
      values.push_back(o.statistic);
      hits.push_back(o.needle_hit);
    }
    if (tr.values.empty()) tr.times = times;
    tr.values.push_back(std::move(values));
    tr.hits.push_back(std::move(hits));
  }
  return tr;
}

// Index range of the time grid covered by [begin, end]; nullopt if fewer than two points.
std::optional<Window> index_window(const std::vector<std::int64_t>& times, std::int64_t begin, std::int64_t end) {
  const auto lo = std::lower_bound(times.begin(), times.end(), begin);
  const auto hi = std::upper_bound(times.begin(), times.end(), end);
  if (hi - lo < 2) return std::nullopt;
  return Window{static_cast<std::size_t>(lo - times.begin()), static_cast<std::size_t>(hi - times.begin() - 1)};
}

std::optional<DiagnosticReport> psrf_over(const Trajectories& tr, std::size_t processes, Window time_window) {
  const std::size_t m = std::min(processes, tr.values.size());
  if (m < 2) return std::nullopt;
  const auto w = index_window(tr.times, static_cast<std::int64_t>(time_window.begin),
                              static_cast<std::int64_t>(time_window.end));
  if (!w) return std::nullopt;
  std::vector<std::span<const double>> views;
  for (std::size_t i = 0; i < m; ++i) views.emplace_back(tr.values[i]);
  return psrf(std::span<const std::span<const double>>(views), *w);
}

Window default_window(const DiagnosticsSpec& d, std::int64_t horizon) {
  if (d.window) return *d.window;
  return Window{static_cast<std::size_t>(horizon / 5), static_cast<std::size_t>(horizon)};
}

// report.csv for trajectory experiments: t, statistic, psrf, tv_bound.
template <class TvBound>
void write_trajectory_report(const ExperimentConfig& cfg, const Trajectories& tr, Window window,
                             std::int64_t stride, TvBound&& tv_bound) {
  auto out = open_output(cfg, "report.csv");
  out << "t,statistic,psrf,tv_bound\n";
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    const auto t = tr.times[k];
    if (t % stride != 0 && k + 1 != tr.times.size()) continue;
    double mean = 0.0;
    for (const auto& v : tr.values) mean += v[k];
    mean /= static_cast<double>(tr.values.size());
    out << t << ',' << format_number(mean) << ',';
    if (t > static_cast<std::int64_t>(window.begin)) {
      const auto r = psrf_over(tr, cfg.diagnostics.processes,
                               Window{window.begin, static_cast<std::size_t>(std::min<std::int64_t>(t, window.end))});
      if (r) out << format_number(r->psrf);
    }
    out << ',';
    const auto tv = tv_bound(k);
    if (tv) out << format_number(*tv);
    out << '\n';
  }
}

void write_run_records(const ExperimentConfig& cfg, const std::vector<RunRecord>& records) {
  auto out = open_output(cfg, "records.csv");
  out << "replica,t,j,statistic,needle_hit,cross_accepts,state\n";
  for (const auto& record : records) {
    for (const auto& o : record.observations) {
      out << record.replica << ',' << o.t << ',' << o.coordinate << ',' << format_number(o.statistic) << ','
          << (o.needle_hit ? 1 : 0) << ',' << o.cross_accepts << ',';
      if (o.state) out << *o.state;
      out << '\n';
    }
  }
}

template <TargetModel M>
std::vector<RunRecord> run_replicas(const M& model, const Schedule& schedule, const StartSpec& start,
                                    std::int64_t steps, const ObservationPlan& plan, const ExperimentConfig& cfg) {
  try {
    resolve_plan(model, plan);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("observe", e.what());
  }
  std::vector<RunRecord> records(cfg.replicas);
  parallel_for(cfg.replicas, thread_count(cfg), [&](std::size_t r) {
    records[r] = run(model, schedule, start, steps, plan, cfg.seed, r);
  });
  return records;
}

// run and needle share the trajectory pipeline; needle adds the hit/TV accounting.
template <TargetModel M>
std::string trajectory_experiment(const M& model, const ExperimentConfig& cfg, std::ostream& log) {
  const bool needle = cfg.kind == "needle";
  if constexpr (!std::is_same_v<M, NeedleModel>) {
    if (needle) throw ConfigError("model.name", "the needle experiment needs the needle model");
  }
  const auto schedule = schedule_for(model, cfg, log);
  const auto steps = steps_for(cfg, schedule);
  const auto start = start_for(model, cfg.start, "start");
  const std::size_t n = model.size();
  const std::size_t coordinate = cfg.diagnostics.coordinate.value_or(n);
  if (coordinate > n) throw ConfigError("diagnostics.coordinate", "coordinate exceeds n");
  auto plan = cfg.observe;
  if (!cfg.observe_given && needle) plan.coordinates = {coordinate};
  const auto window = default_window(cfg.diagnostics, steps);
  if (static_cast<std::int64_t>(window.end) > steps) {
    throw ConfigError("diagnostics.window", "window ends after the last step");
  }

  const auto records = run_replicas(model, schedule, start, steps, plan, cfg);
  write_run_records(cfg, records);

  const auto tr = collect(records, coordinate);
  const auto diag = psrf_over(tr, cfg.diagnostics.processes, window);
  const std::size_t replicas = records.size();
  const std::size_t cells = replicas * tr.times.size();
  std::size_t hits = 0;
  for (const auto& h : tr.hits) hits += static_cast<std::size_t>(std::count(h.begin(), h.end(), true));
  std::size_t replicas_marked = 0;
  for (const auto& record : records) {
    replicas_marked += std::any_of(record.first_mark.begin(), record.first_mark.end(), [](auto t) { return t >= 0; });
  }
  double pi_z = std::numeric_limits<double>::quiet_NaN();
  if constexpr (std::is_same_v<M, NeedleModel>) pi_z = model.needle_probability();
  auto tv_at = [&](std::size_t k) -> std::optional<double> {
    if (!std::isfinite(pi_z) || tr.values.empty()) return std::nullopt;
    std::size_t hit = 0;
    for (const auto& h : tr.hits) hit += h[k];
    return tv_lower_bound_event(wilson_upper(hit, replicas, cfg.diagnostics.z), pi_z);
  };
  const bool final_observed = !tr.times.empty() && tr.times.back() == steps;
  double tv_final = std::numeric_limits<double>::quiet_NaN();
  if (final_observed) tv_final = tv_at(tr.times.size() - 1).value_or(tv_final);
  std::size_t hits_final = 0;
  if (final_observed) {
    for (const auto& h : tr.hits) hits_final += h.back();
  }
  write_trajectory_report(cfg, tr, window, cfg.diagnostics.report_stride, tv_at);

  json results;
  results["steps"] = steps;
  results["coordinate"] = coordinate;
  results["window"] = {window.begin, window.end};
  results["observed_times"] = tr.times.size();
  results["hits"] = hits;
  results["hit_cells"] = cells;
  results["hits_at_final_time"] = final_observed ? json(hits_final) : json(nullptr);
  results["replicas_marked_any_coordinate"] = replicas_marked;
  if (diag) {
    results["psrf"] = number_json(diag->psrf);
    results["psrf_infinite"] = diag->infinite;
    results["psrf_processes"] = diag->means.size();
    results["within_variance"] = diag->within;
    results["between_variance"] = diag->between;
  } else {
    results["psrf"] = nullptr;
  }
  if (std::isfinite(pi_z)) {
    results["pi_z"] = pi_z;
    results["tv_lower_bound"] = std::isnan(tv_final) ? json(nullptr) : number_json(tv_final);
    results["z"] = cfg.diagnostics.z;
    // Union bound on P(some coordinate visits z by time T) under the uniform law.
    results["uniform_hit_bound_per_replica"] =
        static_cast<double>(n + 1) * static_cast<double>(steps + 1) * std::ldexp(1.0, -static_cast<int>(n));
  }
  const std::string psrf_text = diag ? format_fixed(diag->psrf, 2) : "n/a";
  std::string line;
  if (needle) {
    line = "hits=" + std::to_string(hits) + "/" + std::to_string(replicas) + "x" + std::to_string(tr.times.size()) +
           ", TV>=" + (std::isnan(tv_final) ? std::string("n/a") : format_fixed(tv_final, 2)) + ", PSRF=" + psrf_text;
  } else {
    double mean = std::numeric_limits<double>::quiet_NaN();
    if (final_observed) {
      mean = 0.0;
      for (const auto& v : tr.values) mean += v.back();
      mean /= static_cast<double>(replicas);
    }
    line = "T=" + std::to_string(steps) + ", replicas=" + std::to_string(replicas) + ", mean S(X^(" +
           std::to_string(coordinate) + ")_T)=" + format_fixed(mean, 4) + ", PSRF=" + psrf_text;
  }
  write_summary(cfg, json{{"model", model_json(model)}, {"schedule", schedule_json(schedule)}, {"results", results}},
                line);
  return line;
}

template <TargetModel M>
std::string lemma_uniform_experiment(const M& model, const ExperimentConfig& cfg, std::ostream& log) {
  const auto schedule = schedule_for(model, cfg, log);
  const auto start = start_for(model, cfg.start, "start");
  auto plan = cfg.observe;
  plan.mode = ObserveMode::states;
  if (plan.times.empty()) plan.times = {10, 50};
  const auto steps = cfg.steps.value_or(plan.times.back());
  if (plan.times.back() > steps) throw ConfigError("observe.times", "observation time after the last step");
  const auto records = run_replicas(model, schedule, start, steps, plan, cfg);
  write_run_records(cfg, records);

  const auto resolved = resolve_plan(model, plan);
  auto out = open_output(cfg, "report.csv");
  out << "t,j,samples,statistic,dof,p_value,few_samples\n";
  json tests = json::array();
  double min_p = 1.0;
  bool few = false;
  for (auto t : resolved.times) {
    for (auto j : resolved.coordinates) {
      const auto r = uniformity_test(records, j, t, model.size(), model.alphabet());
      out << t << ',' << j << ',' << r.samples << ',' << format_number(r.test.statistic) << ',' << r.test.dof << ','
          << format_number(r.test.p_value) << ',' << (r.few_samples ? 1 : 0) << '\n';
      tests.push_back(json{{"t", t}, {"j", j}, {"samples", r.samples}, {"statistic", r.test.statistic},
                           {"dof", r.test.dof}, {"p_value", r.test.p_value}, {"few_samples", r.few_samples}});
      min_p = std::min(min_p, r.test.p_value);
      few = few || r.few_samples;
    }
  }
  if (few) log << "warning: fewer than 100 q^n replicas; chi-squared calibration is rough\n";
  const std::string line = "min p=" + format_fixed(min_p, 4) + " over " + std::to_string(tests.size()) +
                           " marginals (replicas=" + std::to_string(records.size()) + ")";
  write_summary(cfg,
                json{{"model", model_json(model)},
                     {"schedule", schedule_json(schedule)},
                     {"results", json{{"min_p_value", min_p}, {"few_samples", few}, {"tests", tests}}}},
                line);
  return line;
}

void write_pair_records(const ExperimentConfig& cfg, const std::vector<PairOutcome>& pairs,
                        const std::vector<std::vector<bool>>& latched) {
  auto out = open_output(cfg, "records.csv");
  out << "replica,j,latched,a,b,first_agreement,coalescence_time\n";
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const auto& p = pairs[r];
    for (std::size_t j = 0; j < p.a.size(); ++j) {
      const bool l = latched.empty() || latched[r][j];
      out << p.replica << ',' << j << ',' << (l ? 1 : 0) << ',';
      if (l) out << (p.a[j] ? 1 : 0);
      out << ',';
      if (l) out << (p.b[j] ? 1 : 0);
      out << ',' << p.first_agreement[j] << ',' << p.coalescence_time << '\n';
    }
  }
}

template <TargetModel M>
std::string forget_experiment(const M& model, const ExperimentConfig& cfg, std::ostream& log) {
  const auto schedule = schedule_for(model, cfg, log);
  const auto xs = start_for(model, cfg.start, "starts.x");
  const auto ys = start_for(model, cfg.start_y, "starts.y");
  const auto report = forgetting_experiment(model, schedule, xs, ys, cfg.replicas, cfg.seed, thread_count(cfg));
  write_pair_records(cfg, report.pairs, {});

  const std::size_t n = model.size();
  const double per_coordinate = schedule.epsilon / static_cast<double>(n + 1);
  auto out = open_output(cfg, "report.csv");
  out << "j,at_risk,failures,rate,bound,slack_bound\n";
  json rates = json::array();
  for (std::size_t j = 0; j <= n; ++j) {
    const auto risk = report.at_risk[j];
    const double slack = risk == 0 ? std::numeric_limits<double>::quiet_NaN()
                                   : per_coordinate + 3.0 * binomial_sigma(per_coordinate, risk);
    out << j << ',' << risk << ',' << report.failures[j] << ',' << format_number(report.failure_rate(j)) << ','
        << format_number(per_coordinate) << ',';
    if (risk > 0) out << format_number(slack);
    out << '\n';
    rates.push_back(json{{"j", j}, {"at_risk", risk}, {"failures", report.failures[j]},
                         {"rate", report.failure_rate(j)}, {"slack_bound", number_json(slack)}});
  }
  const double eps = schedule.epsilon;
  const double overall_slack = eps + 3.0 * binomial_sigma(std::min(eps, 1.0), cfg.replicas);
  const std::string line =
      "uncoalesced@t_n=" + format_fixed(report.uncoalesced_fraction, 2) + " (bound " + format_fixed(eps, 2) + ")";
  write_summary(cfg,
                json{{"model", model_json(model)},
                     {"schedule", schedule_json(schedule)},
                     {"results", json{{"horizon", report.horizon},
                                      {"uncoalesced_fraction", report.uncoalesced_fraction},
                                      {"bound", eps},
                                      {"slack_bound", overall_slack},
                                      {"per_coordinate_bound", per_coordinate},
                                      {"coordinates", rates}}}},
                line);
  return line;
}

template <TargetModel M>
std::string couple_experiment(const M& model, const ExperimentConfig& cfg, std::ostream& log) {
  const auto schedule = schedule_for(model, cfg, log);
  const auto steps = steps_for(cfg, schedule);
  const auto xs = start_for(model, cfg.start, "starts.x");
  const auto ys = start_for(model, cfg.start_y, "starts.y");
  const std::size_t count = model.size() + 1;
  std::vector<PairOutcome> pairs(cfg.replicas);
  std::vector<std::vector<bool>> latched(cfg.replicas);
  std::vector<std::vector<bool>> together(cfg.replicas);
  parallel_for(cfg.replicas, thread_count(cfg), [&](std::size_t r) {
    auto pair = make_coupled_engine(model, schedule, xs, ys, cfg.seed, r);
    std::vector<bool> agree{pair.all_agree()};
    while (pair.time() < steps) {
      pair.step();
      agree.push_back(pair.all_agree());
    }
    PairOutcome out;
    out.replica = r;
    for (std::size_t j = 0; j < count; ++j) {
      out.a.push_back(pair.event_a(j));
      out.b.push_back(pair.event_b(j));
      out.first_agreement.push_back(pair.first_agreement(j));
      latched[r].push_back(pair.latched(j));
    }
    out.coalescence_time = pair.coalescence_time();
    out.coalesced_at_horizon = pair.all_agree();
    pairs[r] = std::move(out);
    together[r] = std::move(agree);
  });
  write_pair_records(cfg, pairs, latched);

  auto out = open_output(cfg, "report.csv");
  out << "t,coalesced_fraction\n";
  for (std::int64_t t = 0; t <= steps; ++t) {
    std::size_t joined = 0;
    for (const auto& a : together) joined += a[static_cast<std::size_t>(t)];
    out << t << ',' << format_number(static_cast<double>(joined) / static_cast<double>(cfg.replicas)) << '\n';
  }
  std::size_t coalesced = 0;
  double mean_time = 0.0;
  std::size_t ever = 0;
  for (const auto& p : pairs) {
    coalesced += p.coalesced_at_horizon;
    if (p.coalescence_time >= 0) {
      mean_time += static_cast<double>(p.coalescence_time);
      ++ever;
    }
  }
  mean_time = ever ? mean_time / static_cast<double>(ever) : std::numeric_limits<double>::quiet_NaN();
  const double fraction = static_cast<double>(coalesced) / static_cast<double>(cfg.replicas);
  const std::string line = "coalesced@T=" + std::to_string(steps) + ": " + format_fixed(fraction, 2) +
                           ", mean first coalescence=" + format_fixed(mean_time, 1);
  write_summary(cfg,
                json{{"model", model_json(model)},
                     {"schedule", schedule_json(schedule)},
                     {"results", json{{"steps", steps},
                                      {"coalesced_fraction", fraction},
                                      {"mean_first_coalescence", number_json(mean_time)},
                                      {"pairs_ever_coalesced", ever}}}},
                line);
  return line;
}

template <TargetModel M>
std::string dbar_experiment(const M& model, const ExperimentConfig& cfg) {
  const auto steps = cfg.steps.value_or(50);
  Eigen::MatrixXd kernel;
  std::vector<double> pi;
  if (cfg.kernel.type == "gibbs") {
    kernel = gibbs_transition_matrix(model.size(), model.alphabet());
    pi.assign(static_cast<std::size_t>(kernel.rows()), 1.0 / static_cast<double>(kernel.rows()));
  } else {
    if (cfg.kernel.level > model.size()) throw ConfigError("kernel.level", "level exceeds n");
    kernel = metropolis_transition_matrix(model, cfg.kernel.level);
    pi = tempered_distribution(model, static_cast<double>(cfg.kernel.level)).p;
  }
  const auto distances = d_and_dbar(kernel, pi, steps);
  constexpr double tol = 1e-10;
  auto records = open_output(cfg, "records.csv");
  auto report = open_output(cfg, "report.csv");
  records << "t,d,d_bar\n";
  report << "t,d,d_bar,d_le_dbar,dbar_le_2d\n";
  bool ok = true;
  std::int64_t first_violation = -1;
  for (const auto& m : distances) {
    const bool lower = m.d <= m.d_bar + tol;
    const bool upper = m.d_bar <= 2.0 * m.d + tol;
    if (!(lower && upper) && first_violation < 0) first_violation = m.t;
    ok = ok && lower && upper;
    records << m.t << ',' << format_number(m.d) << ',' << format_number(m.d_bar) << '\n';
    report << m.t << ',' << format_number(m.d) << ',' << format_number(m.d_bar) << ',' << (lower ? 1 : 0) << ','
           << (upper ? 1 : 0) << '\n';
  }
  const std::string line = "d<=dbar<=2d for t<=" + std::to_string(steps) + ": " +
                           (ok ? std::string("holds") : "violated at t=" + std::to_string(first_violation)) +
                           ", d(T)=" + format_number(distances.back().d);
  write_summary(cfg,
                json{{"model", model_json(model)},
                     {"results", json{{"kernel", cfg.kernel.type},
                                      {"level", cfg.kernel.level},
                                      {"steps", steps},
                                      {"tolerance", tol},
                                      {"holds", ok},
                                      {"d_final", distances.back().d},
                                      {"dbar_final", distances.back().d_bar}}}},
                line);
  return line;
}

// Parses a records.csv written by run/needle back into trajectories.
std::pair<Trajectories, std::vector<std::uint64_t>> read_records(const std::filesystem::path& path,
                                                                 std::optional<std::size_t>& coordinate) {
  std::ifstream in(path);
  if (!in) throw ConfigError("input", "cannot open '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  if (line != "replica,t,j,statistic,needle_hit,cross_accepts,state") {
    throw ConfigError("input", "not a run records file (unexpected header)");
  }
  struct Row {
    std::uint64_t replica;
    std::int64_t t;
    std::size_t j;
    double s;
    bool hit;
  };
  std::vector<Row> rows;
  std::size_t max_j = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1)) {
      fields.push_back(rest.substr(0, pos));
    }
    fields.push_back(rest);
    Row row{};
    int hit = 0;
    auto parse = [&](std::string_view f, auto& value) {
      const auto r = std::from_chars(f.data(), f.data() + f.size(), value);
      if (r.ec != std::errc() || r.ptr != f.data() + f.size()) {
        throw ConfigError("input", "malformed field on line " + std::to_string(lineno));
      }
    };
    if (fields.size() != 7) throw ConfigError("input", "wrong field count on line " + std::to_string(lineno));
    parse(fields[0], row.replica);
    parse(fields[1], row.t);
    parse(fields[2], row.j);
    if (fields[3] == "nan" || fields[3] == "inf") throw ConfigError("input", "non-finite statistic on line " + std::to_string(lineno));
    parse(fields[3], row.s);
    parse(fields[4], hit);
    row.hit = hit != 0;
    max_j = std::max(max_j, row.j);
    rows.push_back(row);
  }
  const std::size_t c = coordinate.value_or(max_j);
  coordinate = c;
  std::map<std::uint64_t, std::vector<const Row*>> by_replica;
  for (const auto& row : rows) {
    if (row.j == c) by_replica[row.replica].push_back(&row);
  }
  Trajectories tr;
  std::vector<std::uint64_t> ids;
  for (auto& [replica, list] : by_replica) {
    std::stable_sort(list.begin(), list.end(), [](const Row* a, const Row* b) { return a->t < b->t; });
    std::vector<std::int64_t> times;
    std::vector<double> values;
    std::vector<bool> hits;
    for (const auto* row : list) {
      times.push_back(row->t);
      values.push_back(row->s);
      hits.push_back(row->hit);
    }
    if (tr.values.empty()) {
      tr.times = times;
    } else if (times != tr.times) {
      throw ConfigError("input", "replica " + std::to_string(replica) + " is observed on a different time grid");
    }
    tr.values.push_back(std::move(values));
    tr.hits.push_back(std::move(hits));
    ids.push_back(replica);
  }
  return {std::move(tr), std::move(ids)};
}

std::string diag_experiment(const ExperimentConfig& cfg) {
  std::optional<std::size_t> coordinate = cfg.diagnostics.coordinate;
  const auto [tr, ids] = read_records(cfg.input, coordinate);
  if (tr.values.size() < 2) throw ConfigError("input", "needs observations of at least two replicas");
  const std::int64_t last = tr.times.back();
  const auto window = default_window(cfg.diagnostics, last);
  const auto diag = psrf_over(tr, cfg.diagnostics.processes, window);
  if (!diag) throw ConfigError("diagnostics.window", "window covers fewer than two observed times");
  auto records = open_output(cfg, "records.csv");
  records << "process,replica,mean,variance\n";
  for (std::size_t i = 0; i < diag->means.size(); ++i) {
    records << i << ',' << ids[i] << ',' << format_number(diag->means[i]) << ',' << format_number(diag->variances[i])
            << '\n';
  }
  write_trajectory_report(cfg, tr, window, cfg.diagnostics.report_stride,
                          [](std::size_t) { return std::optional<double>(); });
  const std::string line = "PSRF=" + format_fixed(diag->psrf, 2) + " over [" + std::to_string(window.begin) + "," +
                           std::to_string(window.end) + "] (m=" + std::to_string(diag->means.size()) + ")";
  write_summary(cfg,
                json{{"results", json{{"coordinate", *coordinate},
                                      {"window", {window.begin, window.end}},
                                      {"psrf", number_json(diag->psrf)},
                                      {"psrf_infinite", diag->infinite},
                                      {"within_variance", diag->within},
                                      {"between_variance", diag->between},
                                      {"processes", diag->means.size()}}}},
                line);
  return line;
}

}  // namespace

std::string run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.kind == "diag") return diag_experiment(cfg);
  const auto model = build_model(*cfg.model);
  return std::visit(
      [&](const auto& m) -> std::string {
        if (cfg.kind == "run" || cfg.kind == "needle") return trajectory_experiment(m, cfg, log);
        if (cfg.kind == "lemma-uniform") return lemma_uniform_experiment(m, cfg, log);
        if (cfg.kind == "forget") return forget_experiment(m, cfg, log);
        if (cfg.kind == "couple") return couple_experiment(m, cfg, log);
        return dbar_experiment(m, cfg);
      },
      model);
}

}  // namespace itemper::app
