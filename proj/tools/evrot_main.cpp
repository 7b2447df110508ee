// Command line front end. Subcommands share one config surface: built-in
// defaults, then the --config file, then flags, later layers winning. Every
// command writes a manifest echoing the effective configuration next to its
// results, so a result directory is self-describing.
#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "evrot/config.hpp"
#include "evrot/eval.hpp"
#include "evrot/simulate.hpp"

namespace fs = std::filesystem;
using namespace evrot;

namespace {

constexpr const char* kEstimatesHeader =
    "window,t_ref,t_mid,omega_x,omega_y,omega_z,updates,wall_cost,final_variance";

// One flag set is bound to every subcommand; only the parsed subcommand
// writes the values, and presence is queried on that subcommand by name.
struct Cli {
  std::string config, out, mode, tau;
  int windows = 0;
  std::uint64_t seed = 0;
  bool engine = true, baseline = true;
};

void add_common(CLI::App* sub, Cli& c) {
  sub->add_option("--config", c.config, "config file, sectioned key = value text");
  sub->add_option("--out", c.out, "output directory (run.out_dir)");
  sub->add_option("--seed", c.seed, "generator seed (run.seed)");
  sub->add_option("--mode", c.mode, "schedule mode: fixed, adaptive or full");
  sub->add_option("--tau", c.tau, "stay thresholds, coarse to fine (schedule.taus)");
  sub->add_option("--windows", c.windows, "process at most this many windows");
  sub->add_flag("--engine,!--no-engine", c.engine, "simulate the banked engine");
  sub->add_flag("--baseline,!--no-baseline", c.baseline, "simulate the flat baseline");
}

RunConfig effective_config(const CLI::App* sub, const Cli& c) {
  RunConfig cfg = sub->count("--config") ? load_run_config(c.config) : RunConfig{};
  if (sub->count("--out")) cfg.out_dir = c.out;
  if (sub->count("--seed")) cfg.seed = c.seed;
  if (sub->count("--mode")) cfg.mode = parse_mode(c.mode);
  if (sub->count("--tau")) set_config_key(cfg, "schedule.taus", c.tau);
  if (sub->count("--windows")) cfg.max_windows = c.windows;
  if (sub->count("--engine") || sub->count("--no-engine")) cfg.run_engine = c.engine;
  if (sub->count("--baseline") || sub->count("--no-baseline")) cfg.run_baseline = c.baseline;
  return cfg;
}

struct Dataset {
  CameraIntrinsics cam;
  std::vector<Event> events;
  std::vector<EventWindow> windows;
};

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.calib_path.empty()) throw ConfigError("dataset.calib is required");
  if (cfg.events_path.empty()) throw ConfigError("dataset.events is required");
  if (cfg.width <= 0 || cfg.height <= 0)
    throw ConfigError("dataset.width and dataset.height are required (calibration files "
                      "do not carry the sensor size)");
  Dataset d;
  d.cam = load_calib(cfg.calib_path, cfg.width, cfg.height);
  d.events = load_events(cfg.events_path, d.cam);
  d.windows = window_by_count(d.events, std::size_t(cfg.window_events));
  if (cfg.max_windows > 0 && d.windows.size() > std::size_t(cfg.max_windows))
    d.windows.resize(std::size_t(cfg.max_windows));
  return d;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  return os;
}

void write_run_manifest(const RunConfig& cfg, const std::string& command) {
  fs::create_directories(cfg.out_dir);
  std::ofstream m = open_out(cfg.out_dir + "/manifest_" + command + ".txt");
  write_manifest(m, command, cfg);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double num_field(const std::string& path, int lineno, const std::string& v) {
  char* end = nullptr;
  double out = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw DataError(path + ":" + std::to_string(lineno) + ": bad number '" + v + "'");
  return out;
}

int cmd_estimate(const RunConfig& cfg) {
  Dataset d = load_dataset(cfg);
  Schedule sched =
      make_schedule(d.cam, cfg.mode, cfg.taus, cfg.sigma, cfg.stage_cap, cfg.fixed_iters);
  sched.window_cap = cfg.window_cap;
  EvaluatorFactory factory = make_reference_factory(d.cam);
  std::vector<WindowResult> results = run_sequence(d.windows, sched, factory, cfg.opt);

  std::vector<TraceRow> all_rows;
  for (const WindowResult& r : results)
    all_rows.insert(all_rows.end(), r.trace.begin(), r.trace.end());
  std::string audit = validate_trace(all_rows, sched);
  if (!audit.empty()) throw DataError("internal trace audit failed: " + audit);

  write_run_manifest(cfg, "estimate");
  std::string name = mode_name(cfg.mode);

  std::ofstream est = open_out(cfg.out_dir + "/estimates_" + name + ".csv");
  est << kEstimatesHeader << "\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const EventWindow& win = d.windows[i];
    double t_mid = 0.5 * (win.events.front().t + win.events.back().t);
    const WindowResult& r = results[i];
    est << i << ',' << fmt_double(win.t_ref) << ',' << fmt_double(t_mid) << ','
        << fmt_double(r.omega_hat.x) << ',' << fmt_double(r.omega_hat.y) << ','
        << fmt_double(r.omega_hat.z) << ',' << r.total_updates << ',' << r.wall_cost << ','
        << fmt_double(r.final_variance) << "\n";
  }

  std::ofstream tr = open_out(cfg.out_dir + "/trace_" + name + ".csv");
  write_trace_header(tr);
  write_trace_rows(tr, all_rows);

  std::int64_t updates = 0, work = 0;
  for (const WindowResult& r : results) {
    updates += r.total_updates;
    work += r.wall_cost;
  }
  std::cout << "estimate: " << results.size() << " windows, mode " << name << ", "
            << updates << " updates, " << work << " work units\n";
  return 0;
}

int cmd_synth(const RunConfig& cfg) {
  SynthParams params = cfg.synth;
  params.seed = cfg.seed;
  SynthResult result = synth_scene(params);
  fs::create_directories(cfg.out_dir);
  write_synth(cfg.out_dir, params, result);
  write_run_manifest(cfg, "synth");
  std::cout << "synth: " << result.events.size() << " events, "
            << result.imu.samples.size() << " gyro samples -> " << cfg.out_dir << "\n";
  return 0;
}

void write_sim_stages(std::ostream& os, const std::vector<SimVariant>& variants) {
  os << "variant,window,scale,iterations,sorted_events,valid,retained,active_groups,"
        "voted,inliers,outliers,inlier_emissions,pending_hits,commits,"
        "active_group_ratio,outlier_ratio,expected_update_ratio,expected_reduction,"
        "measured_reduction";
  for (int g = 0; g < kMemGroupCount; ++g)
    os << ",reads_" << mem_group_name(g) << ",writes_" << mem_group_name(g);
  os << ",cycles\n";
  for (const SimVariant& v : variants) {
    for (std::size_t i = 0; i < v.stage.size(); ++i) {
      const StageTrace& t = v.stage[i];
      os << v.name << ',' << v.stage_window[i] << ',' << fmt_double(t.scale) << ','
         << t.iterations << ',' << t.sorted_events << ',' << t.valid_at_entry << ','
         << t.retained << ',' << t.active_groups << ',' << t.voted << ',' << t.inliers
         << ',' << t.outliers << ',' << t.inlier_emissions << ',' << t.pending_hits << ','
         << t.commits << ',' << fmt_double(t.active_group_ratio()) << ','
         << fmt_double(t.outlier_ratio()) << ',' << fmt_double(t.expected_update_ratio())
         << ',' << fmt_double(t.expected_reduction()) << ','
         << fmt_double(t.measured_reduction());
      for (int g = 0; g < kMemGroupCount; ++g)
        os << ',' << t.acc.reads[g] << ',' << t.acc.writes[g];
      os << ',' << t.cycles << "\n";
    }
  }
}

void write_sim_totals(std::ostream& os, const std::vector<SimVariant>& variants,
                      const EnergyModel& em) {
  os << "variant,evaluations";
  for (int g = 0; g < kMemGroupCount; ++g)
    os << ",reads_" << mem_group_name(g) << ",writes_" << mem_group_name(g);
  os << ",accesses,cycles,seconds";
  for (int g = 0; g < kMemGroupCount; ++g) os << ",dynamic_" << mem_group_name(g) << "_pj";
  os << ",dynamic_total_pj,leakage_pj,logic_pj,total_pj\n";
  for (const SimVariant& v : variants) {
    EnergyBreakdown eb = energy_estimate(v.acc, v.cycles, em);
    os << v.name << ',' << v.evaluations;
    for (int g = 0; g < kMemGroupCount; ++g)
      os << ',' << v.acc.reads[g] << ',' << v.acc.writes[g];
    os << ',' << v.acc.total() << ',' << v.cycles << ',' << fmt_double(eb.seconds);
    for (int g = 0; g < kMemGroupCount; ++g) os << ',' << fmt_double(eb.dynamic_pj[g]);
    os << ',' << fmt_double(eb.dynamic_total_pj) << ',' << fmt_double(eb.leakage_pj) << ','
       << fmt_double(eb.logic_pj) << ',' << fmt_double(eb.total_pj) << "\n";
  }
}

void write_sim_reduction(std::ostream& os, const SimVariant& base, const SimVariant& eng,
                         const EnergyModel& em) {
  EnergyBreakdown eb = energy_estimate(base.acc, base.cycles, em);
  EnergyBreakdown ee = energy_estimate(eng.acc, eng.cycles, em);
  os << "metric,baseline,engine,reduction_percent\n";
  auto row = [&os](const char* metric, double b, double e) {
    os << metric << ',' << fmt_double(b) << ',' << fmt_double(e) << ','
       << (b != 0.0 ? fmt_double(100.0 * (1.0 - e / b)) : "nan") << "\n";
  };
  row("accesses", double(base.acc.total()), double(eng.acc.total()));
  row("cycles", double(base.cycles), double(eng.cycles));
  row("energy_dynamic_pj", eb.dynamic_total_pj, ee.dynamic_total_pj);
  row("energy_leakage_pj", eb.leakage_pj, ee.leakage_pj);
  row("energy_total_pj", eb.total_pj, ee.total_pj);
}

int cmd_simulate(const RunConfig& cfg) {
  if (!cfg.run_engine && !cfg.run_baseline)
    throw ConfigError("engine.run and engine.baseline are both off; nothing to simulate");
  Dataset d = load_dataset(cfg);

  // Stage lookup always carries all three scales; a trace from any mode
  // matches a subset of them.
  Schedule lookup = make_schedule(d.cam, ScheduleMode::adaptive, {0.02, 0.01, 0.005},
                                  cfg.sigma, cfg.stage_cap);

  // The engine replays the configured mode's trace; the baseline models the
  // conventional full-resolution pipeline, so it replays the full-mode trace
  // when one exists. Either side falls back to a fixed evaluation count per
  // scheduled stage when its trace is missing.
  auto plan_for = [&](ScheduleMode mode) -> ReplayPlan {
    std::string trace_path = cfg.out_dir + "/trace_" + mode_name(mode) + ".csv";
    if (fs::exists(trace_path)) {
      std::cout << "simulate: replaying " << trace_path << "\n";
      return load_trace_plan(trace_path);
    }
    Schedule shape =
        make_schedule(d.cam, mode, cfg.taus, cfg.sigma, cfg.stage_cap,
                      mode == ScheduleMode::fixed ? cfg.fixed_iters : std::vector<int>{});
    std::cout << "simulate: no estimate trace at " << trace_path << ", replaying "
              << cfg.replay_iters << " fixed evaluations per stage\n";
    return plan_fixed(int(d.windows.size()), shape.stages, Vec3{}, cfg.replay_iters);
  };

  EnergyModel em =
      cfg.energy_table.empty() ? EnergyModel::defaults() : load_energy_model(cfg.energy_table);

  std::vector<SimVariant> variants;
  if (cfg.run_engine) {
    EngineConfig e;
    e.quant_step = cfg.quant_step;
    variants.push_back(
        simulate_plan("engine", plan_for(cfg.mode), d.windows, d.cam, lookup.stages, e));
  }
  if (cfg.run_baseline) {
    EngineConfig b = baseline_config();
    b.quant_step = cfg.quant_step;
    variants.push_back(simulate_plan("baseline", plan_for(ScheduleMode::full), d.windows,
                                     d.cam, lookup.stages, b));
  }

  write_run_manifest(cfg, "simulate");
  {
    std::ofstream os = open_out(cfg.out_dir + "/sim_stages.csv");
    write_sim_stages(os, variants);
  }
  {
    std::ofstream os = open_out(cfg.out_dir + "/sim_totals.csv");
    write_sim_totals(os, variants, em);
  }
  double worst = 0;
  for (const SimVariant& v : variants) worst = std::max(worst, v.max_rel_dev);
  {
    std::ofstream os = open_out(cfg.out_dir + "/consistency.txt");
    os << fmt_double(worst) << "\n";
  }
  if (cfg.run_engine && cfg.run_baseline) {
    std::ofstream os = open_out(cfg.out_dir + "/sim_reduction.csv");
    write_sim_reduction(os, variants[1], variants[0], em);
  }

  for (const SimVariant& v : variants) {
    EnergyBreakdown eb = energy_estimate(v.acc, v.cycles, em);
    std::cout << "simulate: " << v.name << ": " << v.acc.total() << " accesses, "
              << v.cycles << " cycles, " << fmt_double(eb.total_pj * 1e-6) << " uJ\n";
  }
  std::cout << "simulate: worst statistic deviation vs dense reference: "
            << fmt_double(worst) << "\n";
  return 0;
}

MethodRun read_estimates_csv(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path + " (run estimate for '" + name + "' first)");
  std::string line;
  if (!std::getline(in, line) || line != kEstimatesHeader)
    throw DataError(path + ": not an estimates file (unexpected header)");
  MethodRun run;
  run.name = name;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 9)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 9 fields, got " +
                      std::to_string(f.size()));
    run.t_mid.push_back(num_field(path, lineno, f[2]));
    run.omega.push_back(Vec3{num_field(path, lineno, f[3]), num_field(path, lineno, f[4]),
                             num_field(path, lineno, f[5])});
    run.updates.push_back(std::int64_t(num_field(path, lineno, f[6])));
    run.wall_cost.push_back(std::int64_t(num_field(path, lineno, f[7])));
  }
  return run;
}

int cmd_evaluate(const RunConfig& cfg) {
  if (cfg.imu_path.empty()) throw ConfigError("dataset.imu is required for evaluate");
  ImuSeries imu = load_imu(cfg.imu_path);

  std::vector<std::string> names = cfg.eval_runs;
  if (names.empty()) {
    if (fs::is_directory(cfg.out_dir)) {
      for (const fs::directory_entry& e : fs::directory_iterator(cfg.out_dir)) {
        std::string fn = e.path().filename().string();
        if (fn.rfind("estimates_", 0) == 0 && fn.size() > 14 &&
            fn.substr(fn.size() - 4) == ".csv")
          names.push_back(fn.substr(10, fn.size() - 14));
      }
    }
    std::sort(names.begin(), names.end());
  }
  if (names.empty())
    throw DataError("no estimate outputs found in " + cfg.out_dir +
                    " (set evaluate.runs or run estimate first)");

  std::vector<MethodRun> runs;
  for (const std::string& n : names)
    runs.push_back(read_estimates_csv(cfg.out_dir + "/estimates_" + n + ".csv", n));
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].t_mid != runs[0].t_mid)
      throw DataError("window alignment mismatch between runs '" + runs[0].name +
                      "' and '" + runs[i].name + "'; evaluate needs the same dataset and "
                      "window settings for every method");
  }

  std::vector<ErrorSeries> series;
  std::vector<MethodSummary> summaries;
  for (const MethodRun& r : runs) {
    ErrorSeries s = imu_errors(r, imu);
    if (s.e.empty())
      throw DataError("no window midpoint of run '" + r.name +
                      "' falls inside the gyro time range");
    summaries.push_back(summarize(r, imu));
    series.push_back(std::move(s));
  }

  write_run_manifest(cfg, "evaluate");
  {
    std::ofstream os = open_out(cfg.out_dir + "/rmse.csv");
    write_rmse_table(os, summaries);
  }
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::ofstream os = open_out(cfg.out_dir + "/errors_" + runs[i].name + ".csv");
    write_error_rows(os, runs[i].name, series[i]);
  }

  if (runs.size() >= 2) {
    // Deviation curves compare each method against the full-resolution run
    // when present, else against the first listed run.
    std::size_t ref = 0;
    for (std::size_t i = 0; i < runs.size(); ++i)
      if (runs[i].name == "full") ref = i;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (i == ref) continue;
      DeviationResult dev =
          deviation_metric(series[i].e, series[ref].e, series[i].t, cfg.eval_segments);
      std::ofstream os = open_out(cfg.out_dir + "/deviation_" + runs[i].name + ".csv");
      write_deviation_rows(os, runs[i].name, series[i].t, series[i].e, series[ref].e, dev);
    }
  }

  write_rmse_table(std::cout, summaries);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rotational motion estimation from event streams, with a memory datapath simulator"};
  app.require_subcommand(1);
  Cli c;
  CLI::App* est = app.add_subcommand(
      "estimate", "run the estimator over event windows, writing estimate and trace tables");
  CLI::App* sim = app.add_subcommand(
      "simulate", "replay an estimation trajectory through the access-counting datapath model");
  CLI::App* syn =
      app.add_subcommand("synth", "generate a synthetic event/gyro/calibration dataset");
  CLI::App* eva =
      app.add_subcommand("evaluate", "compare estimate runs against the gyro reference");
  for (CLI::App* s : {est, sim, syn, eva}) add_common(s, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    CLI::App* sub = est->parsed() ? est : sim->parsed() ? sim : syn->parsed() ? syn : eva;
    RunConfig cfg = effective_config(sub, c);
    if (est->parsed()) return cmd_estimate(cfg);
    if (sim->parsed()) return cmd_simulate(cfg);
    if (syn->parsed()) return cmd_synth(cfg);
    return cmd_evaluate(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
