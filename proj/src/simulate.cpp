#include "evrot/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "evrot/accumulate.hpp"
#include "evrot/contrast.hpp"

namespace evrot {

namespace {

double rel_dev(double a, double b) {
  double scale = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / scale;
}

double stats_dev(const StreamStats& a, const StreamStats& b) {
  if (a.pixels != b.pixels) return 1.0;
  double d = std::max(rel_dev(a.s1, b.s1), rel_dev(a.s2, b.s2));
  for (int j = 0; j < 3; ++j) {
    d = std::max(d, rel_dev(a.g[j], b.g[j]));
    d = std::max(d, rel_dev(a.t[j], b.t[j]));
  }
  return d;
}

std::vector<std::string> split_csv(const std::string& line) {
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

double field_double(const std::string& path, int lineno, const std::string& v) {
  char* end = nullptr;
  double out = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw DataError(path + ":" + std::to_string(lineno) + ": bad number '" + v + "'");
  return out;
}

}  // namespace

ReplayPlan plan_from_rows(const std::vector<TraceRow>& rows) {
  ReplayPlan plan;
  for (const TraceRow& r : rows) {
    if (r.iter == 0) {
      ReplayBlock b;
      b.window = r.window;
      b.scale = r.stage;
      b.entry = r.omega;
      plan.blocks.push_back(b);
    } else {
      if (plan.blocks.empty() || plan.blocks.back().window != r.window)
        throw DataError("trace row with iter " + std::to_string(r.iter) +
                        " arrived before its stage entry row");
      plan.blocks.back().updates.push_back(r.omega);
    }
    plan.windows = std::max(plan.windows, r.window + 1);
  }
  return plan;
}

ReplayPlan load_trace_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace file " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "window,stage,iter,variance,gain,omega_x,omega_y,omega_z,work_units")
    throw DataError(path + ": not a trace file (unexpected header)");
  std::vector<TraceRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv(line);
    if (f.size() != 9)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 9 fields, got " +
                      std::to_string(f.size()));
    TraceRow r;
    r.window = int(field_double(path, lineno, f[0]));
    r.stage = field_double(path, lineno, f[1]);
    r.iter = int(field_double(path, lineno, f[2]));
    r.variance = field_double(path, lineno, f[3]);
    r.gain = f[4] == "nan" ? std::nan("") : field_double(path, lineno, f[4]);
    r.omega = Vec3{field_double(path, lineno, f[5]), field_double(path, lineno, f[6]),
                   field_double(path, lineno, f[7])};
    r.work_units = std::int64_t(field_double(path, lineno, f[8]));
    rows.push_back(r);
  }
  return plan_from_rows(rows);
}

ReplayPlan plan_fixed(int n_windows, std::span<const StageConfig> stages,
                      const Vec3& omega, int iters) {
  if (iters < 1) throw ConfigError("replay iteration count must be at least 1");
  ReplayPlan plan;
  plan.windows = n_windows;
  for (int w = 0; w < n_windows; ++w) {
    for (const StageConfig& sc : stages) {
      ReplayBlock b;
      b.window = w;
      b.scale = sc.scale.s;
      b.entry = omega;
      b.updates.assign(std::size_t(iters - 1), omega);
      plan.blocks.push_back(b);
    }
  }
  return plan;
}

SimVariant simulate_plan(const std::string& name, const ReplayPlan& plan,
                         std::span<const EventWindow> windows,
                         const CameraIntrinsics& cam,
                         std::span<const StageConfig> stages,
                         const EngineConfig& ecfg) {
  SimVariant out;
  out.name = name;
  for (const ReplayBlock& b : plan.blocks) {
    if (b.window < 0 || std::size_t(b.window) >= windows.size())
      throw DataError("trace window " + std::to_string(b.window) +
                      " is outside the loaded dataset (" + std::to_string(windows.size()) +
                      " windows)");
    const StageConfig* sc = nullptr;
    for (const StageConfig& s : stages)
      if (s.scale.s == b.scale) sc = &s;
    if (!sc)
      throw DataError("trace stage scale " + fmt_double(b.scale) +
                      " has no matching schedule stage");

    const EventWindow& win = windows[std::size_t(b.window)];
    EngineStage eng(win, cam, sc->scale, sc->kernel, ecfg);
    eng.enter(b.entry);

    // The dense cross-check re-selects the events the variant streamed: the
    // sorter's retained set, or the whole window when sorting is bypassed.
    bool sorted = sc->scale.s < 1.0 || ecfg.sort_full_res;
    std::vector<std::uint8_t> mask;
    if (sorted) {
      mask.assign(win.events.size(), 0);
      for (std::int32_t idx : eng.tables().perm) mask[std::size_t(idx)] = 1;
    }

    auto run_eval = [&](const Vec3& w) {
      StreamStats st = eng.iterate(w);
      IweChannels ch =
          accumulate_window(win, mask, w, sc->scale, cam, ecfg.quant_step);
      StreamStats ref = stream_stats(smooth(ch, sc->kernel));
      out.max_rel_dev = std::max(out.max_rel_dev, stats_dev(st, ref));
      ++out.evaluations;
    };
    run_eval(b.entry);
    for (const Vec3& w : b.updates) run_eval(w);

    out.stage.push_back(eng.trace());
    out.stage_window.push_back(b.window);
    out.acc += eng.trace().acc;
    out.cycles += eng.trace().cycles;
  }
  return out;
}

}  // namespace evrot
