#include "evrot/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace evrot {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const char* want,
                            const std::string& got) {
  throw ConfigError("config key '" + key + "': expected " + want + ", got '" + got + "'");
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  double out = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') bad_value(key, "a number", v);
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  long long out = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') bad_value(key, "an integer", v);
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, "a boolean (true/false)", v);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(trim(item));
  if (!v.empty() && v.back() == ',') out.push_back("");
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const std::string& item : split_list(v)) out.push_back(to_double(key, item));
  if (out.empty()) bad_value(key, "a comma-separated number list", v);
  return out;
}

std::vector<int> to_ints(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const std::string& item : split_list(v)) out.push_back(int(to_int(key, item)));
  return out;
}

Vec3 to_vec3(const std::string& key, const std::string& v) {
  std::vector<double> d = to_doubles(key, v);
  if (d.size() != 3) bad_value(key, "three comma-separated numbers", v);
  return Vec3{d[0], d[1], d[2]};
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt_double(v[i]);
  }
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += v[i];
  }
  return out;
}

std::string vec3_text(const Vec3& v) {
  return fmt_double(v.x) + "," + fmt_double(v.y) + "," + fmt_double(v.z);
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header '" +
                          line + "'");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value, got '" +
                        line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    kv[key] = value;
  }
  return kv;
}

void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "dataset.events") cfg.events_path = value;
  else if (key == "dataset.imu") cfg.imu_path = value;
  else if (key == "dataset.calib") cfg.calib_path = value;
  else if (key == "dataset.width") cfg.width = int(to_int(key, value));
  else if (key == "dataset.height") cfg.height = int(to_int(key, value));
  else if (key == "window.events") cfg.window_events = int(to_int(key, value));
  else if (key == "window.max") cfg.max_windows = int(to_int(key, value));
  else if (key == "schedule.mode") cfg.mode = parse_mode(value);
  else if (key == "schedule.taus") cfg.taus = to_doubles(key, value);
  else if (key == "schedule.fixed_iters") cfg.fixed_iters = to_ints(key, value);
  else if (key == "schedule.stage_cap") cfg.stage_cap = int(to_int(key, value));
  else if (key == "schedule.window_cap") cfg.window_cap = int(to_int(key, value));
  else if (key == "schedule.sigma") cfg.sigma = to_double(key, value);
  else if (key == "optimizer.step0_px") cfg.opt.step0_px = to_double(key, value);
  else if (key == "optimizer.step_max_px") cfg.opt.step_max_px = to_double(key, value);
  else if (key == "optimizer.keep_mass") cfg.opt.keep_mass = to_double(key, value);
  else if (key == "optimizer.max_halvings") cfg.opt.max_halvings = int(to_int(key, value));
  else if (key == "optimizer.growth") cfg.opt.growth = to_double(key, value);
  else if (key == "engine.run") cfg.run_engine = to_bool(key, value);
  else if (key == "engine.baseline") cfg.run_baseline = to_bool(key, value);
  else if (key == "engine.quant_step") cfg.quant_step = to_double(key, value);
  else if (key == "engine.energy_table") cfg.energy_table = value;
  else if (key == "simulate.replay_iters") cfg.replay_iters = int(to_int(key, value));
  else if (key == "evaluate.runs") cfg.eval_runs = split_list(value);
  else if (key == "evaluate.segments") cfg.eval_segments = int(to_int(key, value));
  else if (key == "run.out_dir") cfg.out_dir = value;
  else if (key == "run.seed") cfg.seed = std::uint64_t(to_int(key, value));
  else if (key == "synth.width") cfg.synth.cam.width = int(to_int(key, value));
  else if (key == "synth.height") cfg.synth.cam.height = int(to_int(key, value));
  else if (key == "synth.fx") cfg.synth.cam.fx = to_double(key, value);
  else if (key == "synth.fy") cfg.synth.cam.fy = to_double(key, value);
  else if (key == "synth.cx") cfg.synth.cam.cx = to_double(key, value);
  else if (key == "synth.cy") cfg.synth.cam.cy = to_double(key, value);
  else if (key == "synth.points") cfg.synth.points = int(to_int(key, value));
  else if (key == "synth.duration") cfg.synth.duration = to_double(key, value);
  else if (key == "synth.noise_fraction") cfg.synth.noise_fraction = to_double(key, value);
  else if (key == "synth.imu_rate_hz") cfg.synth.imu_rate_hz = to_double(key, value);
  else if (key == "synth.base") cfg.synth.base = to_vec3(key, value);
  else if (key == "synth.amp") cfg.synth.amp = to_vec3(key, value);
  else if (key == "synth.freq") cfg.synth.freq = to_vec3(key, value);
  else if (key == "synth.phase") cfg.synth.phase = to_vec3(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig make_run_config(const std::map<std::string, std::string>& kv) {
  RunConfig cfg;
  for (const auto& [key, value] : kv) set_config_key(cfg, key, value);
  if (cfg.window_events <= 0)
    throw ConfigError("config key 'window.events': must be positive");
  if (cfg.max_windows < 0)
    throw ConfigError("config key 'window.max': must be zero or positive");
  if (cfg.eval_segments < 1)
    throw ConfigError("config key 'evaluate.segments': must be at least 1");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return make_run_config(parse_key_values(ss.str(), path));
}

const char* mode_name(ScheduleMode mode) {
  switch (mode) {
    case ScheduleMode::fixed: return "fixed";
    case ScheduleMode::adaptive: return "adaptive";
    case ScheduleMode::full: return "full";
  }
  return "?";
}

ScheduleMode parse_mode(const std::string& text) {
  if (text == "fixed") return ScheduleMode::fixed;
  if (text == "adaptive") return ScheduleMode::adaptive;
  if (text == "full") return ScheduleMode::full;
  throw ConfigError("config key 'schedule.mode': expected fixed, adaptive or full, got '" +
                    text + "'");
}

void write_manifest(std::ostream& os, const std::string& command, const RunConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["dataset.events"] = cfg.events_path;
  kv["dataset.imu"] = cfg.imu_path;
  kv["dataset.calib"] = cfg.calib_path;
  kv["dataset.width"] = std::to_string(cfg.width);
  kv["dataset.height"] = std::to_string(cfg.height);
  kv["window.events"] = std::to_string(cfg.window_events);
  kv["window.max"] = std::to_string(cfg.max_windows);
  kv["schedule.mode"] = mode_name(cfg.mode);
  kv["schedule.taus"] = join_doubles(cfg.taus);
  kv["schedule.fixed_iters"] = join_ints(cfg.fixed_iters);
  kv["schedule.stage_cap"] = std::to_string(cfg.stage_cap);
  kv["schedule.window_cap"] = std::to_string(cfg.window_cap);
  kv["schedule.sigma"] = fmt_double(cfg.sigma);
  kv["optimizer.step0_px"] = fmt_double(cfg.opt.step0_px);
  kv["optimizer.step_max_px"] = fmt_double(cfg.opt.step_max_px);
  kv["optimizer.keep_mass"] = fmt_double(cfg.opt.keep_mass);
  kv["optimizer.max_halvings"] = std::to_string(cfg.opt.max_halvings);
  kv["optimizer.growth"] = fmt_double(cfg.opt.growth);
  kv["engine.run"] = cfg.run_engine ? "true" : "false";
  kv["engine.baseline"] = cfg.run_baseline ? "true" : "false";
  kv["engine.quant_step"] = fmt_double(cfg.quant_step);
  kv["engine.energy_table"] = cfg.energy_table;
  kv["simulate.replay_iters"] = std::to_string(cfg.replay_iters);
  kv["evaluate.runs"] = join_strings(cfg.eval_runs);
  kv["evaluate.segments"] = std::to_string(cfg.eval_segments);
  kv["run.out_dir"] = cfg.out_dir;
  kv["run.seed"] = std::to_string(cfg.seed);
  kv["synth.width"] = std::to_string(cfg.synth.cam.width);
  kv["synth.height"] = std::to_string(cfg.synth.cam.height);
  kv["synth.fx"] = fmt_double(cfg.synth.cam.fx);
  kv["synth.fy"] = fmt_double(cfg.synth.cam.fy);
  kv["synth.cx"] = fmt_double(cfg.synth.cam.cx);
  kv["synth.cy"] = fmt_double(cfg.synth.cam.cy);
  kv["synth.points"] = std::to_string(cfg.synth.points);
  kv["synth.duration"] = fmt_double(cfg.synth.duration);
  kv["synth.noise_fraction"] = fmt_double(cfg.synth.noise_fraction);
  kv["synth.imu_rate_hz"] = fmt_double(cfg.synth.imu_rate_hz);
  kv["synth.base"] = vec3_text(cfg.synth.base);
  kv["synth.amp"] = vec3_text(cfg.synth.amp);
  kv["synth.freq"] = vec3_text(cfg.synth.freq);
  kv["synth.phase"] = vec3_text(cfg.synth.phase);

  os << "evrot " << kVersion << "\n";
  os << "command " << command << "\n";
  for (const auto& [key, value] : kv) os << key << " " << value << "\n";
}

}  // namespace evrot
