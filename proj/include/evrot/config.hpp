#pragma once
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "evrot/optimizer.hpp"
#include "evrot/scheduler.hpp"
#include "evrot/synth.hpp"
#include "evrot/textio.hpp"

namespace evrot {

inline constexpr const char* kVersion = "0.1.0";

// Everything a run needs, with workable defaults. Values come from three
// layers, later ones winning: built-in defaults, the config file, command
// line flags. The same dotted keys name a field in all three.
struct RunConfig {
  // dataset.*  (calibration files carry no sensor size, so width/height ride
  // along explicitly)
  std::string events_path;
  std::string imu_path;
  std::string calib_path;
  int width = 0;
  int height = 0;

  // window.*
  int window_events = 40000;
  int max_windows = 0;  // 0 processes every complete window

  // schedule.*
  ScheduleMode mode = ScheduleMode::adaptive;
  std::vector<double> taus{0.02, 0.01, 0.005};
  std::vector<int> fixed_iters;
  int stage_cap = 50;
  int window_cap = 200;
  double sigma = 1.0;

  // optimizer.*
  OptOptions opt;

  // engine.*
  bool run_engine = true;
  bool run_baseline = true;
  double quant_step = 0.0;
  std::string energy_table;  // empty selects the built-in constants

  // simulate.*  (iterations per stage when no estimate trace is replayed)
  int replay_iters = 3;

  // evaluate.*
  std::vector<std::string> eval_runs;  // empty discovers estimates_*.csv
  int eval_segments = 4;

  // run.*
  std::string out_dir = "out";
  std::uint64_t seed = 1;

  // synth.*  (the generator's seed is run.seed)
  SynthParams synth;
};

// Sectioned key-value text:
//   # comment
//   [section]
//   key = value
// Keys flatten to "section.key". Duplicate keys keep the last value.
std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin);

// Applies one dotted key. Unknown keys and malformed values raise ConfigError
// naming the key.
void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

RunConfig make_run_config(const std::map<std::string, std::string>& kv);
RunConfig load_run_config(const std::string& path);

const char* mode_name(ScheduleMode mode);
ScheduleMode parse_mode(const std::string& text);

// Effective configuration echo, one sorted "key value" line each, plus the
// tool version and seed. Deliberately timestamp-free so identical runs write
// identical manifests.
void write_manifest(std::ostream& os, const std::string& command, const RunConfig& cfg);

}  // namespace evrot
