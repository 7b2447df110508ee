#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "evrot/contrast.hpp"
#include "evrot/events.hpp"
#include "evrot/textio.hpp"
#include "evrot/warp.hpp"

namespace evrot {

// On-chip memory groups whose traffic is counted separately. The accumulator
// banks (count image plus the three derivative images), the raw event buffer,
// the sorting metadata buffers, and the blur line buffers.
enum MemGroup : int {
  kMemIwe = 0,
  kMemEvents = 1,
  kMemSort = 2,
  kMemLine = 3,
  kMemGroupCount = 4,
};

const char* mem_group_name(int g);

struct AccessCounts {
  std::array<std::int64_t, kMemGroupCount> reads{};
  std::array<std::int64_t, kMemGroupCount> writes{};

  AccessCounts& operator+=(const AccessCounts& o);
  std::int64_t reads_total() const;
  std::int64_t writes_total() const;
  std::int64_t total() const { return reads_total() + writes_total(); }
};

// Per-group retention decision. An empty group is inactive and keeps nothing;
// an active group keeps k of its cnt events, spread by taking every stride-th
// arrival. rho is the stage keep ratio.
struct StagePolicyOut {
  std::int64_t k = 0;
  std::int64_t stride = 0;
  bool act = false;
};

StagePolicyOut stage_policy(std::int64_t cnt, double rho);

// Output of the stage-entry sorting pass. Groups are stage-grid pixels in
// row-major order; perm lists the retained event indices (window-local),
// grouped and in arrival order within each group.
struct SortTables {
  StageScale scale;
  std::vector<std::int64_t> cnt;       // per group: valid events counted into it
  std::vector<std::int64_t> offset;    // size P+1, prefix sums of the keep budgets
  std::vector<std::int64_t> stride;    // per group subsample stride (0 if inactive)
  std::vector<std::uint8_t> act;       // per group activity flag
  std::vector<std::int32_t> active;    // ids of active groups, ascending
  std::vector<std::int32_t> perm;      // retained event indices, group-blocked
  std::int64_t valid_events = 0;       // events whose reference warp stayed on grid
  std::int64_t total_events = 0;

  std::int64_t groups() const { return std::int64_t(cnt.size()); }
  std::int64_t retained() const { return offset.empty() ? 0 : offset.back(); }
};

// Three-pass counting sort keyed by the reference-warp pixel. Pass 1 counts
// per-group arrivals, pass 2 turns counts into keep budgets and offsets,
// pass 3 scatters the retained indices. Every metadata access is charged to
// the sorting buffers and every event fetch to the raw event buffer when a
// counter sink is given.
SortTables pixel_group_sort(const EventWindow& win, const Vec3& omega_ref,
                            const StageScale& st, const CameraIntrinsics& cam,
                            double rho, AccessCounts* acc = nullptr);

// Parity interleaving of a stage image over four banks. A 2x2 bilinear
// stencil always touches one pixel of each parity class, so its four taps
// land in four different banks.
struct BankAddress {
  int bank = 0;            // (y & 1) * 2 + (x & 1)
  std::int64_t addr = 0;   // (y / 2) * ceil(ws / 2) + x / 2
};

BankAddress bank_address(int x, int y, int ws);

// Addresses for the full stencil, tap order (x0,y0),(x0+1,y0),(x0,y0+1),(x0+1,y0+1).
std::array<BankAddress, 4> stencil_addresses(int x0, int y0, int ws);

// Four channels x four banks of accumulator cells with per-cell touch
// tracking, so the inter-iteration clear only rewrites cells that carry a
// value. All traffic lands in the kMemIwe counters. With banked = false the
// model degrades to one flat bank per channel (the baseline layout).
class BankedMemory {
 public:
  BankedMemory(const StageScale& st, bool banked);

  void add(int channel, const BankAddress& ba, double delta, AccessCounts& acc);
  double peek(int channel, const BankAddress& ba) const;  // uncounted, for tests

  // Rewrites every touched cell with zero, one counted write each, and
  // forgets the touch set. The reset at stage entry is free (power-on state).
  void clear_touched(AccessCounts& acc);
  void reset();

  // Streams all four channel images out, one counted read per cell.
  IweChannels read_out(AccessCounts& acc) const;

  std::int64_t cells_per_bank() const { return cells_; }
  std::int64_t touched_cells() const { return std::int64_t(touched_list_.size()); }

 private:
  std::size_t flat(int channel, int bank, std::int64_t addr) const;

  StageScale st_;
  bool banked_ = true;
  std::int64_t rows_ = 0, pitch_ = 0, cells_ = 0;
  std::vector<double> cells_v_;          // [channel][bank][addr]
  std::vector<std::uint8_t> touched_;
  std::vector<std::int64_t> touched_list_;
};

// One memory update on its way to the banks: one tap of one channel.
struct LaneUpdate {
  int channel = 0;
  BankAddress ba;
  double delta = 0;
};

// Per-lane coalescing register holding the most recent outstanding update.
// A same-address arrival merges in place; a different address first commits
// the held value (one read-modify-write on the banks) and then takes over.
class PendingLane {
 public:
  // Returns true if the arrival merged, false if it displaced the held value.
  bool push(const LaneUpdate& u, BankedMemory& mem, AccessCounts& acc,
            std::int64_t* commits);
  void flush(BankedMemory& mem, AccessCounts& acc, std::int64_t* commits);

 private:
  bool valid_ = false;
  LaneUpdate held_;
};

// Switches between the full engine datapath and the stripped baseline.
struct EngineConfig {
  bool banked = true;        // parity banking; off = flat single-port layout
  bool local_accum = true;   // per-group register block for inlier events
  bool pending_merge = true; // per-lane coalescing before commit
  bool sort_full_res = true; // baseline streams raw events at scale 1 instead
  double rho_override = -1;  // >= 0 replaces the stage keep ratio
  double quant_step = 0;     // > 0 snaps vote deltas to this grid
};

EngineConfig baseline_config();

// Everything measured while running one stage. Counts accumulate across the
// iterations run since enter().
struct StageTrace {
  double scale = 0;
  std::int64_t groups = 0;           // stage pixels P
  std::int64_t sorted_events = 0;    // events pushed through the sorter
  std::int64_t valid_at_entry = 0;
  std::int64_t retained = 0;
  std::int64_t active_groups = 0;
  int iterations = 0;

  std::int64_t voted = 0;            // in-range warps that produced taps
  std::int64_t dropped = 0;          // retained events warping off grid
  std::int64_t inliers = 0;          // voted with current pixel == sort pixel
  std::int64_t outliers = 0;
  std::int64_t inlier_emissions = 0; // register-block flushes, one per group with inliers
  std::int64_t pending_hits = 0;
  std::int64_t commits = 0;          // read-modify-writes that reached the banks
  std::int64_t flush_warnings = 0;

  std::int64_t cycles = 0;
  AccessCounts acc;

  double active_group_ratio() const;   // active groups per retained event
  double outlier_ratio() const;        // outliers per voted event
  // Commit traffic bound with only the register blocks coalescing, as a
  // fraction of one commit per generated tap.
  double expected_update_ratio() const;
  double expected_reduction() const { return 1.0 - expected_update_ratio(); }
  double measured_reduction() const;   // from actual commits
};

// Bookkeeping identity tying the tap stream to the commit counters:
//   16 * voted = 16 * (inliers - emissions) + pending_hits + commits
// Returns an empty string when it holds.
std::string check_commit_ledger(const StageTrace& t);

// One coarse-to-fine stage of the datapath simulator. enter() runs the
// stage-entry sort at the reference estimate; each iterate() replays the full
// pipeline at one candidate velocity: warp, bilinear vote, grouping into the
// local registers, pending merge, banked commit, then blur and statistics
// readout. Results match the dense reference arithmetic; only the access
// pattern differs.
class EngineStage {
 public:
  EngineStage(EventWindow win, const CameraIntrinsics& cam, const StageScale& st,
              GaussianKernel kernel, const EngineConfig& cfg);

  void enter(const Vec3& omega_ref);
  StreamStats iterate(const Vec3& omega);
  Objective objective(const Vec3& omega);  // iterate + closed-form evaluation

  const SortTables& tables() const { return tables_; }
  const StageTrace& trace() const { return trace_; }
  const EngineConfig& config() const { return cfg_; }

 private:
  void feed_lane(const LaneUpdate& u, AccessCounts& acc);
  void vote_event(const WarpedEvent& we, std::int64_t p_ref, bool last_in_group,
                  std::array<double, 16>& regs, bool& group_has_inliers,
                  std::vector<LaneUpdate>& outlier_queue, AccessCounts& acc);
  void emit_group(std::int64_t p_ref, std::array<double, 16>& regs,
                  bool& group_has_inliers, std::vector<LaneUpdate>& outlier_queue,
                  AccessCounts& acc);

  EventWindow win_;
  CameraIntrinsics cam_;
  StageScale st_;
  GaussianKernel kernel_;
  EngineConfig cfg_;
  double rho_ = 1.0;

  SortTables tables_;
  BankedMemory mem_;
  std::array<PendingLane, 16> lanes_;
  StageTrace trace_;
  bool entered_ = false;
};

// Per-access energy and leakage for one memory group, 45 nm class numbers.
struct EnergyGroupSpec {
  double e_read_pj = 0;
  double e_write_pj = 0;
  double p_lkg_mw = 0;
  double size_kb = 0;
};

struct EnergyModel {
  std::array<EnergyGroupSpec, kMemGroupCount> groups;
  double clock_hz = 200e6;
  double logic_mw = 0;  // optional lumped logic power

  static EnergyModel defaults();
};

// Plain text, one line per group: name e_read_pj e_write_pj p_lkg_mw size_kb.
EnergyModel load_energy_model(const std::string& path);
void save_energy_model(const std::string& path, const EnergyModel& m);

struct EnergyBreakdown {
  std::array<double, kMemGroupCount> dynamic_pj{};
  double dynamic_total_pj = 0;
  double leakage_pj = 0;
  double logic_pj = 0;
  double total_pj = 0;
  double seconds = 0;
};

EnergyBreakdown energy_estimate(const AccessCounts& acc, std::int64_t cycles,
                                const EnergyModel& m);

}  // namespace evrot
