#include "evrot/engine_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace evrot {

namespace {

constexpr const char* kGroupNames[kMemGroupCount] = {"iwe", "events", "sorting", "linebuf"};

// Flat layout used when banking is off: one bank, row-major addresses.
BankAddress flat_address(int x, int y, int ws) {
  return BankAddress{0, std::int64_t(y) * ws + x};
}

std::array<BankAddress, 4> stencil_flat(int x0, int y0, int ws) {
  return {flat_address(x0, y0, ws), flat_address(x0 + 1, y0, ws),
          flat_address(x0, y0 + 1, ws), flat_address(x0 + 1, y0 + 1, ws)};
}

// Blur readout bookkeeping. The raw stream feeds the horizontal pass
// directly; each horizontally blurred pixel is written to the line buffer
// once, and the vertical combine reads back every in-range row except the
// one just produced, which is still on the datapath.
void count_line_buffer(const StageScale& st, const GaussianKernel& k, AccessCounts& acc) {
  acc.writes[kMemLine] += 4ll * st.hs * st.ws;
  std::int64_t reads_per_col = 0;
  for (int y = 0; y < st.hs; ++y) {
    int in_range = 0;
    for (int dk = -k.radius; dk <= k.radius; ++dk) {
      int yy = y + dk;
      if (yy >= 0 && yy < st.hs) ++in_range;
    }
    reads_per_col += in_range - 1;
  }
  acc.reads[kMemLine] += 4ll * st.ws * reads_per_col;
}

}  // namespace

const char* mem_group_name(int g) { return kGroupNames[g]; }

AccessCounts& AccessCounts::operator+=(const AccessCounts& o) {
  for (int g = 0; g < kMemGroupCount; ++g) {
    reads[g] += o.reads[g];
    writes[g] += o.writes[g];
  }
  return *this;
}

std::int64_t AccessCounts::reads_total() const {
  std::int64_t s = 0;
  for (auto r : reads) s += r;
  return s;
}

std::int64_t AccessCounts::writes_total() const {
  std::int64_t s = 0;
  for (auto w : writes) s += w;
  return s;
}

StagePolicyOut stage_policy(std::int64_t cnt, double rho) {
  StagePolicyOut out;
  out.act = cnt > 0;
  if (!out.act) return out;
  out.k = std::max<std::int64_t>(1, std::int64_t(std::ceil(rho * double(cnt))));
  out.k = std::min(out.k, cnt);
  out.stride = std::max<std::int64_t>(1, cnt / out.k);
  return out;
}

SortTables pixel_group_sort(const EventWindow& win, const Vec3& omega_ref,
                            const StageScale& st, const CameraIntrinsics& cam,
                            double rho, AccessCounts* acc) {
  AccessCounts scratch;
  AccessCounts& a = acc ? *acc : scratch;

  SortTables t;
  t.scale = st;
  const std::int64_t P = st.pixels();
  const std::size_t n = win.events.size();
  t.total_events = std::int64_t(n);
  t.cnt.assign(std::size_t(P), 0);

  // Pass 1: one reference warp per event, writing its group id and bumping
  // that group's count. Off-grid events get the -1 sentinel and no count.
  std::vector<std::int64_t> gid(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    a.reads[kMemEvents] += 1;
    WarpedEvent we = warp_event(win.events[i], win.t_ref, omega_ref, st, cam);
    a.writes[kMemSort] += 1;
    if (!we.valid()) continue;
    gid[i] = we.p_act;
    a.reads[kMemSort] += 1;
    a.writes[kMemSort] += 1;
    t.cnt[std::size_t(we.p_act)] += 1;
    t.valid_events += 1;
  }

  // Pass 2: scan the counts into keep budgets, offsets and the active list.
  t.offset.assign(std::size_t(P) + 1, 0);
  t.stride.assign(std::size_t(P), 0);
  t.act.assign(std::size_t(P), 0);
  for (std::int64_t p = 0; p < P; ++p) {
    a.reads[kMemSort] += 1;
    StagePolicyOut pol = stage_policy(t.cnt[std::size_t(p)], rho);
    t.offset[std::size_t(p) + 1] = t.offset[std::size_t(p)] + pol.k;
    t.stride[std::size_t(p)] = pol.stride;
    t.act[std::size_t(p)] = pol.act ? 1 : 0;
    a.writes[kMemSort] += 2;
    if (pol.act) {
      t.active.push_back(std::int32_t(p));
      a.writes[kMemSort] += 1;
    }
  }
  a.writes[kMemSort] += 1;  // final offset entry

  // Pass 3: scatter. Group-local arrival rank selects every stride-th event;
  // the offset of the next group guards the keep budget. The rank and fill
  // counters start from the scanned tables; those copies are register
  // initialization and are not charged.
  t.perm.assign(std::size_t(t.offset.back()), -1);
  std::vector<std::int64_t> rank(std::size_t(P), 0);
  std::vector<std::int64_t> ptr(t.offset.begin(), t.offset.end() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    a.reads[kMemSort] += 1;
    std::int64_t g = gid[i];
    if (g < 0) continue;
    a.reads[kMemSort] += 1;
    a.writes[kMemSort] += 1;
    std::int64_t r = rank[std::size_t(g)]++;
    if (r % t.stride[std::size_t(g)] != 0) continue;
    a.reads[kMemSort] += 2;  // budget guard: next offset and the fill pointer
    if (ptr[std::size_t(g)] < t.offset[std::size_t(g) + 1]) {
      t.perm[std::size_t(ptr[std::size_t(g)])] = std::int32_t(i);
      ptr[std::size_t(g)] += 1;
      a.writes[kMemSort] += 2;
    }
  }
  return t;
}

BankAddress bank_address(int x, int y, int ws) {
  BankAddress ba;
  ba.bank = (y & 1) * 2 + (x & 1);
  ba.addr = std::int64_t(y / 2) * ((ws + 1) / 2) + x / 2;
  return ba;
}

std::array<BankAddress, 4> stencil_addresses(int x0, int y0, int ws) {
  return {bank_address(x0, y0, ws), bank_address(x0 + 1, y0, ws),
          bank_address(x0, y0 + 1, ws), bank_address(x0 + 1, y0 + 1, ws)};
}

BankedMemory::BankedMemory(const StageScale& st, bool banked) : st_(st), banked_(banked) {
  rows_ = (st.hs + 1) / 2;
  pitch_ = (st.ws + 1) / 2;
  // One sizing covers both layouts: flat mode addresses the whole image
  // through bank 0, banked mode stays inside the quarter-size banks.
  cells_ = std::max<std::int64_t>(rows_ * pitch_, std::int64_t(st.hs) * st.ws);
  cells_v_.assign(std::size_t(4) * 4 * cells_, 0.0);
  touched_.assign(cells_v_.size(), 0);
}

std::size_t BankedMemory::flat(int channel, int bank, std::int64_t addr) const {
  return (std::size_t(channel) * 4 + std::size_t(bank)) * std::size_t(cells_) +
         std::size_t(addr);
}

void BankedMemory::add(int channel, const BankAddress& ba, double delta, AccessCounts& acc) {
  std::size_t f = flat(channel, ba.bank, ba.addr);
  acc.reads[kMemIwe] += 1;
  acc.writes[kMemIwe] += 1;
  cells_v_[f] += delta;
  if (!touched_[f]) {
    touched_[f] = 1;
    touched_list_.push_back(std::int64_t(f));
  }
}

double BankedMemory::peek(int channel, const BankAddress& ba) const {
  return cells_v_[flat(channel, ba.bank, ba.addr)];
}

void BankedMemory::clear_touched(AccessCounts& acc) {
  for (std::int64_t f : touched_list_) {
    cells_v_[std::size_t(f)] = 0.0;
    touched_[std::size_t(f)] = 0;
    acc.writes[kMemIwe] += 1;
  }
  touched_list_.clear();
}

void BankedMemory::reset() {
  std::fill(cells_v_.begin(), cells_v_.end(), 0.0);
  std::fill(touched_.begin(), touched_.end(), 0);
  touched_list_.clear();
}

IweChannels BankedMemory::read_out(AccessCounts& acc) const {
  IweChannels out(st_);
  for (int c = 0; c < 4; ++c) {
    Image& img = out.channel(c);
    for (int y = 0; y < st_.hs; ++y) {
      for (int x = 0; x < st_.ws; ++x) {
        acc.reads[kMemIwe] += 1;
        BankAddress ba = banked_ ? bank_address(x, y, st_.ws) : flat_address(x, y, st_.ws);
        img.at(y, x) = cells_v_[flat(c, ba.bank, ba.addr)];
      }
    }
  }
  return out;
}

bool PendingLane::push(const LaneUpdate& u, BankedMemory& mem, AccessCounts& acc,
                       std::int64_t* commits) {
  if (valid_ && held_.channel == u.channel && held_.ba.bank == u.ba.bank &&
      held_.ba.addr == u.ba.addr) {
    held_.delta += u.delta;
    return true;
  }
  if (valid_) {
    mem.add(held_.channel, held_.ba, held_.delta, acc);
    *commits += 1;
  }
  held_ = u;
  valid_ = true;
  return false;
}

void PendingLane::flush(BankedMemory& mem, AccessCounts& acc, std::int64_t* commits) {
  if (!valid_) return;
  mem.add(held_.channel, held_.ba, held_.delta, acc);
  *commits += 1;
  valid_ = false;
}

EngineConfig baseline_config() {
  EngineConfig c;
  c.banked = false;
  c.local_accum = false;
  c.pending_merge = false;
  c.sort_full_res = false;
  return c;
}

double StageTrace::active_group_ratio() const {
  return retained > 0 ? double(active_groups) / double(retained) : 0.0;
}

double StageTrace::outlier_ratio() const {
  return voted > 0 ? double(outliers) / double(voted) : 0.0;
}

double StageTrace::expected_update_ratio() const {
  return voted > 0 ? double(inlier_emissions + outliers) / double(voted) : 0.0;
}

double StageTrace::measured_reduction() const {
  return voted > 0 ? 1.0 - double(commits) / double(16 * voted) : 0.0;
}

std::string check_commit_ledger(const StageTrace& t) {
  std::int64_t lhs = 16 * t.voted;
  std::int64_t rhs = 16 * (t.inliers - t.inlier_emissions) + t.pending_hits + t.commits;
  if (lhs == rhs) return {};
  std::ostringstream os;
  os << "commit ledger broken: 16*voted=" << lhs << " but absorbed+hits+commits=" << rhs;
  return os.str();
}

EngineStage::EngineStage(EventWindow win, const CameraIntrinsics& cam,
                         const StageScale& st, GaussianKernel kernel,
                         const EngineConfig& cfg)
    : win_(win), cam_(cam), st_(st), kernel_(std::move(kernel)), cfg_(cfg),
      mem_(st, cfg.banked) {
  rho_ = cfg_.rho_override >= 0 ? cfg_.rho_override : st_.keep_ratio();
}

void EngineStage::enter(const Vec3& omega_ref) {
  trace_ = StageTrace{};
  trace_.scale = st_.s;
  trace_.groups = st_.pixels();
  mem_.reset();
  lanes_ = {};

  bool use_sort = st_.s < 1.0 || cfg_.sort_full_res;
  if (use_sort) {
    tables_ = pixel_group_sort(win_, omega_ref, st_, cam_, rho_, &trace_.acc);
    trace_.sorted_events = tables_.total_events;
    trace_.valid_at_entry = tables_.valid_events;
    trace_.retained = tables_.retained();
    trace_.active_groups = std::int64_t(tables_.active.size());
    trace_.cycles += 2 * tables_.total_events + trace_.groups;
  } else {
    tables_ = SortTables{};
    tables_.scale = st_;
    tables_.total_events = std::int64_t(win_.events.size());
    trace_.retained = std::int64_t(win_.events.size());
  }
  entered_ = true;
}

void EngineStage::feed_lane(const LaneUpdate& u, AccessCounts& acc) {
  if (cfg_.pending_merge) {
    int lane = u.channel * 4 + u.ba.bank;
    if (lanes_[std::size_t(lane)].push(u, mem_, acc, &trace_.commits)) {
      trace_.pending_hits += 1;
    }
  } else {
    mem_.add(u.channel, u.ba, u.delta, acc);
    trace_.commits += 1;
  }
}

void EngineStage::vote_event(const WarpedEvent& we, std::int64_t p_ref, bool last_in_group,
                             std::array<double, 16>& regs, bool& group_has_inliers,
                             std::vector<LaneUpdate>& outlier_queue, AccessCounts& acc) {
  (void)last_in_group;
  trace_.voted += 1;
  TapDeltas td = bilinear_vote(we, cfg_.quant_step);
  bool inlier = cfg_.local_accum && we.p_act == p_ref;
  if (inlier) {
    trace_.inliers += 1;
    group_has_inliers = true;
    for (int t = 0; t < 4; ++t) {
      const Tap& tap = td.taps[std::size_t(t)];
      regs[std::size_t(t * 4 + 0)] += tap.d_iwe;
      regs[std::size_t(t * 4 + 1)] += tap.d[0];
      regs[std::size_t(t * 4 + 2)] += tap.d[1];
      regs[std::size_t(t * 4 + 3)] += tap.d[2];
    }
    return;
  }
  auto addrs = cfg_.banked ? stencil_addresses(we.x0, we.y0, st_.ws)
                           : stencil_flat(we.x0, we.y0, st_.ws);
  if (cfg_.local_accum) trace_.outliers += 1;
  for (int t = 0; t < 4; ++t) {
    const Tap& tap = td.taps[std::size_t(t)];
    double d[4] = {tap.d_iwe, tap.d[0], tap.d[1], tap.d[2]};
    for (int c = 0; c < 4; ++c) {
      LaneUpdate u{c, addrs[std::size_t(t)], d[c]};
      if (cfg_.local_accum) {
        outlier_queue.push_back(u);
      } else {
        feed_lane(u, acc);
      }
    }
  }
}

void EngineStage::emit_group(std::int64_t p_ref, std::array<double, 16>& regs,
                             bool& group_has_inliers,
                             std::vector<LaneUpdate>& outlier_queue, AccessCounts& acc) {
  // The register block drains first, then the group's deferred outliers in
  // arrival order, maximizing back-to-back address matches in the lanes.
  if (group_has_inliers) {
    int x0 = int(p_ref % st_.ws);
    int y0 = int(p_ref / st_.ws);
    auto addrs = cfg_.banked ? stencil_addresses(x0, y0, st_.ws)
                             : stencil_flat(x0, y0, st_.ws);
    for (int t = 0; t < 4; ++t) {
      for (int c = 0; c < 4; ++c) {
        feed_lane(LaneUpdate{c, addrs[std::size_t(t)], regs[std::size_t(t * 4 + c)]}, acc);
      }
    }
    trace_.inlier_emissions += 1;
  }
  for (const LaneUpdate& u : outlier_queue) feed_lane(u, acc);
  outlier_queue.clear();
  regs.fill(0.0);
  group_has_inliers = false;
}

StreamStats EngineStage::iterate(const Vec3& omega) {
  if (!entered_) throw ConfigError("engine stage iterated before enter()");
  AccessCounts& acc = trace_.acc;
  if (trace_.iterations > 0) mem_.clear_touched(acc);
  trace_.iterations += 1;
  std::int64_t voted_before = trace_.voted;

  bool use_sort = st_.s < 1.0 || cfg_.sort_full_res;
  std::int64_t fed = 0;
  if (use_sort) {
    std::array<double, 16> regs{};
    bool group_has_inliers = false;
    std::vector<LaneUpdate> outq;
    for (std::int32_t p : tables_.active) {
      acc.reads[kMemSort] += 3;  // active id plus the group's two offsets
      std::int64_t b = tables_.offset[std::size_t(p)];
      std::int64_t e = tables_.offset[std::size_t(p) + 1];
      for (std::int64_t slot = b; slot < e; ++slot) {
        acc.reads[kMemSort] += 1;
        acc.reads[kMemEvents] += 1;
        fed += 1;
        const Event& ev = win_.events[std::size_t(tables_.perm[std::size_t(slot)])];
        WarpedEvent we = warp_event(ev, win_.t_ref, omega, st_, cam_);
        if (!we.valid()) {
          trace_.dropped += 1;
          continue;
        }
        vote_event(we, p, slot + 1 == e, regs, group_has_inliers, outq, acc);
      }
      emit_group(p, regs, group_has_inliers, outq, acc);
    }
  } else {
    std::array<double, 16> regs{};
    bool group_has_inliers = false;
    std::vector<LaneUpdate> outq;
    for (const Event& ev : win_.events) {
      acc.reads[kMemEvents] += 1;
      fed += 1;
      WarpedEvent we = warp_event(ev, win_.t_ref, omega, st_, cam_);
      if (!we.valid()) {
        trace_.dropped += 1;
        continue;
      }
      vote_event(we, -1, false, regs, group_has_inliers, outq, acc);
    }
  }
  for (auto& lane : lanes_) lane.flush(mem_, acc, &trace_.commits);

  std::int64_t voted_iter = trace_.voted - voted_before;
  std::int64_t blur_cycles = (st_.pixels() + 1) / 2;  // two pixels per clock
  std::int64_t stall = cfg_.banked ? 0 : 15 * voted_iter;  // serialized taps
  trace_.cycles += fed + stall + blur_cycles;

  IweChannels raw = mem_.read_out(acc);
  IweChannels blur = smooth(raw, kernel_);
  count_line_buffer(st_, kernel_, acc);
  return stream_stats(blur);
}

Objective EngineStage::objective(const Vec3& omega) {
  return objective_from_stats(iterate(omega));
}

EnergyModel EnergyModel::defaults() {
  EnergyModel m;
  m.groups[kMemIwe] = {11.26, 8.07, 12.39, 675.0};
  m.groups[kMemEvents] = {22.66, 21.44, 3.08, 156.0};
  m.groups[kMemSort] = {9.71, 8.19, 10.19, 520.0};
  m.groups[kMemLine] = {9.18, 7.83, 1.43, 68.0};
  return m;
}

EnergyModel load_energy_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open energy table: " + path);
  EnergyModel m = EnergyModel::defaults();
  std::array<bool, kMemGroupCount> seen{};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string name;
    if (!(ls >> name)) continue;
    int g = -1;
    for (int i = 0; i < kMemGroupCount; ++i) {
      if (name == kGroupNames[i]) g = i;
    }
    if (g < 0) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown memory group '" +
                        name + "'");
    }
    EnergyGroupSpec s;
    if (!(ls >> s.e_read_pj >> s.e_write_pj >> s.p_lkg_mw >> s.size_kb)) {
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected four numbers after the group name");
    }
    m.groups[std::size_t(g)] = s;
    seen[std::size_t(g)] = true;
  }
  for (int g = 0; g < kMemGroupCount; ++g) {
    if (!seen[std::size_t(g)]) {
      throw ConfigError(path + ": missing entry for group '" + kGroupNames[g] + "'");
    }
  }
  return m;
}

void save_energy_model(const std::string& path, const EnergyModel& m) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write energy table: " + path);
  out << "# group  e_read_pj  e_write_pj  p_lkg_mw  size_kb\n";
  for (int g = 0; g < kMemGroupCount; ++g) {
    const EnergyGroupSpec& s = m.groups[std::size_t(g)];
    out << kGroupNames[g] << ' ' << fmt_double(s.e_read_pj) << ' '
        << fmt_double(s.e_write_pj) << ' ' << fmt_double(s.p_lkg_mw) << ' '
        << fmt_double(s.size_kb) << '\n';
  }
}

EnergyBreakdown energy_estimate(const AccessCounts& acc, std::int64_t cycles,
                                const EnergyModel& m) {
  if (m.clock_hz <= 0) throw ConfigError("energy model clock must be positive");
  EnergyBreakdown e;
  e.seconds = double(cycles) / m.clock_hz;
  for (int g = 0; g < kMemGroupCount; ++g) {
    const EnergyGroupSpec& s = m.groups[std::size_t(g)];
    e.dynamic_pj[std::size_t(g)] =
        double(acc.reads[std::size_t(g)]) * s.e_read_pj +
        double(acc.writes[std::size_t(g)]) * s.e_write_pj;
    e.dynamic_total_pj += e.dynamic_pj[std::size_t(g)];
    e.leakage_pj += s.p_lkg_mw * e.seconds * 1e9;  // mW * s = 1e9 pJ
  }
  e.logic_pj = m.logic_mw * e.seconds * 1e9;
  e.total_pj = e.dynamic_total_pj + e.leakage_pj + e.logic_pj;
  return e;
}

}  // namespace evrot
