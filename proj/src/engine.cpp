#include "taoi/engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <queue>

#include <spdlog/spdlog.h>

#include "taoi/errors.hpp"

namespace taoi {

std::string_view to_string(ChannelMode m) noexcept {
  return m == ChannelMode::Realistic ? "realistic" : "idealized_slotted";
}

std::string_view to_string(QueuePolicy q) noexcept {
  return q == QueuePolicy::Replace ? "replace" : "fcfs";
}

std::string_view to_string(TaoiGate g) noexcept {
  return g == TaoiGate::Sender ? "sender" : "receiver";
}

void SimConfig::validate() const {
  if (vehicle_count < 2) throw ConfigError("vehicle_count", "must be >= 2");
  if (!(duration >= 0)) throw ConfigError("duration", "must be >= 0");
  if (!(mobility_tick > 0)) throw ConfigError("mobility_tick", "must be > 0");
  if (!(eviction_timeout > 0)) throw ConfigError("eviction_timeout", "must be > 0");
  if (!(generation_jitter >= 0) || !(generation_jitter < 2 * controller.delta_min)) {
    throw ConfigError("generation_jitter", "must be in [0, 2 * delta_min)");
  }
  if (bsm_size_bytes <= 0) throw ConfigError("bsm_size_bytes", "must be > 0");
  if (!(pdr_bin_width > 0)) throw ConfigError("pdr_bin_width", "must be > 0");
  if (!(interval_bin_ms > 0)) throw ConfigError("interval_bin_ms", "must be > 0");
  if (!(fading_margin_db >= 0)) throw ConfigError("fading_margin_db", "must be >= 0");
  if (!(slot_length > 0)) throw ConfigError("slot_length", "must be > 0");
  if (slot_capacity < 1) throw ConfigError("slot_capacity", "must be >= 1");
  auto wrap = [](const char* key, auto&& fn) {
    try {
      fn();
    } catch (const DomainError& e) {
      throw ConfigError(key, e.what());
    }
  };
  wrap("road", [&] { road.validate(); });
  wrap("channel", [&] { channel.validate(); });
  wrap("krauss", [&] { krauss.validate(); });
  wrap("safety", [&] { safety.validate(); });
  wrap("controller", [&] { controller.validate(); });
  if (forced_schedule) {
    for (const auto& slot : *forced_schedule) {
      if (static_cast<int>(slot.size()) > slot_capacity) {
        throw ConfigError("forced_schedule", "slot capacity exceeded");
      }
      for (int v : slot) {
        if (v < 0 || v >= vehicle_count) throw ConfigError("forced_schedule", "unknown vehicle index");
      }
    }
  }
}

TrajectoryTable sample_motions(const std::vector<Motion>& motions, double duration, double tick) {
  std::vector<TrajectoryTable::Track> tracks;
  const auto steps = static_cast<long>(std::llround(duration / tick));
  for (std::size_t i = 0; i < motions.size(); ++i) {
    TrajectoryTable::Track tr{static_cast<VehicleId>(i), {}};
    for (long k = 0; k <= steps; ++k) {
      const double t = static_cast<double>(k) * tick;
      const Point p = motions[i].position(t);
      const Point v = motions[i].velocity(t);
      const double speed = std::hypot(v.x, v.y);
      const double heading = speed > 0 ? std::atan2(v.y, v.x) : 0.0;
      tr.samples.push_back({static_cast<VehicleId>(i), p.x, p.y, speed, heading, 0, t});
    }
    tracks.push_back(std::move(tr));
  }
  return TrajectoryTable(std::move(tracks), tick);
}

TrajectoryTable build_mobility(const SimConfig& config, MobilityStats* stats) {
  if (config.trace) {
    TrajectoryTable t = load_trace(*config.trace);
    if (static_cast<int>(t.vehicle_count()) != config.vehicle_count) {
      throw ConfigError("vehicle_count", "trace has " + std::to_string(t.vehicle_count()) +
                                             " vehicles, config expects " +
                                             std::to_string(config.vehicle_count));
    }
    return t;
  }
  Rng init = Rng::stream(config.seed, "init");
  Rng mob = Rng::stream(config.seed, "mobility");
  return generate_krauss_trajectories(config.vehicle_count, config.road, config.krauss,
                                      config.duration, config.mobility_tick, init, mob, stats);
}

namespace {

using Nanos = std::int64_t;

Nanos to_ns(double s) { return static_cast<Nanos>(std::llround(s * 1e9)); }
double to_s(Nanos ns) { return static_cast<double>(ns) * 1e-9; }

double distance(const VehicleState& a, double x, double y) { return std::hypot(a.x - x, a.y - y); }

enum class Kind : int { TxEnd = 0, MobilityTick, Measurement, Generation, Access, End };

struct Event {
  Nanos t;
  Kind kind;
  int vehicle;
  std::uint64_t seq;
  std::uint64_t payload;

  bool operator>(const Event& o) const {
    if (t != o.t) return t > o.t;
    if (kind != o.kind) return kind > o.kind;
    if (vehicle != o.vehicle) return vehicle > o.vehicle;
    return seq > o.seq;
  }
};

struct Frame {
  TransmissionEvent tx;
  Nanos start_ns;
  Nanos end_ns;
  std::vector<int> sensed;                 // stations whose busy count this frame raised
  std::vector<VehicleState> candidates;    // receivers drawn for fading, by index order
  std::vector<int> candidate_index;
  bool done = false;
};

struct Node {
  const TrajectoryTable::Track* track = nullptr;
  Nanos start_ns = 0;
  Nanos end_ns = 0;
  ControllerState ctrl;
  CsmaAccess mac;
  std::deque<Bsm> queue;
  bool transmitting = false;
  int busy = 0;
  std::uint64_t token = 0;
  Nanos attempt_ns = -1;
  double delta_sum_ms = 0.0;
  double max_self_te = 0.0;
  std::uint64_t mis = 0;
  std::uint64_t risky_mis = 0;
  std::uint64_t congested_mis = 0;
};

void fill_pdr(RunReport& report, const PdrCounters& pdr) {
  const auto bins = pdr.bins();
  for (std::size_t i = 0; i < bins.size(); ++i) {
    PdrBin b;
    b.lo_m = static_cast<double>(i) * pdr.bin_width();
    b.hi_m = b.lo_m + pdr.bin_width();
    b.successes = bins[i].successes;
    b.opportunities = bins[i].opportunities;
    b.pdr = pdr.bin_pdr(i);
    report.pdr_bins.push_back(b);
  }
  report.overall_pdr = pdr.overall_pdr();
}

void fill_intervals(RunReport& report, const std::vector<double>& deltas_ms) {
  const double w = report.config.interval_bin_ms;
  double sum = 0.0;
  for (double d : deltas_ms) {
    const auto idx = static_cast<std::size_t>(std::floor(d / w + 1e-9));
    if (idx >= report.interval_histogram.size()) {
      const std::size_t old = report.interval_histogram.size();
      report.interval_histogram.resize(idx + 1);
      for (std::size_t i = old; i <= idx; ++i) {
        report.interval_histogram[i].lo_ms = static_cast<double>(i) * w;
        report.interval_histogram[i].hi_ms = static_cast<double>(i + 1) * w;
      }
    }
    ++report.interval_histogram[idx].count;
    sum += d;
  }
  report.mean_interval_ms =
      deltas_ms.empty() ? 0.0 : sum / static_cast<double>(deltas_ms.size());
}

ControllerParams controller_params(const SimConfig& cfg) {
  ControllerParams p = cfg.controller;
  p.te_threshold = cfg.safety.te_threshold;
  return p;
}

// --- realistic channel -------------------------------------------------------

class Simulator {
public:
  Simulator(const SimConfig& cfg, const TrajectoryTable& table, RunReport& report)
      : cfg_(cfg),
        table_(table),
        report_(report),
        n_(static_cast<int>(table.vehicle_count())),
        ledger_(n_, cfg.taoi_gate, cfg.eviction_timeout),
        pdr_(cfg.pdr_bin_width),
        fading_(Rng::stream(cfg.seed, "fading")),
        backoff_(Rng::stream(cfg.seed, "backoff")),
        phase_(Rng::stream(cfg.seed, "phase")),
        jitter_(Rng::stream(cfg.seed, "jitter")),
        nominal_(nominal_range(cfg.channel)),
        sensing_(sensing_range(cfg.channel)),
        candidate_range_(range_for_threshold(cfg.channel.rx_sensitivity_dbm - cfg.fading_margin_db,
                                             cfg.channel)),
        airtime_(to_ns(tx_duration(cfg.bsm_size_bytes, cfg.channel.data_rate_mbps, cfg.channel))),
        te_sum_(static_cast<std::size_t>(n_) * n_, 0.0),
        te_count_(static_cast<std::size_t>(n_) * n_, 0),
        risk_count_(static_cast<std::size_t>(n_) * n_, 0) {
    nodes_.resize(n_);
    t0_ = to_ns(table.start_time());
    t_end_ = t0_ + to_ns(cfg.duration);
    for (int i = 0; i < n_; ++i) {
      Node& nd = nodes_[i];
      nd.track = &table.tracks()[i];
      nd.start_ns = to_ns(nd.track->samples.front().t);
      nd.end_ns = to_ns(nd.track->samples.back().t);
      nd.ctrl = ControllerState::initial(controller_params(cfg));
      ledger_.on_receiver_flag(i, nd.ctrl.flag, to_s(t0_));
      report_.vehicle_ids.push_back(nd.track->id);
    }
  }

  void run() {
    for (int i = 0; i < n_; ++i) {
      Node& nd = nodes_[i];
      const Nanos first = nd.start_ns + to_ns(phase_.uniform() * nd.ctrl.delta);
      push(first, Kind::Generation, i);
      push(nd.start_ns + to_ns(cfg_.controller.t_mi), Kind::Measurement, i);
    }
    const Nanos tick = to_ns(cfg_.mobility_tick);
    for (Nanos t = t0_; t < t_end_; t += tick) push(t, Kind::MobilityTick, -1);
    push(t_end_, Kind::End, -1);

    while (!events_.empty()) {
      const Event e = events_.top();
      events_.pop();
      if (e.kind == Kind::End) break;
      if (e.t >= t_end_) continue;
      now_ = e.t;
      switch (e.kind) {
        case Kind::TxEnd: on_tx_end(e.payload); break;
        case Kind::MobilityTick: on_tick(); break;
        case Kind::Measurement: on_measurement(e.vehicle); break;
        case Kind::Generation: on_generation(e.vehicle); break;
        case Kind::Access: on_access(e.vehicle, e.payload); break;
        case Kind::End: break;
      }
    }
    finish();
  }

private:
  void push(Nanos t, Kind k, int v, std::uint64_t payload = 0) {
    events_.push(Event{t, k, v, seq_++, payload});
  }

  bool active(int v, Nanos t) const { return t >= nodes_[v].start_ns && t <= nodes_[v].end_ns; }

  VehicleState state(int v, Nanos t) const {
    return position_at(table_, nodes_[v].track->id, to_s(t));
  }

  bool medium_busy(int v) const { return nodes_[v].busy > 0 || nodes_[v].transmitting; }

  std::size_t idx(int receiver, int sender) const {
    return static_cast<std::size_t>(receiver) * static_cast<std::size_t>(n_) +
           static_cast<std::size_t>(sender);
  }

  void schedule_access(int v) {
    Node& nd = nodes_[v];
    ++nd.token;
    nd.attempt_ns = to_ns(nd.mac.attempt_time(cfg_.channel));
    push(nd.attempt_ns, Kind::Access, v, nd.token);
  }

  void request_access(int v) {
    Node& nd = nodes_[v];
    const int draw = static_cast<int>(backoff_.uniform_int(static_cast<std::uint64_t>(cfg_.channel.cw)));
    nd.mac.request(to_s(now_), medium_busy(v), draw);
    if (nd.mac.phase() == CsmaAccess::Phase::Counting) schedule_access(v);
  }

  void on_generation(int v) {
    Node& nd = nodes_[v];
    if (!active(v, now_)) return;
    const Bsm bsm = Bsm::from_state(state(v, now_), nd.ctrl.flag, nd.ctrl.delta, cfg_.bsm_size_bytes);
    ++report_.frames.generated;
    if (!nd.queue.empty() && cfg_.queue == QueuePolicy::Replace) {
      nd.queue.front() = bsm;
      ++report_.frames.replaced;
    } else {
      nd.queue.push_back(bsm);
      if (nd.queue.size() == 1 && !nd.mac.has_frame()) request_access(v);
    }
    double gap = nd.ctrl.delta;
    if (cfg_.generation_jitter > 0) gap += jitter_.uniform(-0.5, 0.5) * cfg_.generation_jitter;
    push(now_ + to_ns(gap), Kind::Generation, v);
  }

  void on_access(int v, std::uint64_t token) {
    Node& nd = nodes_[v];
    if (token != nd.token || nd.mac.phase() != CsmaAccess::Phase::Counting || nd.queue.empty()) return;
    if (!active(v, now_)) return;
    nd.mac.on_transmit();
    nd.attempt_ns = -1;
    nd.transmitting = true;

    auto frame = std::make_unique<Frame>();
    const VehicleState me = state(v, now_);
    frame->start_ns = now_;
    frame->end_ns = now_ + airtime_;
    frame->tx.sender = v;
    frame->tx.start = to_s(now_);
    frame->tx.duration = to_s(airtime_);
    frame->tx.x = me.x;
    frame->tx.y = me.y;
    frame->tx.bsm = nd.queue.front();
    nd.queue.pop_front();

    for (int w = 0; w < n_; ++w) {
      if (w == v || !active(w, now_)) continue;
      VehicleState s = state(w, now_);
      const double d = distance(s, me.x, me.y);
      if (d <= candidate_range_) {
        s.id = w;
        frame->candidates.push_back(s);
      }
      if (d > sensing_) continue;
      frame->sensed.push_back(w);
      Node& other = nodes_[w];
      if (other.busy++ == 0 && !other.transmitting) {
        // A station due at this very instant transmits anyway and collides.
        if (other.mac.phase() == CsmaAccess::Phase::Counting && other.attempt_ns != now_) {
          other.mac.on_busy(to_s(now_), cfg_.channel);
          if (other.mac.phase() == CsmaAccess::Phase::Deferring) ++other.token;
        }
      }
    }
    push(frame->end_ns, Kind::TxEnd, v, frames_.size());
    active_frames_.push_back(frames_.size());
    frames_.push_back(std::move(frame));
    ++in_flight_;

    if (!nd.queue.empty()) request_access(v);
  }

  void on_tx_end(std::uint64_t id) {
    Frame& f = *frames_[id];
    f.done = true;
    --in_flight_;
    ++report_.frames.transmitted;
    const int v = f.tx.sender;
    Node& nd = nodes_[v];
    nd.transmitting = false;
    auto release = [&](int w) {
      Node& o = nodes_[w];
      if (!medium_busy(w) && o.mac.phase() == CsmaAccess::Phase::Deferring) {
        o.mac.on_idle(to_s(now_));
        schedule_access(w);
      }
    };
    for (int w : f.sensed) {
      --nodes_[w].busy;
      release(w);
    }
    release(v);

    // Frames that overlapped this one.
    std::vector<TransmissionEvent> concurrent;
    for (std::size_t k : active_frames_) {
      const Frame& o = *frames_[k];
      if (k != id && o.start_ns < f.end_ns && f.start_ns < o.end_ns) concurrent.push_back(o.tx);
    }
    for (const auto& k : recent_frames_) {
      const Frame& o = *frames_[k];
      if (k != id && o.start_ns < f.end_ns && f.start_ns < o.end_ns) concurrent.push_back(o.tx);
    }
    active_frames_.erase(std::find(active_frames_.begin(), active_frames_.end(), id));
    recent_frames_.push_back(id);
    while (!recent_frames_.empty() && frames_[recent_frames_.front()]->end_ns + 2 * airtime_ < now_) {
      frames_[recent_frames_.front()].reset();
      recent_frames_.pop_front();
    }

    const auto ok = delivery_outcome(f.tx, f.candidates, concurrent, fading_, cfg_.channel);
    const double t = to_s(now_);
    std::vector<VehicleState> in_range;
    std::vector<VehicleId> in_range_ok;
    for (const auto& c : f.candidates) {
      if (distance(c, f.tx.x, f.tx.y) <= nominal_) in_range.push_back(c);
    }
    for (VehicleId w : ok) {
      ledger_.on_reception(w, f.tx.bsm, t);
      ++report_.frames.receptions;
      const auto it = std::find_if(in_range.begin(), in_range.end(),
                                   [w](const VehicleState& s) { return s.id == w; });
      if (it != in_range.end()) {
        in_range_ok.push_back(w);
      } else {
        ++report_.frames.out_of_range_receptions;
      }
    }
    VehicleState sender_state{v, f.tx.x, f.tx.y, 0.0, 0.0, 0, f.tx.start};
    pdr_.record(sender_state, in_range, in_range_ok);
    ++tx_per_vehicle_[v];
    f.candidates.clear();
    f.candidates.shrink_to_fit();
  }

  void on_tick() {
    const double t = to_s(now_);
    std::vector<VehicleState> s(n_);
    std::vector<char> act(n_, 0);
    for (int v = 0; v < n_; ++v) {
      if (!active(v, now_)) continue;
      act[v] = 1;
      s[v] = state(v, now_);
    }
    for (int r = 0; r < n_; ++r) {
      if (!act[r]) continue;
      const double thr = ttc_threshold(s[r].speed, cfg_.safety);
      for (int u = 0; u < n_; ++u) {
        if (u == r || !act[u]) continue;
        const NeighborRecord* rec = ledger_.record(r, u);
        if (!rec->has_bsm() || t - rec->last_seen() >= cfg_.eviction_timeout) continue;
        if (distance(s[r], s[u].x, s[u].y) > nominal_) continue;
        const double te = tracking_error(s[u], estimate_position(rec->last_bsm(), t));
        const std::size_t k = idx(r, u);
        te_sum_[k] += te;
        ++te_count_[k];
        const double dttc = delta_ttc(te, relative_speed(s[u], s[r]), cfg_.safety);
        if (collision_risk_indicator(dttc, thr)) {
          ++risk_count_[k];
          ++report_.collision_risk_count;
        }
      }
    }
  }

  void on_measurement(int v) {
    Node& nd = nodes_[v];
    const Nanos t_mi = to_ns(cfg_.controller.t_mi);
    if (!active(v, now_) || now_ - t_mi < nd.start_ns) return;
    const double t = to_s(now_);
    const VehicleState cur = state(v, now_);
    VehicleState prev = state(v, now_ - t_mi);
    prev.t = t - cfg_.controller.t_mi;
    const double self_te = self_tracking_error(cur, prev, cfg_.controller.t_mi);
    const bool flag = assess_self_risk(self_te, nd.ctrl);
    ledger_.on_receiver_flag(v, flag, t);
    if (cfg_.range_eviction) ledger_.evict_out_of_range(v, {cur.x, cur.y}, t, nominal_);
    const LocalAges local = ledger_.close_window(v, t, cfg_.controller.t_mi);
    MiInputs in{local.aoi_v, local.taoi_v, local.interval_avg, local.risky_neighbor_count};
    const RateDecision d = rate_update(cfg_.protocol, nd.ctrl, in);

    nd.delta_sum_ms += d.delta * 1e3;
    nd.max_self_te = std::max(nd.max_self_te, self_te);
    ++nd.mis;
    if (flag) ++nd.risky_mis;
    if (d.congested) ++nd.congested_mis;
    MiRecord rec;
    rec.t = t;
    rec.vehicle = nd.track->id;
    rec.delta_ms = d.delta * 1e3;
    rec.flag = flag;
    rec.aoi_v = local.aoi_v;
    rec.taoi_v = local.taoi_v;
    rec.self_te = self_te;
    rec.action = d.action;
    rec.congested = d.congested;
    rec.neighbors = local.neighbor_count;
    rec.risky_neighbors = local.risky_neighbor_count;
    deltas_ms_.push_back(rec.delta_ms);
    if (cfg_.record_timeseries) report_.timeseries.push_back(rec);
    spdlog::debug("t={:.3f} v={} self_te={:.3f} flag={} action={} delta={:.1f}ms", t, nd.track->id,
                  self_te, flag ? 1 : 0, to_string(d.action), d.delta * 1e3);
    push(now_ + t_mi, Kind::Measurement, v);
  }

  void finish() {
    const AoiSnapshot snap = ledger_.finalize(to_s(t0_), to_s(t_end_));
    report_.t_start = to_s(t0_);
    report_.t_end = to_s(t_end_);
    report_.system_aoi = snap.system_aoi;
    report_.system_taoi = snap.system_taoi;

    std::uint64_t queued = 0;
    for (const auto& nd : nodes_) queued += nd.queue.size();
    report_.frames.queued = queued;
    report_.frames.in_flight = in_flight_;
    const auto& fr = report_.frames;
    if (fr.generated != fr.transmitted + fr.replaced + fr.queued + fr.in_flight) {
      throw ConsistencyError("frame conservation violated");
    }

    fill_pdr(report_, pdr_);
    fill_intervals(report_, deltas_ms_);

    for (int r = 0; r < n_; ++r) {
      for (int u = 0; u < n_; ++u) {
        const std::size_t k = idx(r, u);
        if (te_count_[k] == 0) continue;
        report_.pair_te.push_back({nodes_[r].track->id, nodes_[u].track->id,
                                   te_sum_[k] / static_cast<double>(te_count_[k]), te_count_[k],
                                   risk_count_[k]});
      }
    }
    for (int v = 0; v < n_; ++v) {
      const Node& nd = nodes_[v];
      VehicleSummary s;
      s.id = nd.track->id;
      s.mean_delta_ms = nd.mis ? nd.delta_sum_ms / static_cast<double>(nd.mis) : nd.ctrl.delta * 1e3;
      s.max_self_te = nd.max_self_te;
      s.mis = nd.mis;
      s.risky_mis = nd.risky_mis;
      s.congested_mis = nd.congested_mis;
      const auto it = tx_per_vehicle_.find(v);
      s.transmissions = it == tx_per_vehicle_.end() ? 0 : it->second;
      s.aoi = snap.vehicles[v].aoi;
      s.taoi = snap.vehicles[v].taoi;
      s.no_risky_neighbors = snap.vehicles[v].no_risky_neighbors;
      report_.vehicles.push_back(s);
    }
  }

  const SimConfig& cfg_;
  const TrajectoryTable& table_;
  RunReport& report_;
  int n_;
  AoiLedger ledger_;
  PdrCounters pdr_;
  Rng fading_;
  Rng backoff_;
  Rng phase_;
  Rng jitter_;
  double nominal_;
  double sensing_;
  double candidate_range_;
  Nanos airtime_;
  Nanos t0_ = 0;
  Nanos t_end_ = 0;
  Nanos now_ = 0;
  std::vector<Node> nodes_;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
  std::uint64_t seq_ = 0;
  std::vector<std::unique_ptr<Frame>> frames_;
  std::vector<std::size_t> active_frames_;
  std::deque<std::size_t> recent_frames_;
  std::uint64_t in_flight_ = 0;
  std::map<int, std::uint64_t> tx_per_vehicle_;
  std::vector<double> te_sum_;
  std::vector<std::uint64_t> te_count_;
  std::vector<std::uint64_t> risk_count_;
  std::vector<double> deltas_ms_;
};

// --- idealized slotted channel -----------------------------------------------

void run_slotted(const SimConfig& cfg, const TrajectoryTable& table, RunReport& report) {
  const int n = static_cast<int>(table.vehicle_count());
  const double L = cfg.slot_length;
  const double t0 = table.start_time();
  const int k_slots = static_cast<int>(std::floor(cfg.duration / L + 1e-9));
  const auto& tracks = table.tracks();
  for (const auto& tr : tracks) report.vehicle_ids.push_back(tr.id);
  report.t_start = t0;
  report.t_end = t0 + cfg.duration;

  SlotTables tab;
  tab.aoi.assign(n, std::vector<std::vector<std::int64_t>>(n, std::vector<std::int64_t>(k_slots, 0)));
  tab.taoi = tab.aoi;
  tab.estimate.assign(n, std::vector<std::vector<Point>>(n, std::vector<Point>(k_slots)));
  tab.te.assign(n, std::vector<std::vector<double>>(n, std::vector<double>(k_slots, 0.0)));
  tab.position.assign(n, std::vector<Point>(k_slots));
  tab.flag.assign(n, std::vector<bool>(k_slots, false));

  std::vector<std::optional<Bsm>> last(n);
  std::vector<std::vector<std::int64_t>> age(n, std::vector<std::int64_t>(n, 0));
  std::vector<std::vector<std::int64_t>> win_aoi(n, std::vector<std::int64_t>(n, 0));
  std::vector<std::vector<std::int64_t>> win_taoi(n, std::vector<std::int64_t>(n, 0));
  std::vector<ControllerState> ctrl(n, ControllerState::initial(controller_params(cfg)));
  std::vector<double> next_gen(n, t0);
  std::vector<double> delta_sum(n, 0.0);
  std::vector<std::uint64_t> mis(n, 0), risky_mis(n, 0), tx_count(n, 0);
  std::vector<double> max_self_te(n, 0.0);
  std::vector<std::uint64_t> te_n(static_cast<std::size_t>(n) * n, 0), risk_n(te_n);
  std::vector<double> te_s(static_cast<std::size_t>(n) * n, 0.0);
  PdrCounters pdr(cfg.pdr_bin_width);
  std::int64_t aoi_sum = 0;
  std::int64_t taoi_sum = 0;
  const int mi_slots = std::max(1, static_cast<int>(std::llround(cfg.controller.t_mi / L)));
  int win_len = 0;
  std::vector<double> deltas_ms;

  for (int k = 1; k <= k_slots; ++k) {
    const double t = t0 + k * L;
    std::vector<VehicleState> s(n);
    for (int v = 0; v < n; ++v) {
      s[v] = position_at(table, tracks[v].id, t);
      VehicleState prev = position_at(table, tracks[v].id, t - L);
      prev.t = t - L;
      const double ste = self_tracking_error(s[v], prev, L);
      tab.flag[v][k - 1] = ste >= cfg.safety.te_threshold;
      tab.position[v][k - 1] = {s[v].x, s[v].y};
    }
    // Estimates use BSMs received before this slot.
    for (int u = 0; u < n; ++u) {
      for (int r = 0; r < n; ++r) {
        if (r == u) continue;
        const Point e = last[u] ? estimate_position(*last[u], t) : Point{0.0, 0.0};
        const double te = tracking_error(s[u], e);
        tab.estimate[u][r][k - 1] = e;
        tab.te[u][r][k - 1] = te;
        tab.sum_te += te;
        if (!last[u]) continue;
        const std::size_t i = static_cast<std::size_t>(r) * n + u;
        te_s[i] += te;
        ++te_n[i];
        const double dttc = delta_ttc(te, relative_speed(s[u], s[r]), cfg.safety);
        if (collision_risk_indicator(dttc, ttc_threshold(s[r].speed, cfg.safety))) {
          ++risk_n[i];
          ++report.collision_risk_count;
        }
      }
    }

    std::vector<int> tx;
    if (cfg.forced_schedule) {
      if (k - 1 < static_cast<int>(cfg.forced_schedule->size())) tx = (*cfg.forced_schedule)[k - 1];
    } else {
      std::vector<int> due;
      for (int v = 0; v < n; ++v) {
        if (t >= next_gen[v] - 1e-9) due.push_back(v);
      }
      std::stable_sort(due.begin(), due.end(), [&](int a, int b) { return next_gen[a] < next_gen[b]; });
      if (static_cast<int>(due.size()) > cfg.slot_capacity) due.resize(cfg.slot_capacity);
      tx = due;
      std::sort(tx.begin(), tx.end());
    }
    if (static_cast<int>(tx.size()) > cfg.slot_capacity) {
      throw DomainError("slot " + std::to_string(k) + ": capacity exceeded");
    }
    report.slotted_schedule.push_back(tx);

    for (int u = 0; u < n; ++u) {
      const bool sends = std::find(tx.begin(), tx.end(), u) != tx.end();
      for (int r = 0; r < n; ++r) {
        if (r == u) continue;
        age[u][r] = sends ? 0 : age[u][r] + 1;
        tab.aoi[u][r][k - 1] = age[u][r];
        tab.taoi[u][r][k - 1] = tab.flag[u][k - 1] ? age[u][r] : 0;
        aoi_sum += age[u][r];
        taoi_sum += tab.taoi[u][r][k - 1];
        win_aoi[u][r] += age[u][r];
        win_taoi[u][r] += tab.taoi[u][r][k - 1];
      }
    }
    for (int u : tx) {
      const Bsm bsm = Bsm::from_state(s[u], ctrl[u].flag, ctrl[u].delta, cfg.bsm_size_bytes);
      last[u] = bsm;
      next_gen[u] = t + ctrl[u].delta;
      ++tx_count[u];
      ++report.frames.generated;
      ++report.frames.transmitted;
      report.frames.receptions += static_cast<std::uint64_t>(n - 1);
      std::vector<VehicleState> others;
      std::vector<VehicleId> ids;
      for (int r = 0; r < n; ++r) {
        if (r == u) continue;
        VehicleState o = s[r];
        o.id = r;
        others.push_back(o);
        ids.push_back(r);
      }
      VehicleState me = s[u];
      me.id = u;
      pdr.record(me, others, ids);
    }
    ++win_len;

    if (k % mi_slots == 0) {
      for (int v = 0; v < n; ++v) {
        const double t_mi = mi_slots * L;
        VehicleState prev = position_at(table, tracks[v].id, t - t_mi);
        prev.t = t - t_mi;
        const double ste = self_tracking_error(s[v], prev, t_mi);
        const bool flag = assess_self_risk(ste, ctrl[v]);
        MiInputs in;
        double a = 0.0, ta = 0.0, iv = 0.0;
        int nb = 0, risky = 0;
        for (int u = 0; u < n; ++u) {
          if (u == v || !last[u]) continue;
          ++nb;
          a += static_cast<double>(win_aoi[u][v]) * L / win_len;
          iv += last[u]->interval;
          if (last[u]->risky) {
            ++risky;
            ta += static_cast<double>(win_taoi[u][v]) * L / win_len;
          }
        }
        if (nb > 0) {
          in.aoi_v = a / nb;
          in.interval_avg = iv / nb;
        }
        if (risky > 0) in.taoi_v = ta / risky;
        in.risky_neighbor_count = risky;
        const RateDecision d = cfg.forced_schedule ? fixed_rate(ctrl[v])
                                                   : rate_update(cfg.protocol, ctrl[v], in);
        delta_sum[v] += d.delta * 1e3;
        max_self_te[v] = std::max(max_self_te[v], ste);
        ++mis[v];
        if (flag) ++risky_mis[v];
        MiRecord rec;
        rec.t = t;
        rec.vehicle = tracks[v].id;
        rec.delta_ms = d.delta * 1e3;
        rec.flag = flag;
        rec.aoi_v = in.aoi_v;
        rec.taoi_v = in.taoi_v;
        rec.self_te = ste;
        rec.action = d.action;
        rec.congested = d.congested;
        rec.neighbors = nb;
        rec.risky_neighbors = risky;
        deltas_ms.push_back(rec.delta_ms);
        if (cfg.record_timeseries) report.timeseries.push_back(rec);
      }
      for (auto& row : win_aoi) std::fill(row.begin(), row.end(), 0);
      for (auto& row : win_taoi) std::fill(row.begin(), row.end(), 0);
      win_len = 0;
    }
  }

  if (k_slots > 0) {
    const std::int64_t norm = static_cast<std::int64_t>(k_slots) * n * (n - 1);
    tab.system_aoi = Rational(aoi_sum, norm);
    tab.system_taoi = Rational(taoi_sum, norm);
    report.system_aoi = tab.system_aoi.to_double() * L;
    report.system_taoi = tab.system_taoi.to_double() * L;
  }
  fill_pdr(report, pdr);
  fill_intervals(report, deltas_ms);
  for (int r = 0; r < n; ++r) {
    for (int u = 0; u < n; ++u) {
      const std::size_t i = static_cast<std::size_t>(r) * n + u;
      if (te_n[i] == 0) continue;
      report.pair_te.push_back({tracks[r].id, tracks[u].id, te_s[i] / static_cast<double>(te_n[i]),
                                te_n[i], risk_n[i]});
    }
  }
  for (int v = 0; v < n; ++v) {
    VehicleSummary vs;
    vs.id = tracks[v].id;
    vs.mean_delta_ms = mis[v] ? delta_sum[v] / static_cast<double>(mis[v]) : ctrl[v].delta * 1e3;
    vs.max_self_te = max_self_te[v];
    vs.mis = mis[v];
    vs.risky_mis = risky_mis[v];
    vs.transmissions = tx_count[v];
    if (k_slots > 0) {
      double a = 0.0, ta = 0.0;
      int risky = 0;
      for (int u = 0; u < n; ++u) {
        if (u == v) continue;
        a += tab.pair_aoi(u, v).to_double() * L;
        const bool any_risky = std::any_of(tab.flag[u].begin(), tab.flag[u].end(), [](bool b) { return b; });
        if (any_risky) {
          ++risky;
          const auto& row = tab.taoi[u][v];
          ta += static_cast<double>(std::accumulate(row.begin(), row.end(), std::int64_t{0})) * L / k_slots;
        }
      }
      vs.aoi = a / (n - 1);
      if (risky > 0) {
        vs.taoi = ta / risky;
        vs.no_risky_neighbors = false;
      }
    }
    report.vehicles.push_back(vs);
  }
  report.slotted = std::move(tab);
}

}  // namespace

RunReport run_simulation(const SimConfig& config, const TrajectoryTable* mobility) {
  config.validate();
  RunReport report;
  report.config = config;
  std::optional<TrajectoryTable> owned;
  if (mobility == nullptr) {
    owned = build_mobility(config, &report.mobility);
    mobility = &*owned;
  } else if (static_cast<int>(mobility->vehicle_count()) != config.vehicle_count) {
    throw ConfigError("vehicle_count", "mobility has " + std::to_string(mobility->vehicle_count()) +
                                           " vehicles, config expects " +
                                           std::to_string(config.vehicle_count));
  }
  if (config.duration <= 0) {
    for (const auto& tr : mobility->tracks()) report.vehicle_ids.push_back(tr.id);
    report.t_start = report.t_end = mobility->start_time();
    report.overall_pdr = std::numeric_limits<double>::quiet_NaN();
    return report;
  }
  if (config.channel_mode == ChannelMode::IdealizedSlotted) {
    run_slotted(config, *mobility, report);
  } else {
    Simulator sim(config, *mobility, report);
    sim.run();
  }
  return report;
}

}  // namespace taoi
