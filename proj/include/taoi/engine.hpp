#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "taoi/aoi.hpp"
#include "taoi/channel.hpp"
#include "taoi/metrics.hpp"
#include "taoi/mobility.hpp"
#include "taoi/oracle.hpp"
#include "taoi/rate_control.hpp"

namespace taoi {

enum class ChannelMode { Realistic, IdealizedSlotted };
enum class QueuePolicy { Replace, Fcfs };

std::string_view to_string(ChannelMode m) noexcept;
std::string_view to_string(QueuePolicy q) noexcept;
std::string_view to_string(TaoiGate g) noexcept;

struct SimConfig {
  int vehicle_count = 150;
  double duration = 100.0;  // s
  std::uint64_t seed = 1;
  Protocol protocol = Protocol::Taoi;
  ChannelMode channel_mode = ChannelMode::Realistic;
  RoadConfig road;
  ChannelConfig channel;
  KraussParams krauss;
  SafetyParams safety;
  ControllerParams controller;
  std::optional<std::filesystem::path> trace;  // empty: built-in Krauss traffic
  double mobility_tick = 0.1;                  // s
  QueuePolicy queue = QueuePolicy::Replace;
  // Width of a uniform perturbation added to each generation gap, centered on 0 (s).
  double generation_jitter = 0.0;
  TaoiGate taoi_gate = TaoiGate::Sender;
  double eviction_timeout = 5.0;  // s
  // Also drop neighbors whose extrapolated position is beyond the nominal range.
  bool range_eviction = true;
  int bsm_size_bytes = 1000;
  double pdr_bin_width = 25.0;    // m
  double interval_bin_ms = 10.0;
  // Extra margin below the sensitivity within which receivers still get a
  // fading draw (receptions beyond the nominal range).
  double fading_margin_db = 10.0;
  bool record_timeseries = true;

  // Idealized slotted channel.
  double slot_length = 1.0;  // s
  int slot_capacity = 1;
  std::optional<Assignment> forced_schedule;  // transmitters per slot, by vehicle index

  void validate() const;
};

/// Per-vehicle record of one measurement interval.
struct MiRecord {
  double t = 0.0;
  VehicleId vehicle = 0;
  double delta_ms = 0.0;  // interval chosen for the next MI
  bool flag = false;
  std::optional<double> aoi_v;
  double taoi_v = 0.0;
  double self_te = 0.0;
  Action action = Action::Same;
  bool congested = false;
  int neighbors = 0;
  int risky_neighbors = 0;
};

struct PairTe {
  VehicleId receiver = 0;
  VehicleId sender = 0;
  double mean_te = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t risk_instances = 0;
};

struct VehicleSummary {
  VehicleId id = 0;
  double mean_delta_ms = 0.0;
  double max_self_te = 0.0;
  std::uint64_t mis = 0;
  std::uint64_t risky_mis = 0;
  std::uint64_t congested_mis = 0;
  std::uint64_t transmissions = 0;
  std::optional<double> aoi;
  double taoi = 0.0;
  bool no_risky_neighbors = true;
};

struct HistogramBin {
  double lo_ms = 0.0;
  double hi_ms = 0.0;
  std::uint64_t count = 0;
};

struct PdrBin {
  double lo_m = 0.0;
  double hi_m = 0.0;
  std::uint64_t successes = 0;
  std::uint64_t opportunities = 0;
  double pdr = 0.0;  // NaN for an empty bin
};

struct FrameCounters {
  std::uint64_t generated = 0;
  std::uint64_t transmitted = 0;  // completed transmissions
  std::uint64_t replaced = 0;     // overwritten in the queue before access
  std::uint64_t queued = 0;       // waiting at the end of the run
  std::uint64_t in_flight = 0;    // on the air at the end of the run
  std::uint64_t receptions = 0;
  std::uint64_t out_of_range_receptions = 0;
};

struct RunReport {
  SimConfig config;
  std::vector<VehicleId> vehicle_ids;  // index -> trace id
  double t_start = 0.0;
  double t_end = 0.0;
  double system_aoi = 0.0;
  double system_taoi = 0.0;
  std::uint64_t collision_risk_count = 0;
  std::vector<PdrBin> pdr_bins;
  double overall_pdr = 0.0;  // NaN without opportunities
  std::vector<HistogramBin> interval_histogram;
  double mean_interval_ms = 0.0;
  std::vector<MiRecord> timeseries;
  std::vector<PairTe> pair_te;
  std::vector<VehicleSummary> vehicles;
  FrameCounters frames;
  MobilityStats mobility;
  std::optional<SlotTables> slotted;
  Assignment slotted_schedule;
};

/// Runs one simulation. `mobility`, when given, replaces both the built-in
/// traffic and `config.trace`.
RunReport run_simulation(const SimConfig& config, const TrajectoryTable* mobility = nullptr);

/// Ground truth for a run: the given trace or built-in Krauss traffic drawn
/// from the run's `init` and `mobility` streams.
TrajectoryTable build_mobility(const SimConfig& config, MobilityStats* stats = nullptr);

/// Trajectory table of polynomial motions sampled at integer multiples of `tick`.
TrajectoryTable sample_motions(const std::vector<Motion>& motions, double duration, double tick);

}  // namespace taoi
