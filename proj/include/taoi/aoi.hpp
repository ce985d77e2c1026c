#pragma once

#include <optional>
#include <span>
#include <vector>

#include "taoi/bsm.hpp"
#include "taoi/metrics.hpp"

namespace taoi {

/// Which riskiness flag gates TAoI_uv: the sender's piggybacked flag (default)
/// or the receiver's own flag.
enum class TaoiGate { Sender, Receiver };

/// What receiver v knows about sender u, plus the AoI/TAoI area accumulators.
///
/// AoI_uv(t) = t - gen_time(last BSM); between receptions it grows with unit
/// slope, so each segment contributes a trapezoid. The gated (TAoI) area uses
/// the gate value that held over the segment. A gate change only affects area
/// from the instant it is applied.
class NeighborRecord {
public:
  explicit NeighborRecord(VehicleId neighbor = 0) : neighbor_(neighbor) {}

  VehicleId neighbor() const noexcept { return neighbor_; }
  bool has_bsm() const noexcept { return has_bsm_; }
  bool live() const noexcept { return live_; }
  const Bsm& last_bsm() const;
  double last_reception_time() const noexcept { return last_reception_; }
  double last_seen() const noexcept { return last_seen_; }
  bool neighbor_risky() const noexcept { return has_bsm_ && last_bsm_.risky; }
  double neighbor_interval() const noexcept { return last_bsm_.interval; }
  bool gate() const noexcept { return gate_; }

  /// Close the sawtooth segment at `t` with the pre-reset age, then reset to
  /// t - bsm.gen_time. With sender gating the new flag applies from `t` on.
  void receive(const Bsm& bsm, double t, TaoiGate gating);
  /// Apply a receiver-side gate value from `t` on.
  void set_gate(bool gate, double t);
  /// Accumulate area up to `t` (no-op for a record without history).
  void advance(double t);
  /// Stop accumulating at `t`; the neighbor leaves the live set until the next reception.
  void evict(double t);

  double instantaneous_aoi(double t) const;
  double instantaneous_taoi(double t) const;

  double total_area() const noexcept { return area_; }
  double total_gated_area() const noexcept { return gated_area_; }
  double window_area() const noexcept { return window_area_; }
  double window_gated_area() const noexcept { return window_gated_area_; }
  bool risky_seen_in_window() const noexcept { return risky_in_window_; }
  bool risky_seen() const noexcept { return risky_ever_; }
  void reset_window();

private:
  VehicleId neighbor_;
  Bsm last_bsm_{};
  bool has_bsm_ = false;
  bool live_ = false;
  bool gate_ = false;
  double last_reception_ = 0.0;
  double last_seen_ = 0.0;
  double last_update_ = 0.0;
  double area_ = 0.0;
  double gated_area_ = 0.0;
  double window_area_ = 0.0;
  double window_gated_area_ = 0.0;
  bool risky_in_window_ = false;
  bool risky_ever_ = false;
};

/// One reception of a sender's BSM: (reception time, generation time).
struct ReceptionSample {
  double reception_time;
  double gen_time;
};

/// AoI at `t` from a reception history: age of the freshest BSM received
/// at or before t. Throws UndefinedValueError before the first reception.
double instantaneous_aoi(std::span<const ReceptionSample> receptions, double t);

/// Sawtooth area of AoI_uv over [t0, t1] divided by (t1 - t0). Time before the
/// first reception contributes nothing.
double average_pairwise_aoi(std::span<const ReceptionSample> receptions, double t0, double t1);

/// Mean of pairwise averages over the neighbor set. Throws if empty.
double vehicle_aoi(std::span<const double> pairwise);

/// Sum of pairwise averages normalized by N(N-1).
double system_aoi(std::span<const double> pairwise, int vehicle_count);

struct PairAverage {
  VehicleId receiver;
  VehicleId sender;
  double aoi;
  double taoi;
};

struct VehicleAverage {
  VehicleId vehicle;
  std::optional<double> aoi;  // empty: no neighbors
  double taoi = 0.0;
  bool no_risky_neighbors = true;
};

struct AoiSnapshot {
  double window_start = 0.0;
  double window_end = 0.0;
  std::vector<PairAverage> pairs;
  std::vector<VehicleAverage> vehicles;
  double system_aoi = 0.0;
  double system_taoi = 0.0;
};

/// Windowed view of one receiver's neighbor table, as consumed by rate control.
struct LocalAges {
  std::optional<double> aoi_v;        // mean over live neighbors
  double taoi_v = 0.0;                // mean over live risky neighbors (0 if none)
  int neighbor_count = 0;
  int risky_neighbor_count = 0;
  std::optional<double> interval_avg;  // mean piggybacked interval of live neighbors
};

/// AoI/TAoI accounting for every ordered (sender, receiver) pair of a run.
class AoiLedger {
public:
  AoiLedger(int vehicle_count, TaoiGate gating, double eviction_timeout);

  int vehicle_count() const noexcept { return n_; }
  TaoiGate gating() const noexcept { return gating_; }

  void on_reception(VehicleId receiver, const Bsm& bsm, double t);
  /// Receiver's own flag changed (used by receiver-side gating only).
  void on_receiver_flag(VehicleId receiver, bool risky, double t);
  /// Evict neighbors of `receiver` not heard for the eviction timeout.
  void evict_stale(VehicleId receiver, double t);
  /// Evict neighbors whose position extrapolated from their last BSM lies
  /// farther than `range` from `own` at `t`.
  void evict_out_of_range(VehicleId receiver, Point own, double t, double range);
  /// Close the window [last close, t] of `receiver` and return its local ages.
  LocalAges close_window(VehicleId receiver, double t, double window_length);
  /// Current live-neighbor view without closing the window.
  LocalAges peek(VehicleId receiver) const;

  const NeighborRecord* record(VehicleId receiver, VehicleId sender) const;
  NeighborRecord* record(VehicleId receiver, VehicleId sender);

  /// Whole-run aggregates over [t0, t1]. Advances all live records to t1.
  AoiSnapshot finalize(double t0, double t1);

private:
  std::size_t index(VehicleId receiver, VehicleId sender) const;

  int n_;
  TaoiGate gating_;
  double eviction_timeout_;
  std::vector<NeighborRecord> records_;  // n x n, row = receiver
  std::vector<bool> receiver_flag_;
};

}  // namespace taoi
