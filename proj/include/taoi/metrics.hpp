#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "taoi/bsm.hpp"
#include "taoi/mobility.hpp"

namespace taoi {

struct SafetyParams {
  double t_react = 1.0;          // s
  double decel = 4.6;            // m/s^2
  double rel_speed_floor = 0.1;  // m/s
  double te_threshold = 0.5;     // m, self-TE riskiness threshold

  void validate() const;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Unit vector of a heading; exact for the four axis directions.
Point heading_vector(double heading);

/// Dead-reckoned sender position at `t` from its last BSM (constant speed and heading).
Point estimate_position(const Bsm& bsm, double t);

/// Euclidean distance between the true position and the estimate.
double tracking_error(const VehicleState& truth, Point estimate);

/// Mean of uniformly spaced TE samples (time average over the window).
double average_tracking_error(std::span<const double> samples);

/// Error of a vehicle's own straight-line extrapolation over t_MI.
double self_tracking_error(const VehicleState& now, const VehicleState& prev, double t_mi);

/// Magnitude of the 2-D relative velocity.
double relative_speed(const VehicleState& a, const VehicleState& b);

/// TE-induced TTC error: te / max(|rel_speed|, floor).
double delta_ttc(double te, double rel_speed, const SafetyParams& params);

/// Reaction plus braking time: t_react + speed / decel.
double ttc_threshold(double speed, const SafetyParams& params);

/// 1 iff delta_ttc strictly exceeds the threshold.
inline int collision_risk_indicator(double delta_ttc, double threshold) {
  return delta_ttc > threshold ? 1 : 0;
}

/// Link-level delivery bookkeeping, binned by sender-receiver distance.
class PdrCounters {
public:
  struct Bin {
    std::uint64_t successes = 0;
    std::uint64_t opportunities = 0;
  };

  explicit PdrCounters(double bin_width_m = 25.0);

  /// One transmission: every in-range receiver is an opportunity in its
  /// distance bin; `successes` must be a subset of the in-range ids.
  void record(const VehicleState& sender, std::span<const VehicleState> in_range,
              std::span<const VehicleId> successes);

  double bin_width() const noexcept { return bin_width_; }
  std::span<const Bin> bins() const noexcept { return bins_; }
  /// successes / opportunities of bin i (NaN for an empty bin).
  double bin_pdr(std::size_t i) const;
  double overall_pdr() const;
  std::uint64_t transmissions(VehicleId sender) const;
  std::uint64_t total_transmissions() const noexcept { return total_tx_; }

  void merge(const PdrCounters& other);

private:
  double bin_width_;
  std::vector<Bin> bins_;
  std::map<VehicleId, std::uint64_t> tx_per_sender_;
  std::uint64_t total_tx_ = 0;
};

}  // namespace taoi
