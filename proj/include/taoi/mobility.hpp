#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "taoi/rng.hpp"

namespace taoi {

using VehicleId = int;

/// Ground-truth kinematics of one vehicle at one instant.
struct VehicleState {
  VehicleId id = 0;
  double x = 0.0;        // m
  double y = 0.0;        // m
  double speed = 0.0;    // m/s
  double heading = 0.0;  // rad, 0 = +x axis, counter-clockwise positive
  int lane = 0;
  double t = 0.0;        // s

  bool operator==(const VehicleState&) const = default;
};

struct RoadConfig {
  double length = 1000.0;  // m, outer edge along x
  double width = 100.0;    // m, outer edge along y
  int lanes = 3;
  double lane_width = 4.0;  // m

  void validate() const;
};

struct KraussParams {
  double max_accel = 2.6;         // m/s^2
  double max_decel = 4.6;         // m/s^2, also the braking deceleration of the safety metric
  double driver_reaction = 1.0;   // s
  double imperfection_sigma = 0.5;
  double min_gap = 2.5;           // m
  double vehicle_length = 5.0;    // m
  double max_speed = 25.0;        // m/s (s_max)
  double lane_change_cooldown = 2.0;  // s between two lane changes of one vehicle

  void validate() const;
};

/// Closed rectangular circuit. Lane k runs on the rectangle inset by
/// (k + 1/2) lane widths from the outer edge, so lane 0 is the outermost.
/// Vehicles travel counter-clockwise: +x, +y, -x, -y.
class CircuitGeometry {
public:
  struct Pose {
    double x;
    double y;
    double heading;
  };

  explicit CircuitGeometry(const RoadConfig& road);

  const RoadConfig& road() const noexcept { return road_; }
  int lanes() const noexcept { return road_.lanes; }
  double lane_length(int lane) const;
  /// Pose at arc coordinate `s` (wrapped into [0, lane_length)).
  Pose pose(int lane, double s) const;
  /// Arc coordinate of the point of `lane` nearest to (x, y).
  double project(int lane, double x, double y) const;
  /// Distance of (x, y) from the centerline of `lane`.
  double distance_to_lane(int lane, double x, double y) const;

private:
  struct LaneShape {
    double inset;
    double side_x;  // length of the x-aligned sides
    double side_y;  // length of the y-aligned sides
    double perimeter;
  };
  const LaneShape& shape(int lane) const;

  RoadConfig road_;
  std::vector<LaneShape> shapes_;
};

/// Krauss safe speed w.r.t. a leader: v_l + (g - v_l*tau) / ((v_l + v_f)/(2b) + tau).
/// `gap` is the usable gap (bumper-to-bumper minus min_gap).
double krauss_safe_speed(double gap, double leader_speed, double follower_speed,
                         const KraussParams& params);

/// max(0, min(v + a*dt, s_max, v_safe) - sigma*eta*a*dt) with eta in [0, 1].
double krauss_next_speed(double speed, double safe_speed, const KraussParams& params, double dt,
                         double eta);

/// One synchronous Krauss update of all vehicles (lane changes, speeds, positions).
/// Throws DomainError if two vehicles share a lane position (collision state).
std::vector<VehicleState> krauss_step(std::span<const VehicleState> states,
                                      const KraussParams& params, const RoadConfig& road,
                                      double dt, Rng& rng);

/// Lane chosen by `vehicle` given the other vehicles: the current lane or an
/// adjacent one offering a strictly higher safe speed with front and rear
/// gaps of at least min_gap.
int lane_change(const VehicleState& vehicle, std::span<const VehicleState> neighbors,
                const KraussParams& params, const CircuitGeometry& geometry, double dt);

/// Per-vehicle time-ordered samples at a uniform tick.
class TrajectoryTable {
public:
  struct Track {
    VehicleId id;
    std::vector<VehicleState> samples;

    bool operator==(const Track&) const = default;
  };

  TrajectoryTable() = default;
  /// Validates ordering and tick uniformity. Tracks are sorted by id.
  TrajectoryTable(std::vector<Track> tracks, double tick);

  double tick() const noexcept { return tick_; }
  std::span<const Track> tracks() const noexcept { return tracks_; }
  std::size_t vehicle_count() const noexcept { return tracks_.size(); }
  const Track& track(VehicleId id) const;
  bool contains(VehicleId id) const;
  /// Earliest and latest sample time over all tracks.
  double start_time() const;
  double end_time() const;

  bool operator==(const TrajectoryTable&) const = default;

private:
  std::vector<Track> tracks_;
  double tick_ = 0.0;
};

/// Linear interpolation of x, y and speed between bracketing samples; heading
/// and lane come from the earlier sample. Throws OutOfRangeError outside the span.
VehicleState position_at(const TrajectoryTable& table, VehicleId id, double t);

/// Parses a trace CSV (`t,vehicle_id,x,y,speed,heading,lane`).
TrajectoryTable load_trace(const std::filesystem::path& path);
void write_trace(const TrajectoryTable& table, const std::filesystem::path& path);

struct MobilityStats {
  double min_same_lane_gap = std::numeric_limits<double>::infinity();  // bumper-to-bumper, m
  std::size_t negative_gap_events = 0;  // (vehicle, tick) pairs with gap < 0
  std::size_t lane_changes = 0;
};

/// Built-in traffic: `count` vehicles placed uniformly around the circuit,
/// round-robin across lanes, initial speed uniform in [5, s_max]. Samples are
/// taken every `tick` seconds over [0, duration].
TrajectoryTable generate_krauss_trajectories(int count, const RoadConfig& road,
                                             const KraussParams& params, double duration,
                                             double tick, Rng& init_rng, Rng& mobility_rng,
                                             MobilityStats* stats = nullptr);

}  // namespace taoi
