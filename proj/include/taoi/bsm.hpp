#pragma once

#include "taoi/mobility.hpp"

namespace taoi {

/// Broadcast safety message: sender snapshot at generation time plus the
/// piggybacked riskiness flag and the sender's current broadcast interval.
struct Bsm {
  VehicleId sender = 0;
  double gen_time = 0.0;  // s
  double x = 0.0;
  double y = 0.0;
  double speed = 0.0;
  double heading = 0.0;
  bool risky = false;
  double interval = 0.1;  // s
  int size_bytes = 1000;

  static Bsm from_state(const VehicleState& s, bool risky, double interval, int size_bytes = 1000) {
    return Bsm{s.id, s.t, s.x, s.y, s.speed, s.heading, risky, interval, size_bytes};
  }
};

}  // namespace taoi
