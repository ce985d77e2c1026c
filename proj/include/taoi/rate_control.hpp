#pragma once

#include <limits>
#include <optional>
#include <string_view>

namespace taoi {

enum class Action { Incr, Decr, Same };

constexpr Action complement(Action a) noexcept {
  switch (a) {
    case Action::Incr: return Action::Decr;
    case Action::Decr: return Action::Incr;
    case Action::Same: return Action::Same;
  }
  return Action::Same;
}

std::string_view to_string(Action a) noexcept;

enum class Protocol { Fixed10Hz, Aoi, Taoi };

std::string_view to_string(Protocol p) noexcept;
/// Parses "fixed10hz", "aoi" or "taoi". Throws DomainError otherwise.
Protocol parse_protocol(std::string_view name);

struct ControllerParams {
  double beta = 1.1;
  double delta_min = 0.020;   // s
  double delta_max = 1.000;   // s
  double delta_init = 0.100;  // s
  double t_mi = 1.0;          // s
  double te_threshold = 0.5;  // m
  double spread_lambda = 0.25;
  double eps_cmp = 1e-9;      // s
  double fixed_interval = 0.100;  // s

  void validate() const;
};

/// Per-vehicle controller memory.
///
/// `omega` holds the last directional move (INCR or DECR). A SAME outcome
/// leaves it untouched, so the next comparison still has a direction to
/// repeat or reverse.
struct ControllerState {
  ControllerParams params;
  double delta = 0.100;       // current interval
  double prev_delta = 0.100;  // interval before the last update
  Action omega = Action::Decr;
  double prev_metric = std::numeric_limits<double>::infinity();  // TAoI' or AoI'
  bool flag = false;

  static ControllerState initial(const ControllerParams& p);
};

/// Inputs of one rate decision, measured over the MI that just ended.
struct MiInputs {
  std::optional<double> aoi_v;         // empty: no live neighbors
  double taoi_v = 0.0;
  std::optional<double> interval_avg;  // mean piggybacked neighbor interval
  int risky_neighbor_count = 0;
};

struct RateDecision {
  double delta;
  Action action;
  bool congested;
};

/// Riskiness flag: 1 iff self-TE >= threshold. Stored in the state.
bool assess_self_risk(double self_te, ControllerState& state);

/// Congestion signal: aoi_v > 2 * interval_avg (false without neighbors).
bool congested(const MiInputs& in);

/// Two-step TAoI control: congestion, riskiness, risky neighbors, then
/// the TAoI trend against the previous MI.
RateDecision taoi_rate_update(ControllerState& state, const MiInputs& in);

/// AoI-minimizing baseline: congestion, then the AoI trend, then a nudge of
/// `spread_lambda` toward the neighbor mean interval.
RateDecision aoi_rate_update(ControllerState& state, const MiInputs& in);

/// Constant 100 ms.
RateDecision fixed_rate(ControllerState& state);

RateDecision rate_update(Protocol protocol, ControllerState& state, const MiInputs& in);

}  // namespace taoi
