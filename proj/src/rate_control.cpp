#include "taoi/rate_control.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "taoi/errors.hpp"

namespace taoi {

std::string_view to_string(Action a) noexcept {
  switch (a) {
    case Action::Incr: return "INCR";
    case Action::Decr: return "DECR";
    case Action::Same: return "SAME";
  }
  return "SAME";
}

std::string_view to_string(Protocol p) noexcept {
  switch (p) {
    case Protocol::Fixed10Hz: return "fixed10hz";
    case Protocol::Aoi: return "aoi";
    case Protocol::Taoi: return "taoi";
  }
  return "fixed10hz";
}

Protocol parse_protocol(std::string_view name) {
  if (name == "fixed10hz") return Protocol::Fixed10Hz;
  if (name == "aoi") return Protocol::Aoi;
  if (name == "taoi") return Protocol::Taoi;
  throw DomainError("unknown protocol '" + std::string(name) + "' (fixed10hz|aoi|taoi)");
}

void ControllerParams::validate() const {
  if (!(beta > 1.0)) throw DomainError("beta must be > 1");
  if (!(delta_min > 0) || !(delta_max >= delta_min)) {
    throw DomainError("interval bounds must satisfy 0 < delta_min <= delta_max");
  }
  if (delta_init < delta_min || delta_init > delta_max) {
    throw DomainError("initial interval outside [delta_min, delta_max]");
  }
  if (fixed_interval < delta_min || fixed_interval > delta_max) {
    throw DomainError("fixed interval outside [delta_min, delta_max]");
  }
  if (!(t_mi > 0)) throw DomainError("t_MI must be positive");
  if (!(te_threshold >= 0)) throw DomainError("self-TE threshold must be >= 0");
  if (!(spread_lambda >= 0 && spread_lambda <= 1)) throw DomainError("spread lambda must be in [0, 1]");
  if (!(eps_cmp >= 0)) throw DomainError("comparison tolerance must be >= 0");
}

ControllerState ControllerState::initial(const ControllerParams& p) {
  ControllerState s;
  s.params = p;
  s.delta = p.delta_init;
  s.prev_delta = p.delta_init;
  s.flag = 0.0 >= p.te_threshold;
  return s;
}

bool assess_self_risk(double self_te, ControllerState& state) {
  if (self_te < 0) throw DomainError("self-TE must be >= 0");
  state.flag = self_te >= state.params.te_threshold;
  return state.flag;
}

bool congested(const MiInputs& in) {
  return in.aoi_v && in.interval_avg && *in.aoi_v > 2.0 * *in.interval_avg;
}

namespace {

double apply(const ControllerState& s, Action a) {
  double d = s.delta;
  if (a == Action::Incr) d *= s.params.beta;
  if (a == Action::Decr) d /= s.params.beta;
  return std::clamp(d, s.params.delta_min, s.params.delta_max);
}

Action trend(const ControllerState& s, double metric) {
  if (std::abs(metric - s.prev_metric) <= s.params.eps_cmp) return Action::Same;
  return metric < s.prev_metric ? s.omega : complement(s.omega);
}

RateDecision commit(ControllerState& s, Action a, double delta, bool cong) {
  s.prev_delta = s.delta;
  s.delta = delta;
  if (a != Action::Same) s.omega = a;
  return {delta, a, cong};
}

}  // namespace

RateDecision taoi_rate_update(ControllerState& state, const MiInputs& in) {
  const bool cong = congested(in);
  Action a;
  if (cong) {
    a = Action::Incr;
  } else if (!state.flag) {
    a = Action::Same;
  } else if (in.risky_neighbor_count == 0) {
    a = Action::Decr;
  } else {
    a = trend(state, in.taoi_v);
  }
  state.prev_metric = in.taoi_v;
  return commit(state, a, apply(state, a), cong);
}

RateDecision aoi_rate_update(ControllerState& state, const MiInputs& in) {
  const bool cong = congested(in);
  Action a = Action::Same;
  if (cong) {
    a = Action::Incr;
  } else if (in.aoi_v) {
    a = trend(state, *in.aoi_v);
  }
  if (in.aoi_v) state.prev_metric = *in.aoi_v;
  double d = apply(state, a);
  if (in.interval_avg) {
    d += state.params.spread_lambda * (*in.interval_avg - d);
    d = std::clamp(d, state.params.delta_min, state.params.delta_max);
  }
  return commit(state, a, d, cong);
}

RateDecision fixed_rate(ControllerState& state) {
  return commit(state, Action::Same, state.params.fixed_interval, false);
}

RateDecision rate_update(Protocol protocol, ControllerState& state, const MiInputs& in) {
  switch (protocol) {
    case Protocol::Fixed10Hz: return fixed_rate(state);
    case Protocol::Aoi: return aoi_rate_update(state, in);
    case Protocol::Taoi: return taoi_rate_update(state, in);
  }
  return fixed_rate(state);
}

}  // namespace taoi
