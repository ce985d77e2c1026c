#include "taoi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "taoi/errors.hpp"

namespace taoi {

void SafetyParams::validate() const {
  if (!(t_react > 0) || !(decel > 0) || !(rel_speed_floor > 0)) {
    throw DomainError("safety parameters must be positive");
  }
  if (!(te_threshold >= 0)) throw DomainError("self-TE threshold must be >= 0");
}

Point heading_vector(double heading) {
  // Axis-aligned headings are exact so that straight-road extrapolation has no
  // spurious cross-track error.
  constexpr double half_pi = std::numbers::pi / 2;
  if (heading == 0.0) return {1.0, 0.0};
  if (heading == half_pi) return {0.0, 1.0};
  if (heading == std::numbers::pi || heading == -std::numbers::pi) return {-1.0, 0.0};
  if (heading == -half_pi) return {0.0, -1.0};
  return {std::cos(heading), std::sin(heading)};
}

Point estimate_position(const Bsm& bsm, double t) {
  const double dt = t - bsm.gen_time;
  if (dt < 0) throw DomainError("cannot extrapolate a BSM backwards in time");
  const Point u = heading_vector(bsm.heading);
  return {bsm.x + bsm.speed * u.x * dt, bsm.y + bsm.speed * u.y * dt};
}

double tracking_error(const VehicleState& truth, Point estimate) {
  return std::hypot(truth.x - estimate.x, truth.y - estimate.y);
}

double average_tracking_error(std::span<const double> samples) {
  if (samples.empty()) throw UndefinedValueError("average TE over an empty window");
  return std::accumulate(samples.begin(), samples.end(), 0.0) /
         static_cast<double>(samples.size());
}

double self_tracking_error(const VehicleState& now, const VehicleState& prev, double t_mi) {
  if (now.id != prev.id) throw DomainError("self TE needs two states of the same vehicle");
  if (std::abs((now.t - prev.t) - t_mi) > 1e-6) {
    throw DomainError("self TE states must be exactly t_MI apart");
  }
  const Point u = heading_vector(prev.heading);
  const double ex = prev.x + prev.speed * u.x * t_mi;
  const double ey = prev.y + prev.speed * u.y * t_mi;
  return std::hypot(now.x - ex, now.y - ey);
}

double relative_speed(const VehicleState& a, const VehicleState& b) {
  const Point ua = heading_vector(a.heading);
  const Point ub = heading_vector(b.heading);
  const double vx = a.speed * ua.x - b.speed * ub.x;
  const double vy = a.speed * ua.y - b.speed * ub.y;
  return std::hypot(vx, vy);
}

double delta_ttc(double te, double rel_speed, const SafetyParams& params) {
  if (te < 0) throw DomainError("tracking error must be >= 0");
  return te / std::max(std::abs(rel_speed), params.rel_speed_floor);
}

double ttc_threshold(double speed, const SafetyParams& params) {
  if (speed < 0) throw DomainError("speed must be >= 0");
  return params.t_react + speed / params.decel;
}

PdrCounters::PdrCounters(double bin_width_m) : bin_width_(bin_width_m) {
  if (!(bin_width_m > 0)) throw DomainError("PDR bin width must be positive");
}

void PdrCounters::record(const VehicleState& sender, std::span<const VehicleState> in_range,
                         std::span<const VehicleId> successes) {
  for (VehicleId s : successes) {
    const bool known = std::any_of(in_range.begin(), in_range.end(),
                                   [s](const VehicleState& r) { return r.id == s; });
    if (!known) {
      throw ConsistencyError("success by vehicle " + std::to_string(s) +
                             " which is not in the in-range set");
    }
  }
  ++tx_per_sender_[sender.id];
  ++total_tx_;
  for (const auto& r : in_range) {
    const double d = std::hypot(r.x - sender.x, r.y - sender.y);
    const auto idx = static_cast<std::size_t>(d / bin_width_);
    if (idx >= bins_.size()) bins_.resize(idx + 1);
    ++bins_[idx].opportunities;
    if (std::find(successes.begin(), successes.end(), r.id) != successes.end()) {
      ++bins_[idx].successes;
    }
  }
}

double PdrCounters::bin_pdr(std::size_t i) const {
  if (i >= bins_.size() || bins_[i].opportunities == 0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return static_cast<double>(bins_[i].successes) / static_cast<double>(bins_[i].opportunities);
}

double PdrCounters::overall_pdr() const {
  std::uint64_t s = 0, o = 0;
  for (const auto& b : bins_) {
    s += b.successes;
    o += b.opportunities;
  }
  return o == 0 ? std::numeric_limits<double>::quiet_NaN()
                : static_cast<double>(s) / static_cast<double>(o);
}

std::uint64_t PdrCounters::transmissions(VehicleId sender) const {
  auto it = tx_per_sender_.find(sender);
  return it == tx_per_sender_.end() ? 0 : it->second;
}

void PdrCounters::merge(const PdrCounters& other) {
  if (other.bin_width_ != bin_width_) throw DomainError("cannot merge PDR counters of different bin width");
  if (other.bins_.size() > bins_.size()) bins_.resize(other.bins_.size());
  for (std::size_t i = 0; i < other.bins_.size(); ++i) {
    bins_[i].successes += other.bins_[i].successes;
    bins_[i].opportunities += other.bins_[i].opportunities;
  }
  for (const auto& [id, n] : other.tx_per_sender_) tx_per_sender_[id] += n;
  total_tx_ += other.total_tx_;
}

}  // namespace taoi
