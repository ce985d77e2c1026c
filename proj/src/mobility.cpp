#include "taoi/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "taoi/errors.hpp"

namespace taoi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSameSpotEps = 1e-9;

double wrap(double s, double period) {
  double r = std::fmod(s, period);
  if (r < 0) r += period;
  return r;
}

// Working representation: arc coordinate along the vehicle's lane.
struct Agent {
  VehicleId id;
  int lane;
  double s;
  double speed;
  double last_lane_change;
};

struct LaneNeighbors {
  const Agent* leader = nullptr;
  double front_gap = kInf;  // bumper-to-bumper
  const Agent* follower = nullptr;
  double rear_gap = kInf;
};

// Leader/follower of a virtual vehicle at `s` on `lane`, ignoring `self_id`.
LaneNeighbors neighbors_in_lane(const std::vector<Agent>& agents, int lane, double s,
                                VehicleId self_id, double lane_length, double vehicle_length) {
  LaneNeighbors out;
  double best_ahead = kInf;
  double best_behind = kInf;
  for (const Agent& other : agents) {
    if (other.lane != lane || other.id == self_id) continue;
    const double ahead = wrap(other.s - s, lane_length);
    const double behind = wrap(s - other.s, lane_length);
    if (ahead < best_ahead || (ahead == best_ahead && out.leader && other.id < out.leader->id)) {
      best_ahead = ahead;
      out.leader = &other;
    }
    if (behind < best_behind ||
        (behind == best_behind && out.follower && other.id < out.follower->id)) {
      best_behind = behind;
      out.follower = &other;
    }
  }
  if (out.leader) out.front_gap = best_ahead - vehicle_length;
  if (out.follower) out.rear_gap = best_behind - vehicle_length;
  return out;
}

double lane_safe_speed(const Agent& agent, const LaneNeighbors& nb, const KraussParams& p,
                       double dt) {
  double v = std::min(agent.speed + p.max_accel * dt, p.max_speed);
  if (nb.leader) {
    v = std::min(v, krauss_safe_speed(nb.front_gap - p.min_gap, nb.leader->speed, agent.speed, p));
  }
  return v;
}

struct LaneDecision {
  int lane;
  double s;
};

LaneDecision decide_lane(const Agent& agent, const std::vector<Agent>& agents,
                         const KraussParams& p, const CircuitGeometry& geo, double dt) {
  const auto here = neighbors_in_lane(agents, agent.lane, agent.s, agent.id,
                                      geo.lane_length(agent.lane), p.vehicle_length);
  const double current = lane_safe_speed(agent, here, p, dt);
  LaneDecision best{agent.lane, agent.s};
  double best_speed = current;
  const auto pose = geo.pose(agent.lane, agent.s);
  for (int target : {agent.lane - 1, agent.lane + 1}) {
    if (target < 0 || target >= geo.lanes()) continue;
    const double s_target = geo.project(target, pose.x, pose.y);
    const auto there = neighbors_in_lane(agents, target, s_target, agent.id,
                                         geo.lane_length(target), p.vehicle_length);
    if (there.front_gap < p.min_gap || there.rear_gap < p.min_gap) continue;
    Agent moved = agent;
    moved.lane = target;
    moved.s = s_target;
    const double candidate = lane_safe_speed(moved, there, p, dt);
    if (candidate > best_speed) {
      best_speed = candidate;
      best = {target, s_target};
    }
  }
  return best;
}

VehicleState to_state(const Agent& a, const CircuitGeometry& geo, double t) {
  const auto pose = geo.pose(a.lane, a.s);
  return VehicleState{a.id, pose.x, pose.y, a.speed, pose.heading, a.lane, t};
}

void check_no_shared_spot(const std::vector<Agent>& agents, const CircuitGeometry& geo) {
  for (std::size_t i = 0; i < agents.size(); ++i) {
    for (std::size_t j = i + 1; j < agents.size(); ++j) {
      if (agents[i].lane != agents[j].lane) continue;
      const double d = wrap(agents[i].s - agents[j].s, geo.lane_length(agents[i].lane));
      if (d < kSameSpotEps || geo.lane_length(agents[i].lane) - d < kSameSpotEps) {
        throw DomainError("vehicles " + std::to_string(agents[i].id) + " and " +
                          std::to_string(agents[j].id) + " occupy the same lane position");
      }
    }
  }
}

// Lane changes (sequential, by id), then synchronous speed update, then positions.
void advance(std::vector<Agent>& agents, const CircuitGeometry& geo, const KraussParams& p,
             double dt, double t_now, Rng& rng, MobilityStats* stats) {
  for (Agent& a : agents) {
    if (t_now - a.last_lane_change < p.lane_change_cooldown) continue;
    const auto decision = decide_lane(a, agents, p, geo, dt);
    if (decision.lane != a.lane) {
      a.lane = decision.lane;
      a.s = decision.s;
      a.last_lane_change = t_now;
      if (stats) ++stats->lane_changes;
    }
  }

  std::vector<double> next_speed(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const Agent& a = agents[i];
    const auto nb = neighbors_in_lane(agents, a.lane, a.s, a.id, geo.lane_length(a.lane),
                                      p.vehicle_length);
    double safe = kInf;
    if (nb.leader) safe = krauss_safe_speed(nb.front_gap - p.min_gap, nb.leader->speed, a.speed, p);
    const double eta = rng.uniform();
    next_speed[i] = krauss_next_speed(a.speed, safe, p, dt, eta);
  }
  for (std::size_t i = 0; i < agents.size(); ++i) {
    agents[i].speed = next_speed[i];
    agents[i].s = wrap(agents[i].s + next_speed[i] * dt, geo.lane_length(agents[i].lane));
  }

  if (stats) {
    for (const Agent& a : agents) {
      const auto nb = neighbors_in_lane(agents, a.lane, a.s, a.id, geo.lane_length(a.lane),
                                        p.vehicle_length);
      if (!nb.leader) continue;
      stats->min_same_lane_gap = std::min(stats->min_same_lane_gap, nb.front_gap);
      if (nb.front_gap < 0) ++stats->negative_gap_events;
    }
  }
}

std::vector<Agent> agents_from_states(std::span<const VehicleState> states,
                                      const CircuitGeometry& geo) {
  std::vector<Agent> agents;
  agents.reserve(states.size());
  for (const auto& st : states) {
    if (st.lane < 0 || st.lane >= geo.lanes()) {
      throw DomainError("vehicle " + std::to_string(st.id) + " is on invalid lane " +
                        std::to_string(st.lane));
    }
    agents.push_back(Agent{st.id, st.lane, geo.project(st.lane, st.x, st.y), st.speed,
                           -std::numeric_limits<double>::infinity()});
  }
  std::sort(agents.begin(), agents.end(),
            [](const Agent& a, const Agent& b) { return a.id < b.id; });
  return agents;
}

}  // namespace

void RoadConfig::validate() const {
  if (!(length > 0) || !(width > 0)) throw DomainError("road length and width must be positive");
  if (lanes < 1) throw DomainError("road needs at least one lane");
  if (!(lane_width > 0)) throw DomainError("lane width must be positive");
  if (lane_width * lanes > width) throw DomainError("lanes do not fit in the road width");
  if ((lanes - 0.5) * lane_width >= std::min(length, width) / 2) {
    throw DomainError("innermost lane collapses: road too narrow for the lane count");
  }
}

void KraussParams::validate() const {
  if (!(max_accel > 0) || !(max_decel > 0) || !(driver_reaction > 0) || !(min_gap > 0) ||
      !(vehicle_length > 0) || !(max_speed > 0)) {
    throw DomainError("Krauss parameters must be positive");
  }
  if (!(imperfection_sigma >= 0 && imperfection_sigma <= 1)) {
    throw DomainError("imperfection sigma must lie in [0, 1]");
  }
  if (!(lane_change_cooldown >= 0)) throw DomainError("lane change cooldown must be >= 0");
}

CircuitGeometry::CircuitGeometry(const RoadConfig& road) : road_(road) {
  road_.validate();
  for (int k = 0; k < road_.lanes; ++k) {
    LaneShape s{};
    s.inset = (k + 0.5) * road_.lane_width;
    s.side_x = road_.length - 2 * s.inset;
    s.side_y = road_.width - 2 * s.inset;
    s.perimeter = 2 * (s.side_x + s.side_y);
    shapes_.push_back(s);
  }
}

const CircuitGeometry::LaneShape& CircuitGeometry::shape(int lane) const {
  if (lane < 0 || lane >= road_.lanes) throw DomainError("invalid lane " + std::to_string(lane));
  return shapes_[static_cast<std::size_t>(lane)];
}

double CircuitGeometry::lane_length(int lane) const { return shape(lane).perimeter; }

CircuitGeometry::Pose CircuitGeometry::pose(int lane, double s) const {
  const auto& sh = shape(lane);
  s = wrap(s, sh.perimeter);
  const double lo = sh.inset;
  const double hi_x = road_.length - sh.inset;
  const double hi_y = road_.width - sh.inset;
  constexpr double pi = std::numbers::pi;
  if (s < sh.side_x) return {lo + s, lo, 0.0};
  s -= sh.side_x;
  if (s < sh.side_y) return {hi_x, lo + s, pi / 2};
  s -= sh.side_y;
  if (s < sh.side_x) return {hi_x - s, hi_y, pi};
  s -= sh.side_x;
  return {lo, hi_y - s, -pi / 2};
}

double CircuitGeometry::project(int lane, double x, double y) const {
  const auto& sh = shape(lane);
  const double lo = sh.inset;
  const double hi_x = road_.length - sh.inset;
  const double hi_y = road_.width - sh.inset;
  struct Candidate {
    double dist2;
    double s;
  };
  auto clampd = [](double v, double a, double b) { return std::clamp(v, a, b); };
  const double px0 = clampd(x, lo, hi_x);
  const double py1 = clampd(y, lo, hi_y);
  const Candidate c[4] = {
      {(x - px0) * (x - px0) + (y - lo) * (y - lo), px0 - lo},
      {(x - hi_x) * (x - hi_x) + (y - py1) * (y - py1), sh.side_x + (py1 - lo)},
      {(x - px0) * (x - px0) + (y - hi_y) * (y - hi_y), sh.side_x + sh.side_y + (hi_x - px0)},
      {(x - lo) * (x - lo) + (y - py1) * (y - py1), 2 * sh.side_x + sh.side_y + (hi_y - py1)},
  };
  const Candidate* best = &c[0];
  for (const auto& cand : c) {
    if (cand.dist2 < best->dist2) best = &cand;
  }
  return wrap(best->s, sh.perimeter);
}

double CircuitGeometry::distance_to_lane(int lane, double x, double y) const {
  const auto p = pose(lane, project(lane, x, y));
  return std::hypot(p.x - x, p.y - y);
}

double krauss_safe_speed(double gap, double leader_speed, double follower_speed,
                         const KraussParams& params) {
  const double tau = params.driver_reaction;
  const double b = params.max_decel;
  return leader_speed +
         (gap - leader_speed * tau) / ((leader_speed + follower_speed) / (2 * b) + tau);
}

double krauss_next_speed(double speed, double safe_speed, const KraussParams& params, double dt,
                         double eta) {
  const double desired = std::min({speed + params.max_accel * dt, params.max_speed, safe_speed});
  return std::max(0.0, desired - params.imperfection_sigma * eta * params.max_accel * dt);
}

std::vector<VehicleState> krauss_step(std::span<const VehicleState> states,
                                      const KraussParams& params, const RoadConfig& road,
                                      double dt, Rng& rng) {
  if (!(dt > 0)) throw DomainError("krauss_step needs dt > 0");
  params.validate();
  const CircuitGeometry geo(road);
  auto agents = agents_from_states(states, geo);
  check_no_shared_spot(agents, geo);
  const double t = states.empty() ? 0.0 : states.front().t;
  advance(agents, geo, params, dt, t, rng, nullptr);
  std::vector<VehicleState> out;
  out.reserve(agents.size());
  for (const auto& a : agents) out.push_back(to_state(a, geo, t + dt));
  return out;
}

int lane_change(const VehicleState& vehicle, std::span<const VehicleState> neighbors,
                const KraussParams& params, const CircuitGeometry& geometry, double dt) {
  std::vector<VehicleState> all(neighbors.begin(), neighbors.end());
  all.push_back(vehicle);
  const auto agents = agents_from_states(all, geometry);
  const auto self = std::find_if(agents.begin(), agents.end(),
                                 [&](const Agent& a) { return a.id == vehicle.id; });
  return decide_lane(*self, agents, params, geometry, dt).lane;
}

// --- TrajectoryTable --------------------------------------------------------

TrajectoryTable::TrajectoryTable(std::vector<Track> tracks, double tick)
    : tracks_(std::move(tracks)), tick_(tick) {
  std::sort(tracks_.begin(), tracks_.end(),
            [](const Track& a, const Track& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < tracks_.size(); ++i) {
    if (tracks_[i].id == tracks_[i - 1].id) {
      throw FormatError("duplicate track for vehicle " + std::to_string(tracks_[i].id));
    }
  }
  const double tol = 1e-6 * std::max(1.0, tick_);
  for (const auto& tr : tracks_) {
    if (tr.samples.empty()) throw FormatError("empty track for vehicle " + std::to_string(tr.id));
    for (std::size_t k = 1; k < tr.samples.size(); ++k) {
      const double dt = tr.samples[k].t - tr.samples[k - 1].t;
      if (!(dt > 0)) {
        throw FormatError("samples of vehicle " + std::to_string(tr.id) +
                          " are not strictly increasing in t");
      }
      if (std::abs(dt - tick_) > tol) {
        throw FormatError("non-uniform tick for vehicle " + std::to_string(tr.id) + " at t=" +
                          std::to_string(tr.samples[k].t));
      }
    }
  }
}

const TrajectoryTable::Track& TrajectoryTable::track(VehicleId id) const {
  auto it = std::lower_bound(tracks_.begin(), tracks_.end(), id,
                             [](const Track& tr, VehicleId v) { return tr.id < v; });
  if (it == tracks_.end() || it->id != id) {
    throw OutOfRangeError("no trajectory for vehicle " + std::to_string(id));
  }
  return *it;
}

bool TrajectoryTable::contains(VehicleId id) const {
  auto it = std::lower_bound(tracks_.begin(), tracks_.end(), id,
                             [](const Track& tr, VehicleId v) { return tr.id < v; });
  return it != tracks_.end() && it->id == id;
}

double TrajectoryTable::start_time() const {
  double t = kInf;
  for (const auto& tr : tracks_) t = std::min(t, tr.samples.front().t);
  return t;
}

double TrajectoryTable::end_time() const {
  double t = -kInf;
  for (const auto& tr : tracks_) t = std::max(t, tr.samples.back().t);
  return t;
}

VehicleState position_at(const TrajectoryTable& table, VehicleId id, double t) {
  const auto& samples = table.track(id).samples;
  const double t0 = samples.front().t;
  const double t1 = samples.back().t;
  constexpr double eps = 1e-9;
  if (t < t0 - eps || t > t1 + eps) {
    throw OutOfRangeError("t=" + std::to_string(t) + " outside trace span of vehicle " +
                          std::to_string(id));
  }
  if (samples.size() == 1) {
    VehicleState s = samples.front();
    s.t = t;
    return s;
  }
  const double tick = table.tick();
  auto k = static_cast<std::ptrdiff_t>(std::floor((t - t0) / tick));
  k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(samples.size()) - 2);
  // Floating floor can land one sample off; settle on the bracketing pair.
  while (k > 0 && samples[static_cast<std::size_t>(k)].t > t) --k;
  while (k + 2 < static_cast<std::ptrdiff_t>(samples.size()) &&
         samples[static_cast<std::size_t>(k) + 1].t <= t) {
    ++k;
  }
  const auto& a = samples[static_cast<std::size_t>(k)];
  const auto& b = samples[static_cast<std::size_t>(k) + 1];
  if (t <= a.t) {
    VehicleState s = a;
    s.t = t;
    return s;
  }
  if (t >= b.t) {
    VehicleState s = b;
    s.t = t;
    return s;
  }
  const double w = (t - a.t) / (b.t - a.t);
  VehicleState s = a;
  s.x = a.x + w * (b.x - a.x);
  s.y = a.y + w * (b.y - a.y);
  s.speed = a.speed + w * (b.speed - a.speed);
  s.t = t;
  return s;
}

// --- trace CSV ---------------------------------------------------------------

namespace {

constexpr const char* kTraceHeader = "t,vehicle_id,x,y,speed,heading,lane";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line, const char* what) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ParseError(line, std::string("invalid ") + what + " '" + s + "'");
  }
  if (pos != s.size() || !std::isfinite(v)) {
    throw ParseError(line, std::string("invalid ") + what + " '" + s + "'");
  }
  return v;
}

long parse_long(const std::string& s, std::size_t line, const char* what) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(s, &pos);
  } catch (const std::exception&) {
    throw ParseError(line, std::string("invalid ") + what + " '" + s + "'");
  }
  if (pos != s.size()) throw ParseError(line, std::string("invalid ") + what + " '" + s + "'");
  return v;
}

}  // namespace

TrajectoryTable load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open trace file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) {
    throw ParseError(1, std::string("expected header '") + kTraceHeader + "'");
  }
  std::map<VehicleId, std::vector<VehicleState>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 7) {
      throw ParseError(line_no, "expected 7 fields, found " + std::to_string(f.size()));
    }
    VehicleState s;
    s.t = parse_double(f[0], line_no, "t");
    s.id = static_cast<VehicleId>(parse_long(f[1], line_no, "vehicle_id"));
    s.x = parse_double(f[2], line_no, "x");
    s.y = parse_double(f[3], line_no, "y");
    s.speed = parse_double(f[4], line_no, "speed");
    s.heading = parse_double(f[5], line_no, "heading");
    const long lane = parse_long(f[6], line_no, "lane");
    if (lane < 0) throw ParseError(line_no, "lane must be >= 0");
    if (s.speed < 0) throw ParseError(line_no, "speed must be >= 0");
    s.lane = static_cast<int>(lane);
    rows[s.id].push_back(s);
  }
  std::vector<TrajectoryTable::Track> tracks;
  double tick = 0.0;
  for (auto& [id, samples] : rows) {
    std::stable_sort(samples.begin(), samples.end(),
                     [](const VehicleState& a, const VehicleState& b) { return a.t < b.t; });
    if (tick == 0.0 && samples.size() >= 2) tick = samples[1].t - samples[0].t;
    tracks.push_back({id, std::move(samples)});
  }
  if (tick == 0.0) tick = 0.1;
  // Traces carry 3-decimal timestamps.
  tick = std::round(tick * 1000.0) / 1000.0;
  return TrajectoryTable(std::move(tracks), tick);
}

void write_trace(const TrajectoryTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file " + path.string());
  out << kTraceHeader << '\n';
  out.precision(17);
  for (const auto& tr : table.tracks()) {
    for (const auto& s : tr.samples) {
      char tbuf[32];
      std::snprintf(tbuf, sizeof tbuf, "%.3f", s.t);
      out << tbuf << ',' << s.id << ',' << s.x << ',' << s.y << ',' << s.speed << ','
          << s.heading << ',' << s.lane << '\n';
    }
  }
}

TrajectoryTable generate_krauss_trajectories(int count, const RoadConfig& road,
                                             const KraussParams& params, double duration,
                                             double tick, Rng& init_rng, Rng& mobility_rng,
                                             MobilityStats* stats) {
  if (count < 1) throw DomainError("need at least one vehicle");
  if (!(tick > 0)) throw DomainError("mobility tick must be positive");
  if (!(duration >= 0)) throw DomainError("duration must be >= 0");
  params.validate();
  const CircuitGeometry geo(road);

  std::vector<int> per_lane(static_cast<std::size_t>(road.lanes), 0);
  for (int i = 0; i < count; ++i) ++per_lane[static_cast<std::size_t>(i % road.lanes)];
  for (int k = 0; k < road.lanes; ++k) {
    const int n = per_lane[static_cast<std::size_t>(k)];
    if (n > 0 && geo.lane_length(k) / n < params.vehicle_length + params.min_gap) {
      throw DomainError("too many vehicles for the circuit");
    }
  }

  std::vector<Agent> agents;
  agents.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int lane = i % road.lanes;
    const int slot = i / road.lanes;
    const double spacing = geo.lane_length(lane) / per_lane[static_cast<std::size_t>(lane)];
    const double speed = init_rng.uniform(5.0, params.max_speed);
    agents.push_back(Agent{i, lane, slot * spacing, speed, -kInf});
  }

  const auto steps = static_cast<std::size_t>(std::llround(std::ceil(duration / tick - 1e-9)));
  std::vector<TrajectoryTable::Track> tracks(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    tracks[i].id = agents[i].id;
    tracks[i].samples.reserve(steps + 1);
    tracks[i].samples.push_back(to_state(agents[i], geo, 0.0));
  }
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t_prev = static_cast<double>(k - 1) * tick;
    advance(agents, geo, params, tick, t_prev, mobility_rng, stats);
    const double t = static_cast<double>(k) * tick;
    for (std::size_t i = 0; i < agents.size(); ++i) {
      tracks[i].samples.push_back(to_state(agents[i], geo, t));
    }
  }
  return TrajectoryTable(std::move(tracks), tick);
}

}  // namespace taoi
