#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "taoi/cli.hpp"
#include "taoi/errors.hpp"
#include "taoi/engine.hpp"
#include "taoi/oracle.hpp"
#include "taoi/report.hpp"

using namespace taoi;

namespace {

SimConfig small(Protocol p, std::uint64_t seed = 3) {
  SimConfig c;
  c.vehicle_count = 20;
  c.duration = 10.0;
  c.seed = seed;
  c.protocol = p;
  return c;
}

SimConfig slotted_toy(const Assignment& schedule) {
  SimConfig c;
  c.vehicle_count = 2;
  c.duration = 6.0;
  c.channel_mode = ChannelMode::IdealizedSlotted;
  c.slot_length = 1.0;
  c.slot_capacity = 1;
  c.mobility_tick = 1.0;
  c.forced_schedule = schedule;
  return c;
}

std::map<std::pair<long, VehicleId>, double> self_te_by_mi(const RunReport& r) {
  std::map<std::pair<long, VehicleId>, double> out;
  for (const auto& m : r.timeseries) out[{std::lround(m.t * 1000), m.vehicle}] = m.self_te;
  return out;
}

}  // namespace

TEST_CASE("slotted engine reproduces the oracle on both toy schedules") {
  const ScheduleProblem p = toy_problem(6);
  const TrajectoryTable truth = sample_motions(p.vehicles, 6.0, 1.0);
  for (const Assignment& a : {table1_schedule(), table2_schedule()}) {
    const RunReport r = run_simulation(slotted_toy(a), &truth);
    REQUIRE(r.slotted.has_value());
    const SlotTables expected = replay_schedule(p, a);
    CHECK(r.slotted->aoi == expected.aoi);
    CHECK(r.slotted->te == expected.te);
    CHECK(r.slotted->system_aoi == expected.system_aoi);
    CHECK(r.slotted->system_taoi == expected.system_taoi);
    CHECK(r.slotted_schedule == a);
    CHECK(r.system_aoi == doctest::Approx(expected.system_aoi.to_double()));
  }
  CHECK(table1_schedule() == Assignment{{0}, {1}, {0}, {1}, {0}, {1}});
  CHECK(table2_schedule() == Assignment{{0}, {1}, {1}, {1}, {1}, {1}});
}

TEST_CASE("zero duration yields an empty report") {
  SimConfig c = small(Protocol::Taoi);
  c.duration = 0.0;
  const RunReport r = run_simulation(c);
  CHECK(r.timeseries.empty());
  CHECK(r.collision_risk_count == 0);
  CHECK(r.frames.transmitted == 0);
  CHECK(r.t_end == r.t_start);
}

TEST_CASE("identical configs give byte-identical reports") {
  for (Protocol p : {Protocol::Fixed10Hz, Protocol::Aoi, Protocol::Taoi}) {
    const auto a = report_to_json(run_simulation(small(p))).dump();
    const auto b = report_to_json(run_simulation(small(p))).dump();
    CHECK(a == b);
  }
  CHECK(report_to_json(run_simulation(small(Protocol::Taoi, 3))).dump() !=
        report_to_json(run_simulation(small(Protocol::Taoi, 4))).dump());
}

TEST_CASE("mobility does not depend on the protocol") {
  MobilityStats sa, sb;
  SimConfig a = small(Protocol::Fixed10Hz);
  SimConfig b = small(Protocol::Taoi);
  const TrajectoryTable ta = build_mobility(a, &sa);
  const TrajectoryTable tb = build_mobility(b, &sb);
  CHECK(std::ranges::equal(ta.tracks(), tb.tracks()));
  CHECK(sa.lane_changes == sb.lane_changes);
  const auto ra = self_te_by_mi(run_simulation(a));
  const auto rb = self_te_by_mi(run_simulation(b));
  CHECK(ra.size() == rb.size());
  CHECK(ra == rb);
}

TEST_CASE("intervals stay within bounds and frames are conserved") {
  for (Protocol p : {Protocol::Fixed10Hz, Protocol::Aoi, Protocol::Taoi}) {
    SimConfig c = small(p);
    c.vehicle_count = 40;
    const RunReport r = run_simulation(c);
    REQUIRE_FALSE(r.timeseries.empty());
    for (const auto& m : r.timeseries) {
      CHECK(m.delta_ms >= c.controller.delta_min * 1e3 - 1e-9);
      CHECK(m.delta_ms <= c.controller.delta_max * 1e3 + 1e-9);
      if (p == Protocol::Fixed10Hz) CHECK(m.delta_ms == doctest::Approx(100.0));
    }
    const auto& f = r.frames;
    CHECK(f.generated == f.transmitted + f.replaced + f.queued + f.in_flight);
    CHECK(f.transmitted > 0);
    CHECK(f.out_of_range_receptions <= f.receptions);
    std::uint64_t tx = 0;
    for (const auto& v : r.vehicles) tx += v.transmissions;
    CHECK(tx == f.transmitted);
    CHECK(r.system_taoi <= r.system_aoi + 1e-12);
    CHECK(r.overall_pdr >= 0.0);
    CHECK(r.overall_pdr <= 1.0);
  }
}

TEST_CASE("constant velocity vehicles keep the initial interval") {
  // Three vehicles on parallel straight lines, well within range.
  const std::vector<Motion> motions{Motion{{0.0, 10.0}, {0.0}}, Motion{{30.0, 10.0}, {4.0}},
                                    Motion{{60.0, 10.0}, {8.0}}};
  const TrajectoryTable truth = sample_motions(motions, 20.0, 0.1);
  SimConfig c;
  c.vehicle_count = 3;
  c.duration = 20.0;
  c.protocol = Protocol::Taoi;
  const RunReport r = run_simulation(c, &truth);
  REQUIRE_FALSE(r.timeseries.empty());
  for (const auto& m : r.timeseries) {
    CHECK(m.self_te == doctest::Approx(0.0).epsilon(1e-9));
    CHECK_FALSE(m.flag);
    CHECK(m.delta_ms == doctest::Approx(100.0));
  }
  CHECK(r.system_taoi == 0.0);
  CHECK(r.collision_risk_count == 0);
}

TEST_CASE("a zero threshold makes TAoI equal AoI") {
  for (Protocol p : {Protocol::Aoi, Protocol::Taoi}) {
    SimConfig c = small(p);
    c.safety.te_threshold = 0.0;
    const RunReport r = run_simulation(c);
    CHECK(r.system_taoi == doctest::Approx(r.system_aoi).epsilon(1e-12));
    for (const auto& m : r.timeseries) CHECK(m.flag);
  }
}

TEST_CASE("risky MIs decrease as the threshold rises") {
  std::uint64_t prev = std::numeric_limits<std::uint64_t>::max();
  for (double th : {0.0, 0.1, 0.5, 1.0, 2.0}) {
    SimConfig c = small(Protocol::Fixed10Hz);
    c.safety.te_threshold = th;
    const RunReport r = run_simulation(c);
    std::uint64_t risky = 0;
    for (const auto& m : r.timeseries) risky += m.flag ? 1 : 0;
    CHECK(risky <= prev);
    prev = risky;
  }
}

TEST_CASE("config validation names the offending key") {
  auto key_of = [](SimConfig c) {
    try {
      c.validate();
    } catch (const ConfigError& e) {
      return e.key_path();
    }
    return std::string{};
  };
  SimConfig c;
  CHECK(key_of(c).empty());
  c.vehicle_count = 1;
  CHECK(key_of(c) == "vehicle_count");
  c = SimConfig{};
  c.duration = -1.0;
  CHECK(key_of(c) == "duration");
  c = SimConfig{};
  c.generation_jitter = 0.05;
  CHECK(key_of(c) == "generation_jitter");
  c = SimConfig{};
  c.channel.cw = 0;
  CHECK(key_of(c) == "channel");
  c = SimConfig{};
  c.vehicle_count = 2;
  c.forced_schedule = Assignment{{0, 1}};
  CHECK(key_of(c) == "forced_schedule");
  c.forced_schedule = Assignment{{5}};
  CHECK(key_of(c) == "forced_schedule");
  CHECK_THROWS_AS(run_simulation(SimConfig{.vehicle_count = 1}), ConfigError);
}

TEST_CASE("generation jitter keeps runs deterministic") {
  SimConfig c = small(Protocol::Fixed10Hz);
  c.generation_jitter = 0.01;
  const auto a = report_to_json(run_simulation(c)).dump();
  CHECK(a == report_to_json(run_simulation(c)).dump());
  const RunReport r = run_simulation(c);
  CHECK(r.frames.generated > 0);
}
