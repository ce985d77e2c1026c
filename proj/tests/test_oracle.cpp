#include "doctest.h"

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "taoi/errors.hpp"
#include "taoi/oracle.hpp"
#include "taoi/rng.hpp"

using namespace taoi;

namespace {

constexpr int U = 0;
constexpr int V = 1;

Assignment alternating() { return {{U}, {V}, {U}, {V}, {U}, {V}}; }
Assignment u_then_v() { return {{U}, {V}, {V}, {V}, {V}, {V}}; }

// Independent slot recurrence for the two-vehicle instance (motion along y only).
struct Hand {
  std::vector<std::int64_t> aoi;
  std::vector<double> yhat;
  std::vector<double> te;
};

Hand by_hand(const Assignment& a, int sender, double (*y)(double), double (*dy)(double)) {
  Hand h;
  std::int64_t age = 0;
  int last = -1;
  for (int t = 1; t <= static_cast<int>(a.size()); ++t) {
    const auto& slot = a[static_cast<std::size_t>(t - 1)];
    const bool tx = std::find(slot.begin(), slot.end(), sender) != slot.end();
    age = tx ? 0 : age + 1;
    const double est = last < 0 ? 0.0 : y(last) + dy(last) * (t - last);
    h.aoi.push_back(age);
    h.yhat.push_back(est);
    h.te.push_back(std::abs(y(t) - est));
    if (tx) last = t;
  }
  return h;
}

double y_u(double t) { return 2 * t; }
double dy_u(double) { return 2; }
double y_v(double t) { return t * t; }
double dy_v(double t) { return 2 * t; }

std::vector<double> ys(const std::vector<Point>& p) {
  std::vector<double> out;
  for (const auto& q : p) out.push_back(q.y);
  return out;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("rational arithmetic") {
  CHECK(Rational(2, 4) == Rational(1, 2));
  CHECK(Rational(1, -2) == Rational(-1, 2));
  CHECK(Rational(1, 2) + Rational(1, 3) == Rational(5, 6));
  CHECK(Rational(2, 3) * Rational(3, 4) == Rational(1, 2));
  CHECK(Rational(1, 2) / Rational(1, 4) == Rational(2));
  CHECK(Rational(1, 3) < Rational(1, 2));
  CHECK(Rational(4, 3).str() == "4/3");
  CHECK(Rational(3).str() == "3");
  CHECK(Rational(4, 3).to_double() == doctest::Approx(1.3333333));
  CHECK_THROWS_AS(Rational(1, 0), DomainError);
}

TEST_CASE("toy replay: alternating schedule") {
  const auto p = toy_problem();
  const SlotTables t = replay_schedule(p, alternating());
  CHECK(t.aoi[U][V] == std::vector<std::int64_t>{0, 1, 0, 1, 0, 1});
  CHECK(t.aoi[V][U] == std::vector<std::int64_t>{1, 0, 1, 0, 1, 0});
  CHECK(ys(t.estimate[V][U]) == std::vector<double>{0, 0, 8, 12, 24, 32});
  CHECK(t.te[V][U] == std::vector<double>{1, 4, 1, 4, 1, 4});
  CHECK(t.te[U][V] == std::vector<double>{2, 0, 0, 0, 0, 0});
  CHECK(t.system_aoi == Rational(1, 2));
  CHECK(t.pair_aoi(U, V) == Rational(1, 2));
  CHECK(t.pair_te(V, U) == doctest::Approx(2.5));
}

TEST_CASE("toy replay: u once, then v") {
  const auto p = toy_problem();
  const SlotTables t = replay_schedule(p, u_then_v());
  CHECK(t.aoi[U][V] == std::vector<std::int64_t>{0, 1, 2, 3, 4, 5});
  CHECK(t.aoi[V][U] == std::vector<std::int64_t>{1, 0, 0, 0, 0, 0});
  CHECK(t.te[V][U] == std::vector<double>{1, 4, 1, 1, 1, 1});
  CHECK(t.pair_aoi(U, V) == Rational(15, 6));
  CHECK(t.pair_aoi(V, U) == Rational(1, 6));
  CHECK(t.system_aoi == Rational(4, 3));
  CHECK(std::abs(t.system_aoi.to_double() - 1.334) <= 1e-3);
  CHECK(t.pair_te(V, U) == doctest::Approx(1.5));
  // u never risky (constant speed), v always risky: only the v -> u pairs count.
  CHECK(t.system_taoi == t.pair_aoi(V, U) / Rational(2));
}

TEST_CASE("replay agrees with an independent recurrence on random schedules") {
  const auto p = toy_problem();
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    Assignment a(6);
    for (auto& slot : a) {
      const auto pick = rng.uniform_int(3);
      if (pick < 2) slot.push_back(static_cast<int>(pick));
    }
    const SlotTables t = replay_schedule(p, a);
    const Hand hu = by_hand(a, U, y_u, dy_u);
    const Hand hv = by_hand(a, V, y_v, dy_v);
    CHECK(t.aoi[U][V] == hu.aoi);
    CHECK(t.aoi[V][U] == hv.aoi);
    CHECK(ys(t.estimate[U][V]) == hu.yhat);
    CHECK(ys(t.estimate[V][U]) == hv.yhat);
    CHECK(t.te[U][V] == hu.te);
    CHECK(t.te[V][U] == hv.te);
    const double sys = (std::accumulate(hu.aoi.begin(), hu.aoi.end(), 0.0) +
                        std::accumulate(hv.aoi.begin(), hv.aoi.end(), 0.0)) / 12.0;
    CHECK(t.system_aoi.to_double() == doctest::Approx(sys));
    CHECK(t.sum_te == doctest::Approx(std::accumulate(hu.te.begin(), hu.te.end(), 0.0) +
                                      std::accumulate(hv.te.begin(), hv.te.end(), 0.0)));
  }
}

TEST_CASE("stationary vehicles have zero TE after the first reception") {
  ScheduleProblem p = toy_problem();
  p.vehicles = {Motion{{3.0}, {1.0}}, Motion{{-2.0}, {5.0}}};
  const SlotTables t = replay_schedule(p, alternating());
  for (int s : {U, V}) {
    const int r = 1 - s;
    for (int k = 0; k < 6; ++k) {
      if (k > s) CHECK(t.te[s][r][static_cast<std::size_t>(k)] == 0.0);
    }
  }
}

TEST_CASE("replay rejects infeasible assignments") {
  const auto p = toy_problem();
  CHECK_THROWS_AS(replay_schedule(p, {{U, V}, {}, {}, {}, {}, {}}), DomainError);
  CHECK_THROWS_AS(replay_schedule(p, {{U}, {V}}), DomainError);
  CHECK_THROWS_AS(replay_schedule(p, {{7}, {}, {}, {}, {}, {}}), DomainError);
}

TEST_CASE("enumeration: system AoI optimum is the alternating schedule") {
  const ScheduleSolution s = enumerate_optimal(toy_problem(6, Objective::SystemAoi));
  CHECK(s.objective_value == doctest::Approx(0.5));
  CHECK(s.tables.system_aoi == Rational(1, 2));
  CHECK(s.assignment == alternating());
  CHECK(s.evaluated > 0);
}

TEST_CASE("enumeration: the safety optimum differs from the AoI optimum") {
  const ScheduleSolution te = enumerate_optimal(toy_problem(6, Objective::SumTe));
  const double te_vu = mean(te.tables.te[V][U]);
  CHECK(te_vu <= 1.5 + 1e-12);
  const ScheduleSolution aoi = enumerate_optimal(toy_problem(6, Objective::SystemAoi));
  CHECK(mean(aoi.tables.te[V][U]) == doctest::Approx(2.5));
  CHECK(mean(aoi.tables.te[V][U]) > te_vu);
  CHECK(te.assignment != aoi.assignment);
}

TEST_CASE("enumeration: optimum is no worse than any schedule") {
  for (Objective o : {Objective::SystemAoi, Objective::SystemTaoi, Objective::SumTe}) {
    const auto p = toy_problem(5, o);
    const ScheduleSolution best = enumerate_optimal(p);
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
      Assignment a(5);
      for (auto& slot : a) {
        const auto pick = rng.uniform_int(3);
        if (pick < 2) slot.push_back(static_cast<int>(pick));
      }
      bool feasible = true;
      for (int v : {U, V}) {
        int n = 0;
        for (const auto& slot : a) n += static_cast<int>(std::count(slot.begin(), slot.end(), v));
        feasible = feasible && n >= p.r_min;
      }
      if (!feasible) continue;
      CHECK(best.objective_value <= objective_value(replay_schedule(p, a), o) + 1e-9);
    }
  }
}

TEST_CASE("enumeration: unconstrained capacity reaches the floor") {
  ScheduleProblem p = toy_problem(4, Objective::SystemAoi);
  p.capacity = 2;
  const ScheduleSolution s = enumerate_optimal(p);
  CHECK(s.objective_value == 0.0);
  for (const auto& slot : s.assignment) CHECK(slot.size() == 2);
}

TEST_CASE("enumeration: bounds are enforced") {
  ScheduleProblem p = toy_problem(6);
  p.slots = ScheduleProblem::kMaxSlots + 1;
  CHECK_THROWS_AS(enumerate_optimal(p), DomainError);
  p = toy_problem(6);
  p.vehicles.push_back(Motion{{0.0}, {1.0}});
  p.vehicles.push_back(Motion{{0.0}, {2.0}});
  CHECK_THROWS_AS(enumerate_optimal(p), DomainError);
  p = toy_problem(3);
  p.r_min = 2;
  CHECK_THROWS_AS(enumerate_optimal(p), DomainError);
  CHECK_THROWS_AS(parse_objective("latency"), DomainError);
}

TEST_CASE("slot table CSV layout") {
  const auto p = toy_problem();
  std::ostringstream out;
  write_slot_table(out, p, alternating(), replay_schedule(p, alternating()));
  const std::string csv = out.str();
  CHECK(csv.rfind("quantity,t1,t2,t3,t4,t5,t6,average\n", 0) == 0);
  CHECK(csv.find("aoi_uv,0,1,0,1,0,1,1/2\n") != std::string::npos);
  CHECK(csv.find("te_vu,1,4,1,4,1,4,2.5\n") != std::string::npos);
  CHECK(csv.find("system_aoi,1/2\n") != std::string::npos);
}
