#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "taoi/errors.hpp"
#include "taoi/metrics.hpp"

using namespace taoi;

namespace {

VehicleState vs(VehicleId id, double x, double y, double speed, double heading, double t) {
  return VehicleState{id, x, y, speed, heading, 0, t};
}

}  // namespace

TEST_CASE("estimate position: straight-line extrapolation") {
  Bsm b;
  b.gen_time = 1.0;
  b.x = 10.0;
  b.y = 5.0;
  b.speed = 4.0;
  b.heading = std::numbers::pi / 2;
  const Point p = estimate_position(b, 3.5);
  CHECK(p.x == 10.0);
  CHECK(p.y == doctest::Approx(15.0));
  const Point same = estimate_position(b, 1.0);
  CHECK(same.x == 10.0);
  CHECK(same.y == 5.0);
  CHECK_THROWS_AS(estimate_position(b, 0.5), DomainError);
  b.heading = std::numbers::pi / 4;
  const Point diag = estimate_position(b, 2.0);
  CHECK(diag.x == doctest::Approx(10.0 + 4.0 / std::sqrt(2.0)));
  CHECK(diag.y == doctest::Approx(5.0 + 4.0 / std::sqrt(2.0)));
}

TEST_CASE("heading vector is exact on the axes") {
  CHECK(heading_vector(0.0).y == 0.0);
  CHECK(heading_vector(std::numbers::pi / 2).x == 0.0);
  CHECK(heading_vector(std::numbers::pi).y == 0.0);
  CHECK(heading_vector(-std::numbers::pi / 2).x == 0.0);
  CHECK(heading_vector(-std::numbers::pi / 2).y == -1.0);
}

TEST_CASE("tracking error is the Euclidean distance") {
  CHECK(tracking_error(vs(1, 3, 4, 0, 0, 0), Point{0, 0}) == doctest::Approx(5.0));
  CHECK(tracking_error(vs(1, 3, 4, 0, 0, 0), Point{3, 4}) == 0.0);
}

TEST_CASE("average tracking error over the toy rows") {
  const std::vector<double> alternating{1, 4, 1, 4, 1, 4};
  const std::vector<double> once{1, 4, 1, 1, 1, 1};
  CHECK(average_tracking_error(alternating) == doctest::Approx(2.5));
  CHECK(average_tracking_error(once) == doctest::Approx(1.5));
  CHECK(average_tracking_error(std::vector<double>(6, 0.0)) == 0.0);
  CHECK_THROWS_AS(average_tracking_error(std::vector<double>{}), UndefinedValueError);
}

TEST_CASE("self tracking error") {
  SUBCASE("constant velocity gives zero") {
    CHECK(self_tracking_error(vs(1, 25, 0, 5, 0, 5), vs(1, 20, 0, 5, 0, 4), 1.0) == 0.0);
  }
  SUBCASE("y = t^2 at t = 2 over one second") {
    // Previous state at t = 1: y = 1, speed 2 along +y. Estimate 3, truth 4.
    const auto prev = vs(1, 0, 1, 2, std::numbers::pi / 2, 1);
    const auto now = vs(1, 0, 4, 4, std::numbers::pi / 2, 2);
    CHECK(self_tracking_error(now, prev, 1.0) == doctest::Approx(1.0));
  }
  SUBCASE("heading turned a right angle") {
    const auto prev = vs(1, 0, 0, 10, 0, 0);
    const auto now = vs(1, 0, 10, 10, std::numbers::pi / 2, 1);
    CHECK(self_tracking_error(now, prev, 1.0) == doctest::Approx(10.0 * std::sqrt(2.0)));
  }
  SUBCASE("mismatched inputs") {
    CHECK_THROWS_AS(self_tracking_error(vs(1, 0, 0, 0, 0, 1), vs(2, 0, 0, 0, 0, 0), 1.0), DomainError);
    CHECK_THROWS_AS(self_tracking_error(vs(1, 0, 0, 0, 0, 2), vs(1, 0, 0, 0, 0, 0), 1.0), DomainError);
  }
}

TEST_CASE("relative speed is the norm of the velocity difference") {
  CHECK(relative_speed(vs(1, 0, 0, 20, 0, 0), vs(2, 0, 0, 15, 0, 0)) == doctest::Approx(5.0));
  CHECK(relative_speed(vs(1, 0, 0, 20, 0, 0), vs(2, 0, 0, 20, std::numbers::pi, 0)) ==
        doctest::Approx(40.0));
  CHECK(relative_speed(vs(1, 0, 0, 3, 0, 0), vs(2, 0, 0, 4, std::numbers::pi / 2, 0)) ==
        doctest::Approx(5.0));
}

TEST_CASE("delta TTC with the relative speed floor") {
  const SafetyParams p;
  CHECK(delta_ttc(5.0, 2.0, p) == doctest::Approx(2.5));
  CHECK(delta_ttc(0.0, 2.0, p) == 0.0);
  CHECK(delta_ttc(5.0, 0.0, p) == doctest::Approx(50.0));
  CHECK(delta_ttc(5.0, -2.0, p) == doctest::Approx(2.5));
  CHECK(delta_ttc(10.0, 2.0, p) == doctest::Approx(2 * delta_ttc(5.0, 2.0, p)));
  CHECK_THROWS_AS(delta_ttc(-1.0, 2.0, p), DomainError);
}

TEST_CASE("TTC threshold is reaction plus braking time") {
  const SafetyParams p;
  CHECK(ttc_threshold(23.0, p) == doctest::Approx(6.0));
  CHECK(ttc_threshold(0.0, p) == doctest::Approx(1.0));
  CHECK(ttc_threshold(4.6, p) == doctest::Approx(2.0));
  CHECK_THROWS_AS(ttc_threshold(-1.0, p), DomainError);
}

TEST_CASE("collision risk indicator uses strict exceedance") {
  CHECK(collision_risk_indicator(7.0, 6.0) == 1);
  CHECK(collision_risk_indicator(6.0, 6.0) == 0);
  CHECK(collision_risk_indicator(0.0, 1.0) == 0);
  for (double d = 0.0; d < 10.0; d += 0.5) {
    CHECK(collision_risk_indicator(d, 3.0) <= collision_risk_indicator(d + 0.5, 3.0));
    CHECK(collision_risk_indicator(d, 3.0) >= collision_risk_indicator(d, 3.5));
  }
}

TEST_CASE("PDR counters") {
  const auto sender = vs(0, 0, 0, 0, 0, 0);
  SUBCASE("three in range, two succeed, one bin") {
    PdrCounters c(25.0);
    const std::vector<VehicleState> rx{vs(1, 5, 0, 0, 0, 0), vs(2, 10, 0, 0, 0, 0), vs(3, 20, 0, 0, 0, 0)};
    c.record(sender, rx, std::vector<VehicleId>{1, 3});
    CHECK(c.bin_pdr(0) == doctest::Approx(2.0 / 3.0));
    CHECK(c.overall_pdr() == doctest::Approx(2.0 / 3.0));
    CHECK(c.transmissions(0) == 1);
  }
  SUBCASE("no receivers leaves the bins empty") {
    PdrCounters c(25.0);
    c.record(sender, {}, {});
    CHECK(c.bins().empty());
    CHECK(std::isnan(c.overall_pdr()));
    CHECK(std::isnan(c.bin_pdr(0)));
  }
  SUBCASE("two transmissions over two bins") {
    PdrCounters c(25.0);
    const std::vector<VehicleState> rx{vs(1, 5, 0, 0, 0, 0), vs(2, 10, 0, 0, 0, 0),
                                       vs(3, 110, 0, 0, 0, 0), vs(4, 0, 120, 0, 0, 0)};
    c.record(sender, rx, std::vector<VehicleId>{1, 2, 3});
    c.record(sender, rx, std::vector<VehicleId>{1, 2});
    CHECK(c.bin_pdr(0) == doctest::Approx(1.0));
    CHECK(c.bin_pdr(4) == doctest::Approx(0.25));
    CHECK(std::isnan(c.bin_pdr(2)));
    CHECK(c.total_transmissions() == 2);
    PdrCounters other(25.0);
    other.record(sender, rx, std::vector<VehicleId>{});
    c.merge(other);
    CHECK(c.bin_pdr(0) == doctest::Approx(4.0 / 6.0));
    CHECK(c.transmissions(0) == 3);
  }
  SUBCASE("success outside the in-range set") {
    PdrCounters c(25.0);
    const std::vector<VehicleState> rx{vs(1, 5, 0, 0, 0, 0)};
    CHECK_THROWS_AS(c.record(sender, rx, std::vector<VehicleId>{9}), ConsistencyError);
  }
  CHECK_THROWS_AS(PdrCounters(0.0), DomainError);
}
