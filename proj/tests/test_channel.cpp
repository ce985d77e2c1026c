#include "doctest.h"

#include <cmath>
#include <vector>

#include <boost/math/distributions/gamma.hpp>

#include "taoi/channel.hpp"
#include "taoi/errors.hpp"

using namespace taoi;

namespace {

VehicleState at(VehicleId id, double x, double y = 0.0) { return VehicleState{id, x, y, 0, 0, 0, 0}; }

TransmissionEvent frame(VehicleId sender, double start, double x, double y = 0.0) {
  ChannelConfig cfg;
  TransmissionEvent tx;
  tx.sender = sender;
  tx.start = start;
  tx.duration = tx_duration(1000, cfg.data_rate_mbps, cfg);
  tx.x = x;
  tx.y = y;
  tx.bsm.sender = sender;
  return tx;
}

ChannelConfig no_fading_margin() {
  ChannelConfig cfg;
  // Very large m makes the unit-mean fading draw concentrate at 1.
  cfg.nakagami_m_bins = {{std::numeric_limits<double>::infinity(), 1e9}};
  return cfg;
}

}  // namespace

TEST_CASE("path loss: reference anchor and decade scaling") {
  const ChannelConfig cfg;
  CHECK(path_loss_db(1.0, cfg) == doctest::Approx(47.86));
  CHECK(path_loss_db(100.0, cfg) == doctest::Approx(107.86));
  CHECK(path_loss_db(100.0, cfg) - path_loss_db(10.0, cfg) == doctest::Approx(30.0));
  CHECK_THROWS_AS(path_loss_db(0.0, cfg), DomainError);
  CHECK_THROWS_AS(path_loss_db(-5.0, cfg), DomainError);
}

TEST_CASE("received power composition") {
  const ChannelConfig cfg;
  CHECK(rx_power_dbm(20.0, 1.0, 1.0, cfg) == doctest::Approx(-27.86));
  CHECK(rx_power_dbm(20.0, 100.0, 1.0, cfg) == doctest::Approx(-87.86));
  CHECK(rx_power_dbm(20.0, 100.0, 1.0, cfg) - rx_power_dbm(20.0, 100.0, 0.5, cfg) ==
        doctest::Approx(10.0 * std::log10(2.0)));
}

TEST_CASE("frame airtime") {
  ChannelConfig cfg;
  CHECK(tx_duration(1000, 6.0, cfg) == doctest::Approx(1.3733333e-3).epsilon(1e-6));
  cfg.preamble_overhead_us = 0.0;
  CHECK(tx_duration(750, 6.0, cfg) == doctest::Approx(1.0e-3));
  CHECK(tx_duration(1500, 6.0, cfg) == doctest::Approx(2 * tx_duration(750, 6.0, cfg)));
}

TEST_CASE("nominal range inverts the mean link budget") {
  const ChannelConfig cfg;
  const double r = nominal_range(cfg);
  CHECK(r == doctest::Approx(std::pow(10.0, (20.0 + 101.0 - 47.86) / 30.0)));
  CHECK(rx_power_dbm(cfg.tx_power_dbm, r, 1.0, cfg) == doctest::Approx(cfg.rx_sensitivity_dbm));
  CHECK(sensing_range(cfg) == doctest::Approx(r));
}

TEST_CASE("nakagami shape by distance bin") {
  const ChannelConfig cfg;
  CHECK(nakagami_m(10.0, cfg) == 3.0);
  CHECK(nakagami_m(79.9, cfg) == 3.0);
  CHECK(nakagami_m(80.0, cfg) == 1.5);
  CHECK(nakagami_m(199.0, cfg) == 1.5);
  CHECK(nakagami_m(500.0, cfg) == 1.0);
}

TEST_CASE("nakagami fading: unit mean, variance 1/m, gamma distributed") {
  const ChannelConfig cfg;
  for (double d : {40.0, 150.0, 300.0}) {
    const double m = nakagami_m(d, cfg);
    Rng rng(42);
    const int n = 100000;
    std::vector<double> draws(n);
    double sum = 0.0;
    for (auto& x : draws) {
      x = nakagami_fading_draw(rng, d, cfg);
      sum += x;
    }
    const double mean = sum / n;
    double var = 0.0;
    for (double x : draws) var += (x - mean) * (x - mean);
    var /= (n - 1);
    CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
    CHECK(var == doctest::Approx(1.0 / m).epsilon(0.05));

    // Empirical CDF against Gamma(m, 1/m) at a few quantiles.
    const boost::math::gamma_distribution<double> ref(m, 1.0 / m);
    for (double q : {0.1, 0.5, 0.9}) {
      const double xq = boost::math::quantile(ref, q);
      const auto below = std::count_if(draws.begin(), draws.end(), [&](double x) { return x <= xq; });
      CHECK(static_cast<double>(below) / n == doctest::Approx(q).epsilon(0.03));
    }
  }
}

TEST_CASE("csma: idle medium transmits after AIFS") {
  const ChannelConfig cfg;
  CHECK(csma_access_with_backoff(1.0, {}, 7, cfg) == doctest::Approx(1.0 + 58e-6));
  const std::vector<BusyInterval> past{{0.2, 0.3}};
  CHECK(csma_access_with_backoff(1.0, past, 7, cfg) == doctest::Approx(1.0 + 58e-6));
  Rng rng(1);
  CHECK(csma_access(2.0, {}, rng, cfg) == doctest::Approx(2.0 + 58e-6));
}

TEST_CASE("csma: busy medium defers until idle plus AIFS plus backoff") {
  const ChannelConfig cfg;
  const std::vector<BusyInterval> busy{{0.0, 1e-3}};
  for (int k : {0, 3, 14}) {
    const double start = csma_access_with_backoff(0.5e-3, busy, k, cfg);
    CHECK(start == doctest::Approx(1e-3 + 58e-6 + k * 13e-6));
  }
  Rng rng(9);
  for (int i = 0; i < 100; ++i) CHECK(csma_access(0.5e-3, busy, rng, cfg) >= 1e-3 + 58e-6);
}

TEST_CASE("csma: smaller backoff wins and the other freezes its counter") {
  const ChannelConfig cfg;
  const std::vector<BusyInterval> busy{{0.0, 1e-3}};
  const double a = csma_access_with_backoff(0.5e-3, busy, 2, cfg);
  const double b_alone = csma_access_with_backoff(0.5e-3, busy, 5, cfg);
  CHECK(a < b_alone);
  // b hears a's frame after two idle slots and resumes with three left.
  const double air = tx_duration(1000, cfg.data_rate_mbps, cfg);
  const std::vector<BusyInterval> with_a{{0.0, 1e-3}, {a, a + air}};
  const double b = csma_access_with_backoff(0.5e-3, with_a, 5, cfg);
  CHECK(b == doctest::Approx(a + air + 58e-6 + 3 * 13e-6));
  CHECK(b >= a + air);
}

TEST_CASE("csma state machine: freeze and resume") {
  const ChannelConfig cfg;
  CsmaAccess mac;
  CHECK_FALSE(mac.has_frame());
  mac.request(0.0, true, 4);
  CHECK(mac.phase() == CsmaAccess::Phase::Deferring);
  mac.on_idle(1e-3);
  CHECK(mac.phase() == CsmaAccess::Phase::Counting);
  CHECK(mac.attempt_time(cfg) == doctest::Approx(1e-3 + 58e-6 + 4 * 13e-6));
  // Busy again after AIFS plus one full slot: three slots remain.
  mac.on_busy(1e-3 + 58e-6 + 13e-6 + 1e-6, cfg);
  CHECK(mac.remaining_backoff() == 3);
  mac.on_idle(2e-3);
  CHECK(mac.attempt_time(cfg) == doctest::Approx(2e-3 + 58e-6 + 3 * 13e-6));
  mac.on_transmit();
  CHECK_FALSE(mac.has_frame());
}

TEST_CASE("delivery: close receiver decodes a lone frame") {
  const ChannelConfig cfg = no_fading_margin();
  Rng rng(1);
  const auto tx = frame(0, 0.0, 0.0);
  const std::vector<VehicleState> rx{at(1, 1.0), at(2, 100.0)};
  const auto ok = delivery_outcome(tx, rx, std::vector<TransmissionEvent>{tx}, rng, cfg);
  CHECK(ok == std::vector<VehicleId>{1, 2});
}

TEST_CASE("delivery: overlapping frames heard above threshold are both lost") {
  const ChannelConfig cfg = no_fading_margin();
  Rng rng(1);
  const auto a = frame(0, 0.0, 0.0);
  const auto b = frame(1, 0.0, 100.0);
  const std::vector<TransmissionEvent> both{a, b};
  const std::vector<VehicleState> middle{at(2, 50.0)};
  CHECK(delivery_outcome(a, middle, both, rng, cfg).empty());
  CHECK(delivery_outcome(b, middle, both, rng, cfg).empty());
}

TEST_CASE("delivery: half duplex and distant interferers") {
  const ChannelConfig cfg = no_fading_margin();
  Rng rng(1);
  const auto a = frame(0, 0.0, 0.0);
  const auto b = frame(1, 0.5e-3, 50.0);
  const std::vector<TransmissionEvent> both{a, b};
  const std::vector<VehicleState> rx{at(1, 50.0)};
  CHECK(delivery_outcome(a, rx, both, rng, cfg).empty());
  // Interferer far beyond the carrier-sense range does not block.
  const auto far = frame(3, 0.0, 5000.0);
  const std::vector<TransmissionEvent> with_far{a, far};
  CHECK(delivery_outcome(a, std::vector<VehicleState>{at(2, 20.0)}, with_far, rng, cfg) ==
        std::vector<VehicleId>{2});
  // Non-overlapping frames do not interfere.
  const auto later = frame(1, 5e-3, 30.0);
  const std::vector<TransmissionEvent> apart{a, later};
  CHECK(delivery_outcome(a, std::vector<VehicleState>{at(2, 20.0)}, apart, rng, cfg) ==
        std::vector<VehicleId>{2});
  CHECK_THROWS_AS(delivery_outcome(a, std::vector<VehicleState>{at(0, 1.0)}, both, rng, cfg),
                  DomainError);
}

TEST_CASE("delivery: beyond nominal range success rate is below one half") {
  const ChannelConfig cfg;
  Rng rng(5);
  const double d = 1.1 * nominal_range(cfg);
  const auto tx = frame(0, 0.0, 0.0);
  const std::vector<VehicleState> rx{at(1, d)};
  const std::vector<TransmissionEvent> alone{tx};
  int ok = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) ok += static_cast<int>(delivery_outcome(tx, rx, alone, rng, cfg).size());
  CHECK(static_cast<double>(ok) / trials < 0.5);
  CHECK(ok > 0);
}

TEST_CASE("delivery: success is monotone in distance without fading") {
  const ChannelConfig cfg = no_fading_margin();
  Rng rng(2);
  const auto tx = frame(0, 0.0, 0.0);
  const std::vector<TransmissionEvent> alone{tx};
  bool prev = true;
  for (double d = 10.0; d < 600.0; d += 10.0) {
    const bool ok = !delivery_outcome(tx, std::vector<VehicleState>{at(1, d)}, alone, rng, cfg).empty();
    CHECK((prev || !ok));
    prev = ok;
  }
}

TEST_CASE("channel config validation") {
  ChannelConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.cw = 0;
  CHECK_THROWS(cfg.validate());
  cfg = ChannelConfig{};
  cfg.path_loss_exponent = 0.0;
  CHECK_THROWS(cfg.validate());
}
