#pragma once

#include <limits>
#include <span>
#include <vector>

#include "taoi/bsm.hpp"
#include "taoi/rng.hpp"

namespace taoi {

struct NakagamiBin {
  double upper_m;  // distance bound (exclusive)
  double m;
};

struct ChannelConfig {
  double tx_power_dbm = 20.0;
  double freq_ghz = 5.9;
  double bandwidth_mhz = 10.0;
  double data_rate_mbps = 6.0;
  double path_loss_exponent = 3.0;
  double reference_loss_db = 47.86;  // free-space loss at 1 m, 5.9 GHz
  double rx_sensitivity_dbm = -101.0;
  double carrier_sense_threshold_dbm = -101.0;
  double slot_time_us = 13.0;
  double aifs_us = 58.0;
  int cw = 15;
  double preamble_overhead_us = 40.0;
  std::vector<NakagamiBin> nakagami_m_bins{
      {80.0, 3.0}, {200.0, 1.5}, {std::numeric_limits<double>::infinity(), 1.0}};

  void validate() const;
  double slot_time_s() const { return slot_time_us * 1e-6; }
  double aifs_s() const { return aifs_us * 1e-6; }
};

/// PL(d) = reference_loss + 10*gamma*log10(d / 1 m).
double path_loss_db(double d, const ChannelConfig& cfg);

/// Nakagami shape parameter for distance d.
double nakagami_m(double d, const ChannelConfig& cfg);

/// Unit-mean power multiplier ~ Gamma(m(d), 1/m(d)).
double nakagami_fading_draw(Rng& rng, double d, const ChannelConfig& cfg);

double rx_power_dbm(double tx_power_dbm, double d, double fading, const ChannelConfig& cfg);

/// Frame airtime: 8*size/(rate*1e6) + preamble_overhead, in seconds.
double tx_duration(int size_bytes, double rate_mbps, const ChannelConfig& cfg);

/// Distance at which the mean (fading-free) received power equals `threshold_dbm`.
double range_for_threshold(double threshold_dbm, const ChannelConfig& cfg);

/// Decode range: mean received power equals the receiver sensitivity.
inline double nominal_range(const ChannelConfig& cfg) {
  return range_for_threshold(cfg.rx_sensitivity_dbm, cfg);
}

/// Carrier-sense range: mean received power equals the carrier-sense threshold.
inline double sensing_range(const ChannelConfig& cfg) {
  return range_for_threshold(cfg.carrier_sense_threshold_dbm, cfg);
}

/// One frame on the air.
struct TransmissionEvent {
  VehicleId sender = 0;
  double start = 0.0;     // s
  double duration = 0.0;  // s
  double x = 0.0;         // sender position at start
  double y = 0.0;
  Bsm bsm;

  double end() const { return start + duration; }
  bool overlaps(const TransmissionEvent& o) const {
    return start < o.end() && o.start < end();
  }
};

/// Listen-before-talk access state of one station.
///
/// A frame that finds the medium idle waits AIFS and goes out. A frame that
/// finds it busy (or sees it turn busy during AIFS) defers until idle, waits
/// AIFS, then counts down a backoff of uniform [0, cw) slots; the counter
/// freezes while the medium is busy. Broadcast frames get no retransmission
/// and no contention-window doubling.
class CsmaAccess {
public:
  enum class Phase { Idle, Deferring, Counting };

  /// A frame is ready at `t`. `backoff_draw` is the counter used if the
  /// frame has to back off; callers draw it up front so RNG consumption does
  /// not depend on medium history.
  void request(double t, bool medium_busy, int backoff_draw);
  /// Medium sensed busy at `t`.
  void on_busy(double t, const ChannelConfig& cfg);
  /// Medium sensed idle again at `t`.
  void on_idle(double t);
  /// Frame handed to the PHY; the station returns to Idle.
  void on_transmit();

  Phase phase() const noexcept { return phase_; }
  bool has_frame() const noexcept { return phase_ != Phase::Idle; }
  /// Start instant of the frame if the medium stays idle (Counting only).
  double attempt_time(const ChannelConfig& cfg) const;
  int remaining_backoff() const noexcept { return backoff_; }

private:
  Phase phase_ = Phase::Idle;
  double idle_since_ = 0.0;
  int backoff_ = -1;  // -1: no backoff drawn (immediate access after AIFS)
  int pending_draw_ = 0;
};

/// Busy interval on the medium as sensed by one station.
struct BusyInterval {
  double start;
  double end;
};

/// Start time of a frame ready at `intended_start` for a station that senses
/// the given (known) occupancy timeline.
double csma_access(double intended_start, std::span<const BusyInterval> timeline, Rng& rng,
                   const ChannelConfig& cfg);

/// Same, with the backoff counter supplied by the caller.
double csma_access_with_backoff(double intended_start, std::span<const BusyInterval> timeline,
                                int backoff_draw, const ChannelConfig& cfg);

/// Receivers that decode `tx`: fresh-fading received power >= sensitivity and
/// no overlapping concurrent frame arriving at or above the carrier-sense
/// threshold (no capture). A receiver that is itself transmitting decodes
/// nothing. One fading draw is consumed per receiver, in the given order.
std::vector<VehicleId> delivery_outcome(const TransmissionEvent& tx,
                                        std::span<const VehicleState> receivers,
                                        std::span<const TransmissionEvent> concurrent, Rng& rng,
                                        const ChannelConfig& cfg);

}  // namespace taoi
