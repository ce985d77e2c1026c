#include "taoi/channel.hpp"

#include <algorithm>
#include <cmath>

#include "taoi/errors.hpp"

namespace taoi {

void ChannelConfig::validate() const {
  if (!(path_loss_exponent > 0)) throw DomainError("path loss exponent must be positive");
  if (cw < 1) throw DomainError("contention window must be >= 1");
  if (!(data_rate_mbps > 0)) throw DomainError("data rate must be positive");
  if (!(slot_time_us > 0) || !(aifs_us >= 0) || !(preamble_overhead_us >= 0)) {
    throw DomainError("MAC timing values must be non-negative (slot > 0)");
  }
  if (nakagami_m_bins.empty()) throw DomainError("nakagami_m_bins must not be empty");
  double prev = 0.0;
  for (const auto& b : nakagami_m_bins) {
    if (!(b.upper_m > prev)) throw DomainError("nakagami_m_bins bounds must increase");
    if (!(b.m > 0)) throw DomainError("nakagami m must be positive");
    prev = b.upper_m;
  }
}

double path_loss_db(double d, const ChannelConfig& cfg) {
  if (!(d > 0)) throw DomainError("path loss needs d > 0");
  return cfg.reference_loss_db + 10.0 * cfg.path_loss_exponent * std::log10(d);
}

double nakagami_m(double d, const ChannelConfig& cfg) {
  for (const auto& b : cfg.nakagami_m_bins) {
    if (d < b.upper_m) return b.m;
  }
  return cfg.nakagami_m_bins.back().m;
}

double nakagami_fading_draw(Rng& rng, double d, const ChannelConfig& cfg) {
  const double m = nakagami_m(d, cfg);
  return rng.gamma(m, 1.0 / m);
}

double rx_power_dbm(double tx_power_dbm, double d, double fading, const ChannelConfig& cfg) {
  if (!(fading > 0)) throw DomainError("fading multiplier must be positive");
  return tx_power_dbm - path_loss_db(d, cfg) + 10.0 * std::log10(fading);
}

double tx_duration(int size_bytes, double rate_mbps, const ChannelConfig& cfg) {
  if (size_bytes <= 0 || !(rate_mbps > 0)) throw DomainError("tx_duration needs size, rate > 0");
  return 8.0 * size_bytes / (rate_mbps * 1e6) + cfg.preamble_overhead_us * 1e-6;
}

double range_for_threshold(double threshold_dbm, const ChannelConfig& cfg) {
  return std::pow(10.0, (cfg.tx_power_dbm - cfg.reference_loss_db - threshold_dbm) /
                            (10.0 * cfg.path_loss_exponent));
}

// --- CSMA --------------------------------------------------------------------

void CsmaAccess::request(double t, bool medium_busy, int backoff_draw) {
  pending_draw_ = backoff_draw;
  if (medium_busy) {
    backoff_ = pending_draw_;
    phase_ = Phase::Deferring;
  } else {
    backoff_ = -1;
    idle_since_ = t;
    phase_ = Phase::Counting;
  }
}

void CsmaAccess::on_busy(double t, const ChannelConfig& cfg) {
  if (phase_ != Phase::Counting) return;
  // A frame due at this very instant goes out regardless (same-slot collision).
  if (t >= attempt_time(cfg) - 1e-12) return;
  if (backoff_ < 0) {
    backoff_ = pending_draw_;
  } else {
    const double counted_from = idle_since_ + cfg.aifs_s();
    if (t > counted_from) {
      const auto elapsed = static_cast<int>(std::floor((t - counted_from) / cfg.slot_time_s() + 1e-9));
      backoff_ = std::max(0, backoff_ - elapsed);
    }
  }
  phase_ = Phase::Deferring;
}

void CsmaAccess::on_idle(double t) {
  if (phase_ != Phase::Deferring) return;
  idle_since_ = t;
  phase_ = Phase::Counting;
}

void CsmaAccess::on_transmit() {
  phase_ = Phase::Idle;
  backoff_ = -1;
}

double CsmaAccess::attempt_time(const ChannelConfig& cfg) const {
  return idle_since_ + cfg.aifs_s() + std::max(backoff_, 0) * cfg.slot_time_s();
}

double csma_access_with_backoff(double intended_start, std::span<const BusyInterval> timeline,
                                int backoff_draw, const ChannelConfig& cfg) {
  std::vector<BusyInterval> busy(timeline.begin(), timeline.end());
  std::sort(busy.begin(), busy.end(),
            [](const BusyInterval& a, const BusyInterval& b) { return a.start < b.start; });
  // Merge overlapping intervals: the station only sees busy/idle transitions.
  std::vector<BusyInterval> merged;
  for (const auto& b : busy) {
    if (!merged.empty() && b.start <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, b.end);
    } else {
      merged.push_back(b);
    }
  }

  CsmaAccess mac;
  std::size_t next = 0;
  while (next < merged.size() && merged[next].end <= intended_start) ++next;
  const bool busy_now = next < merged.size() && merged[next].start <= intended_start;
  mac.request(intended_start, busy_now, backoff_draw);
  if (busy_now) {
    mac.on_idle(merged[next].end);
    ++next;
  }
  for (;;) {
    const double attempt = mac.attempt_time(cfg);
    if (next >= merged.size() || merged[next].start >= attempt) return attempt;
    mac.on_busy(merged[next].start, cfg);
    mac.on_idle(merged[next].end);
    ++next;
  }
}

double csma_access(double intended_start, std::span<const BusyInterval> timeline, Rng& rng,
                   const ChannelConfig& cfg) {
  const int draw = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cfg.cw)));
  return csma_access_with_backoff(intended_start, timeline, draw, cfg);
}

std::vector<VehicleId> delivery_outcome(const TransmissionEvent& tx,
                                        std::span<const VehicleState> receivers,
                                        std::span<const TransmissionEvent> concurrent, Rng& rng,
                                        const ChannelConfig& cfg) {
  std::vector<VehicleId> ok;
  for (const auto& r : receivers) {
    if (r.id == tx.sender) throw DomainError("receivers must exclude the sender");
    const double d = std::max(std::hypot(r.x - tx.x, r.y - tx.y), 1e-3);
    const double fading = nakagami_fading_draw(rng, d, cfg);
    if (rx_power_dbm(cfg.tx_power_dbm, d, fading, cfg) < cfg.rx_sensitivity_dbm) continue;
    bool interfered = false;
    for (const auto& other : concurrent) {
      if (&other == &tx || (other.sender == tx.sender && other.start == tx.start)) continue;
      if (!other.overlaps(tx)) continue;
      if (other.sender == r.id) {
        interfered = true;  // half duplex
        break;
      }
      const double di = std::max(std::hypot(r.x - other.x, r.y - other.y), 1e-3);
      if (rx_power_dbm(cfg.tx_power_dbm, di, 1.0, cfg) >= cfg.carrier_sense_threshold_dbm) {
        interfered = true;
        break;
      }
    }
    if (!interfered) ok.push_back(r.id);
  }
  return ok;
}

}  // namespace taoi
