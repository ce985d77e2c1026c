#include "taoi/aoi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "taoi/errors.hpp"

namespace taoi {

// --- NeighborRecord ----------------------------------------------------------

const Bsm& NeighborRecord::last_bsm() const {
  if (!has_bsm_) throw UndefinedValueError("no BSM received from this neighbor");
  return last_bsm_;
}

void NeighborRecord::advance(double t) {
  if (!live_ || t <= last_update_) return;
  const double a0 = last_update_ - last_bsm_.gen_time;
  const double a1 = t - last_bsm_.gen_time;
  const double piece = 0.5 * (a0 + a1) * (t - last_update_);
  area_ += piece;
  window_area_ += piece;
  if (gate_) {
    gated_area_ += piece;
    window_gated_area_ += piece;
  }
  last_update_ = t;
}

void NeighborRecord::receive(const Bsm& bsm, double t, TaoiGate gating) {
  if (bsm.gen_time > t + 1e-12) {
    throw DomainError("BSM generated after its reception (clock inconsistency)");
  }
  if (live_) {
    advance(t);
    last_seen_ = t;
    if (bsm.gen_time < last_bsm_.gen_time) return;  // older than what we hold
  }
  last_bsm_ = bsm;
  has_bsm_ = true;
  live_ = true;
  last_reception_ = t;
  last_seen_ = t;
  last_update_ = t;
  if (gating == TaoiGate::Sender) gate_ = bsm.risky;
  if (bsm.risky) {
    risky_in_window_ = true;
    risky_ever_ = true;
  }
}

void NeighborRecord::set_gate(bool gate, double t) {
  advance(t);
  gate_ = gate;
}

void NeighborRecord::evict(double t) {
  advance(t);
  live_ = false;
}

double NeighborRecord::instantaneous_aoi(double t) const {
  if (!has_bsm_) throw UndefinedValueError("no BSM received from this neighbor");
  if (t < last_reception_) throw DomainError("query precedes the last reception");
  return t - last_bsm_.gen_time;
}

double NeighborRecord::instantaneous_taoi(double t) const {
  const double a = instantaneous_aoi(t);
  return gate_ ? a : 0.0;
}

void NeighborRecord::reset_window() {
  window_area_ = 0.0;
  window_gated_area_ = 0.0;
  risky_in_window_ = live_ && neighbor_risky();
}

// --- free functions ----------------------------------------------------------

namespace {

std::vector<ReceptionSample> sorted(std::span<const ReceptionSample> r) {
  std::vector<ReceptionSample> v(r.begin(), r.end());
  std::stable_sort(v.begin(), v.end(), [](const ReceptionSample& a, const ReceptionSample& b) {
    return a.reception_time < b.reception_time;
  });
  return v;
}

}  // namespace

double instantaneous_aoi(std::span<const ReceptionSample> receptions, double t) {
  bool any = false;
  double freshest = 0.0;
  for (const auto& r : receptions) {
    if (r.reception_time <= t) {
      freshest = any ? std::max(freshest, r.gen_time) : r.gen_time;
      any = true;
    }
  }
  if (!any) throw UndefinedValueError("no reception before t");
  return t - freshest;
}

double average_pairwise_aoi(std::span<const ReceptionSample> receptions, double t0, double t1) {
  if (!(t1 > t0)) throw UndefinedValueError("empty averaging window");
  const auto rx = sorted(receptions);
  double area = 0.0;
  bool any = false;
  double freshest = 0.0;
  double seg_start = 0.0;
  auto add_segment = [&](double a, double b) {
    const double lo = std::max(a, t0);
    const double hi = std::min(b, t1);
    if (hi <= lo) return;
    area += 0.5 * ((lo - freshest) + (hi - freshest)) * (hi - lo);
  };
  for (const auto& r : rx) {
    if (any) add_segment(seg_start, r.reception_time);
    freshest = any ? std::max(freshest, r.gen_time) : r.gen_time;
    any = true;
    seg_start = r.reception_time;
  }
  if (any) add_segment(seg_start, t1);
  return area / (t1 - t0);
}

double vehicle_aoi(std::span<const double> pairwise) {
  if (pairwise.empty()) throw UndefinedValueError("vehicle has no neighbors");
  return std::accumulate(pairwise.begin(), pairwise.end(), 0.0) /
         static_cast<double>(pairwise.size());
}

double system_aoi(std::span<const double> pairwise, int vehicle_count) {
  if (vehicle_count < 2) throw DomainError("system AoI needs at least two vehicles");
  const double n = vehicle_count;
  return std::accumulate(pairwise.begin(), pairwise.end(), 0.0) / (n * (n - 1));
}

// --- AoiLedger ---------------------------------------------------------------

AoiLedger::AoiLedger(int vehicle_count, TaoiGate gating, double eviction_timeout)
    : n_(vehicle_count),
      gating_(gating),
      eviction_timeout_(eviction_timeout),
      records_(static_cast<std::size_t>(vehicle_count) * static_cast<std::size_t>(vehicle_count)),
      receiver_flag_(static_cast<std::size_t>(vehicle_count), false) {
  if (vehicle_count < 1) throw DomainError("ledger needs at least one vehicle");
  for (int v = 0; v < n_; ++v) {
    for (int u = 0; u < n_; ++u) records_[index(v, u)] = NeighborRecord(u);
  }
}

std::size_t AoiLedger::index(VehicleId receiver, VehicleId sender) const {
  if (receiver < 0 || receiver >= n_ || sender < 0 || sender >= n_) {
    throw DomainError("vehicle index out of range");
  }
  return static_cast<std::size_t>(receiver) * static_cast<std::size_t>(n_) +
         static_cast<std::size_t>(sender);
}

const NeighborRecord* AoiLedger::record(VehicleId receiver, VehicleId sender) const {
  return &records_[index(receiver, sender)];
}

NeighborRecord* AoiLedger::record(VehicleId receiver, VehicleId sender) {
  return &records_[index(receiver, sender)];
}

void AoiLedger::on_reception(VehicleId receiver, const Bsm& bsm, double t) {
  if (receiver == bsm.sender) throw DomainError("a vehicle does not receive its own BSM");
  NeighborRecord& r = records_[index(receiver, bsm.sender)];
  if (r.live() && t - r.last_seen() >= eviction_timeout_) r.evict(r.last_seen() + eviction_timeout_);
  r.receive(bsm, t, gating_);
  if (gating_ == TaoiGate::Receiver) r.set_gate(receiver_flag_[static_cast<std::size_t>(receiver)], t);
}

void AoiLedger::on_receiver_flag(VehicleId receiver, bool risky, double t) {
  receiver_flag_[static_cast<std::size_t>(receiver)] = risky;
  if (gating_ != TaoiGate::Receiver) return;
  for (int u = 0; u < n_; ++u) {
    NeighborRecord& r = records_[index(receiver, u)];
    if (r.live() && t - r.last_seen() >= eviction_timeout_) r.evict(r.last_seen() + eviction_timeout_);
    r.set_gate(risky, t);
  }
}

void AoiLedger::evict_stale(VehicleId receiver, double t) {
  for (int u = 0; u < n_; ++u) {
    NeighborRecord& r = records_[index(receiver, u)];
    if (r.live() && t - r.last_seen() >= eviction_timeout_) r.evict(r.last_seen() + eviction_timeout_);
  }
}

void AoiLedger::evict_out_of_range(VehicleId receiver, Point own, double t, double range) {
  for (int u = 0; u < n_; ++u) {
    NeighborRecord& r = records_[index(receiver, u)];
    if (!r.live()) continue;
    const Point p = estimate_position(r.last_bsm(), t);
    if (std::hypot(p.x - own.x, p.y - own.y) > range) r.evict(t);
  }
}

LocalAges AoiLedger::peek(VehicleId receiver) const {
  LocalAges out;
  double interval_sum = 0.0;
  for (int u = 0; u < n_; ++u) {
    const NeighborRecord& r = records_[index(receiver, u)];
    if (!r.live()) continue;
    ++out.neighbor_count;
    interval_sum += r.neighbor_interval();
    if (r.neighbor_risky()) ++out.risky_neighbor_count;
  }
  if (out.neighbor_count > 0) out.interval_avg = interval_sum / out.neighbor_count;
  return out;
}

LocalAges AoiLedger::close_window(VehicleId receiver, double t, double window_length) {
  if (!(window_length > 0)) throw UndefinedValueError("empty averaging window");
  evict_stale(receiver, t);
  LocalAges out;
  double aoi_sum = 0.0;
  double taoi_sum = 0.0;
  double interval_sum = 0.0;
  for (int u = 0; u < n_; ++u) {
    NeighborRecord& r = records_[index(receiver, u)];
    if (r.live()) {
      r.advance(t);
      ++out.neighbor_count;
      aoi_sum += r.window_area() / window_length;
      interval_sum += r.neighbor_interval();
      if (r.neighbor_risky()) {
        ++out.risky_neighbor_count;
        taoi_sum += r.window_gated_area() / window_length;
      }
    }
    r.reset_window();
  }
  if (out.neighbor_count > 0) {
    out.aoi_v = aoi_sum / out.neighbor_count;
    out.interval_avg = interval_sum / out.neighbor_count;
  }
  if (out.risky_neighbor_count > 0) out.taoi_v = taoi_sum / out.risky_neighbor_count;
  return out;
}

AoiSnapshot AoiLedger::finalize(double t0, double t1) {
  AoiSnapshot snap;
  snap.window_start = t0;
  snap.window_end = t1;
  const double window = t1 - t0;
  double aoi_total = 0.0;
  double taoi_total = 0.0;
  for (int v = 0; v < n_; ++v) {
    evict_stale(v, t1);
    VehicleAverage va{v, std::nullopt, 0.0, true};
    double aoi_sum = 0.0;
    int nb = 0;
    double taoi_sum = 0.0;
    int risky = 0;
    for (int u = 0; u < n_; ++u) {
      NeighborRecord& r = records_[index(v, u)];
      if (!r.has_bsm()) continue;
      r.advance(t1);
      const double aoi = window > 0 ? r.total_area() / window : 0.0;
      const double taoi = window > 0 ? r.total_gated_area() / window : 0.0;
      snap.pairs.push_back({v, u, aoi, taoi});
      aoi_total += aoi;
      taoi_total += taoi;
      aoi_sum += aoi;
      ++nb;
      if (r.risky_seen() || (gating_ == TaoiGate::Receiver && r.total_gated_area() > 0)) {
        taoi_sum += taoi;
        ++risky;
      }
    }
    if (nb > 0) va.aoi = aoi_sum / nb;
    if (risky > 0) {
      va.taoi = taoi_sum / risky;
      va.no_risky_neighbors = false;
    }
    snap.vehicles.push_back(va);
  }
  if (n_ >= 2) {
    const double norm = static_cast<double>(n_) * (n_ - 1);
    snap.system_aoi = aoi_total / norm;
    snap.system_taoi = taoi_total / norm;
  }
  return snap;
}

}  // namespace taoi
