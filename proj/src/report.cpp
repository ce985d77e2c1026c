#include "taoi/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

#include <spdlog/spdlog.h>

#include "taoi/config.hpp"
#include "taoi/errors.hpp"

namespace taoi {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json opt(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }

std::ofstream open_for_write(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

}  // namespace

json report_to_json(const RunReport& r) {
  json j;
  j["config"] = config_to_json(r.config);
  j["protocol"] = std::string(to_string(r.config.protocol));
  j["n_vehicles"] = r.config.vehicle_count;
  j["seed"] = r.config.seed;
  j["t_start"] = r.t_start;
  j["t_end"] = r.t_end;
  j["system_aoi_s"] = num(r.system_aoi);
  j["system_taoi_s"] = num(r.system_taoi);
  j["collision_risk_count"] = r.collision_risk_count;
  j["overall_pdr"] = num(r.overall_pdr);
  j["mean_interval_ms"] = num(r.mean_interval_ms);

  json bins = json::array();
  for (const auto& b : r.pdr_bins) {
    bins.push_back({{"bin_lo_m", b.lo_m}, {"bin_hi_m", b.hi_m}, {"successes", b.successes},
                    {"opportunities", b.opportunities}, {"pdr", num(b.pdr)}});
  }
  j["pdr_bins"] = bins;

  json hist = json::array();
  for (const auto& h : r.interval_histogram) {
    hist.push_back({{"lo_ms", h.lo_ms}, {"hi_ms", h.hi_ms}, {"count", h.count}});
  }
  j["interval_histogram"] = hist;

  json ts = json::array();
  for (const auto& m : r.timeseries) {
    ts.push_back({{"t", m.t},
                  {"vehicle_id", m.vehicle},
                  {"delta_ms", m.delta_ms},
                  {"flag", m.flag ? 1 : 0},
                  {"aoi_v", opt(m.aoi_v)},
                  {"taoi_v", m.taoi_v},
                  {"self_te", m.self_te},
                  {"action", std::string(to_string(m.action))},
                  {"congested", m.congested},
                  {"neighbors", m.neighbors},
                  {"risky_neighbors", m.risky_neighbors}});
  }
  j["timeseries"] = ts;

  json pairs = json::array();
  for (const auto& p : r.pair_te) {
    pairs.push_back({{"receiver", p.receiver}, {"sender", p.sender}, {"mean_te_m", p.mean_te},
                     {"samples", p.samples}, {"risk_instances", p.risk_instances}});
  }
  j["pair_te"] = pairs;

  json veh = json::array();
  for (const auto& v : r.vehicles) {
    veh.push_back({{"vehicle_id", v.id},
                   {"mean_delta_ms", v.mean_delta_ms},
                   {"max_self_te", v.max_self_te},
                   {"mis", v.mis},
                   {"risky_mis", v.risky_mis},
                   {"congested_mis", v.congested_mis},
                   {"transmissions", v.transmissions},
                   {"aoi_s", opt(v.aoi)},
                   {"taoi_s", v.taoi},
                   {"no_risky_neighbors", v.no_risky_neighbors}});
  }
  j["vehicles"] = veh;

  j["frames"] = {{"generated", r.frames.generated},
                 {"transmitted", r.frames.transmitted},
                 {"replaced", r.frames.replaced},
                 {"queued", r.frames.queued},
                 {"in_flight", r.frames.in_flight},
                 {"receptions", r.frames.receptions},
                 {"out_of_range_receptions", r.frames.out_of_range_receptions}};
  j["mobility"] = {{"min_same_lane_gap_m", num(r.mobility.min_same_lane_gap)},
                   {"negative_gap_events", r.mobility.negative_gap_events},
                   {"lane_changes", r.mobility.lane_changes}};

  if (r.slotted) {
    const SlotTables& t = *r.slotted;
    json s;
    s["schedule"] = r.slotted_schedule;
    s["aoi_slots"] = t.aoi;
    s["taoi_slots"] = t.taoi;
    s["te"] = t.te;
    s["system_aoi"] = t.system_aoi.str();
    s["system_taoi"] = t.system_taoi.str();
    s["sum_te"] = t.sum_te;
    j["slotted"] = s;
  }
  return j;
}

void write_summary_row(std::ostream& out, const RunReport& r) {
  out << to_string(r.config.protocol) << ',' << r.config.vehicle_count << ',' << r.config.seed << ','
      << format_double(r.system_aoi) << ',' << format_double(r.system_taoi) << ','
      << r.collision_risk_count << ',' << format_double(r.mean_interval_ms) << ','
      << format_double(r.overall_pdr) << '\n';
}

void write_timeseries(std::ostream& out, const RunReport& r) {
  out << kTimeseriesHeader << '\n';
  for (const auto& m : r.timeseries) {
    out << format_double(m.t) << ',' << m.vehicle << ',' << format_double(m.delta_ms) << ','
        << (m.flag ? 1 : 0) << ',' << (m.aoi_v ? format_double(*m.aoi_v) : "") << ','
        << format_double(m.taoi_v) << '\n';
  }
}

void write_pdr_bins(std::ostream& out, const RunReport& r) {
  out << kPdrBinsHeader << '\n';
  for (const auto& b : r.pdr_bins) {
    out << format_double(b.lo_m) << ',' << format_double(b.hi_m) << ',' << format_double(b.pdr) << '\n';
  }
}

std::string run_directory_name(const RunReport& r) {
  return std::string(to_string(r.config.protocol)) + "_n" + std::to_string(r.config.vehicle_count) +
         "_s" + std::to_string(r.config.seed);
}

namespace {

void emit_one(const RunReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_for_write(dir / "summary.csv");
    out << kSummaryHeader << '\n';
    write_summary_row(out, r);
  }
  {
    auto out = open_for_write(dir / "timeseries.csv");
    write_timeseries(out, r);
  }
  {
    auto out = open_for_write(dir / "pdr_bins.csv");
    write_pdr_bins(out, r);
  }
  {
    auto out = open_for_write(dir / "report.json");
    out << report_to_json(r).dump(1) << '\n';
  }
}

}  // namespace

bool emit_reports(std::span<const RunReport> reports, const std::filesystem::path& dir) {
  if (reports.empty()) {
    spdlog::warn("no reports to emit; nothing written to {}", dir.string());
    return false;
  }
  if (reports.size() == 1) {
    emit_one(reports.front(), dir);
    return true;
  }
  std::filesystem::create_directories(dir);
  auto out = open_for_write(dir / "summary.csv");
  out << kSummaryHeader << '\n';
  for (const auto& r : reports) {
    write_summary_row(out, r);
    emit_one(r, dir / run_directory_name(r));
  }
  return true;
}

void write_comparison(std::ostream& out, std::span<const RunReport> reports) {
  std::size_t bins = 0;
  double width = 0.0;
  for (const auto& r : reports) {
    bins = std::max(bins, r.pdr_bins.size());
    if (!r.pdr_bins.empty()) width = r.pdr_bins.front().hi_m - r.pdr_bins.front().lo_m;
  }
  out << "protocol,n_vehicles,seed,collision_risk_count,mean_interval_ms,overall_pdr,system_aoi_s,"
         "system_taoi_s";
  for (std::size_t i = 0; i < bins; ++i) {
    out << ",pdr_" << format_double(static_cast<double>(i) * width) << '_'
        << format_double(static_cast<double>(i + 1) * width);
  }
  out << '\n';
  for (const auto& r : reports) {
    out << to_string(r.config.protocol) << ',' << r.config.vehicle_count << ',' << r.config.seed << ','
        << r.collision_risk_count << ',' << format_double(r.mean_interval_ms) << ','
        << format_double(r.overall_pdr) << ',' << format_double(r.system_aoi) << ','
        << format_double(r.system_taoi);
    for (std::size_t i = 0; i < bins; ++i) {
      out << ',' << (i < r.pdr_bins.size() ? format_double(r.pdr_bins[i].pdr) : "");
    }
    out << '\n';
  }
}

}  // namespace taoi
