#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "taoi/engine.hpp"

namespace taoi {

inline constexpr const char* kSummaryHeader =
    "protocol,n_vehicles,seed,system_aoi_s,system_taoi_s,collision_risk_count,mean_interval_ms,overall_pdr";
inline constexpr const char* kTimeseriesHeader = "t,vehicle_id,delta_ms,flag,aoi_v,taoi_v";
inline constexpr const char* kPdrBinsHeader = "bin_lo_m,bin_hi_m,pdr";

/// Full run report; NaN values become null. Key order is fixed, so equal
/// reports serialize to equal bytes.
nlohmann::json report_to_json(const RunReport& report);

void write_summary_row(std::ostream& out, const RunReport& report);
void write_timeseries(std::ostream& out, const RunReport& report);
void write_pdr_bins(std::ostream& out, const RunReport& report);

/// One report: summary.csv, timeseries.csv, pdr_bins.csv and report.json in
/// `dir`. Several reports: summary.csv with one row each in `dir`, and the
/// four files per run in `dir/<protocol>_n<N>_s<seed>/`. An empty list
/// writes nothing and returns false.
bool emit_reports(std::span<const RunReport> reports, const std::filesystem::path& dir);

std::string run_directory_name(const RunReport& report);

/// Sweep comparison table: one row per run with risk count, mean interval,
/// overall PDR and one column per distance bin.
void write_comparison(std::ostream& out, std::span<const RunReport> reports);

/// Shortest text that parses back to the same double ("" for NaN).
std::string format_double(double v);

}  // namespace taoi
