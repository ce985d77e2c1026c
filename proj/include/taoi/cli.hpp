#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "taoi/engine.hpp"

namespace taoi {

struct SweepSpec {
  SimConfig base;
  std::vector<Protocol> protocols;
  std::vector<int> vehicle_counts;
  std::vector<std::uint64_t> seeds;

  void validate() const;
  /// Configs in (protocol, vehicle count, seed) order.
  std::vector<SimConfig> expand() const;
};

/// Runs every config on up to `jobs` threads; results keep the input order.
std::vector<RunReport> run_batch(const std::vector<SimConfig>& configs, int jobs);

/// The two fixed toy schedules: alternating and u-once-then-v.
Assignment table1_schedule();
Assignment table2_schedule();

/// Replays both toy schedules through the oracle and the slotted engine,
/// prints the tables and a per-check verdict, and returns true when every
/// cell matches the published values.
bool reproduce_tables(std::ostream& out, const std::filesystem::path* out_dir = nullptr);

/// Log level from TAOI_SIM_LOG (trace|debug|info|warn|error|off; default warn).
void configure_logging();

/// Entry point of the command-line tool; returns the process exit status.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace taoi
