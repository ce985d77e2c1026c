#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "taoi/cli.hpp"
#include "taoi/config.hpp"
#include "taoi/errors.hpp"
#include "taoi/report.hpp"

using namespace taoi;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("taoi_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string key_error(const json& doc) {
  try {
    parse_config_json(doc);
  } catch (const ConfigError& e) {
    return e.key_path();
  }
  return {};
}

std::string first_line(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  return line;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream f(p);
  std::size_t n = 0;
  for (std::string line; std::getline(f, line);) ++n;
  return n;
}

SimConfig tiny(Protocol p = Protocol::Taoi, std::uint64_t seed = 1) {
  SimConfig c;
  c.vehicle_count = 10;
  c.duration = 3.0;
  c.protocol = p;
  c.seed = seed;
  return c;
}

int cli(const std::vector<std::string>& args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int rc = run_command(args, out, err);
  if (out_text) *out_text = out.str() + err.str();
  return rc;
}

}  // namespace

TEST_CASE("config: empty document gives the defaults") {
  const SimConfig c = parse_config_json(json::object());
  const SimConfig d;
  CHECK(config_to_json(c) == config_to_json(d));
  CHECK(c.vehicle_count == 150);
  CHECK(c.duration == 100.0);
  CHECK(c.protocol == Protocol::Taoi);
}

TEST_CASE("config: dotted and nested keys are equivalent") {
  const SimConfig a = parse_config_json(json{{"channel.cw", 31}, {"safety.te_threshold", 0.8}});
  const SimConfig b = parse_config_json(json{{"channel", {{"cw", 31}}}, {"safety", {{"te_threshold", 0.8}}}});
  CHECK(a.channel.cw == 31);
  CHECK(a.safety.te_threshold == 0.8);
  CHECK(config_to_json(a) == config_to_json(b));
}

TEST_CASE("config: errors name the key path") {
  CHECK(key_error(json{{"vehicle_count", 1}}) == "vehicle_count");
  CHECK(key_error(json{{"vehicle_count", "many"}}) == "vehicle_count");
  CHECK(key_error(json{{"bogus", 1}}) == "bogus");
  CHECK(key_error(json{{"channel", {{"nope", 1}}}}) == "channel.nope");
  CHECK(key_error(json{{"protocol", "csma"}}) == "protocol");
  CHECK(key_error(json{{"range_eviction", 3}}) == "range_eviction");
  CHECK(key_error(json{{"generation_jitter", 1.0}}) == "generation_jitter");
  CHECK(key_error(json{{"range_eviction", false}, {"generation_jitter", 0.01}}).empty());
}

TEST_CASE("config: JSON round trip") {
  SimConfig c = tiny(Protocol::Aoi, 9);
  c.channel.cw = 7;
  c.controller.beta = 1.2;
  c.range_eviction = false;
  c.generation_jitter = 0.005;
  const json j = config_to_json(c);
  CHECK(config_to_json(parse_config_json(j)) == j);
  const fs::path dir = scratch("roundtrip");
  {
    std::ofstream f(dir / "c.json");
    f << j.dump(2);
  }
  CHECK(config_to_json(parse_config(dir / "c.json")) == j);
  CHECK_THROWS(parse_config(dir / "missing.json"));
}

TEST_CASE("reports: single run writes four files with fixed headers") {
  const RunReport r = run_simulation(tiny());
  const fs::path dir = scratch("single");
  CHECK(emit_reports(std::span<const RunReport>(&r, 1), dir));
  CHECK(first_line(dir / "summary.csv") == kSummaryHeader);
  CHECK(first_line(dir / "timeseries.csv") == kTimeseriesHeader);
  CHECK(first_line(dir / "pdr_bins.csv") == kPdrBinsHeader);
  CHECK(line_count(dir / "summary.csv") == 2);
  CHECK(line_count(dir / "timeseries.csv") == r.timeseries.size() + 1);
  std::ifstream f(dir / "report.json");
  const json j = json::parse(f);
  CHECK(j == report_to_json(r));
}

TEST_CASE("reports: an empty list writes nothing") {
  const fs::path dir = fs::temp_directory_path() / "taoi_cli_test_empty";
  fs::remove_all(dir);
  CHECK_FALSE(emit_reports(std::span<const RunReport>{}, dir));
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("reports: summary row parses back to the same values") {
  const RunReport r = run_simulation(tiny());
  std::ostringstream out;
  write_summary_row(out, r);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
  REQUIRE(cells.size() == 8);
  CHECK(cells[0] == "taoi");
  CHECK(std::stoi(cells[1]) == 10);
  CHECK(std::stod(cells[3]) == r.system_aoi);
  CHECK(std::stod(cells[4]) == r.system_taoi);
  CHECK(std::stoull(cells[5]) == r.collision_risk_count);
  CHECK(std::stod(cells[6]) == r.mean_interval_ms);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.0, 1.0, 0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()).empty());
}

TEST_CASE("sweep expansion cardinality and order") {
  SweepSpec s;
  s.base = tiny();
  s.protocols = {Protocol::Aoi, Protocol::Taoi};
  s.vehicle_counts = {150};
  s.seeds = {1, 2, 3, 4, 5};
  const auto configs = s.expand();
  CHECK(configs.size() == 10);
  CHECK(configs.front().protocol == Protocol::Aoi);
  CHECK(configs.back().protocol == Protocol::Taoi);
  CHECK(configs[1].seed == 2);
  for (const auto& c : configs) CHECK(c.vehicle_count == 150);
  s.seeds.clear();
  CHECK_THROWS(s.expand());
}

TEST_CASE("batch runs match sequential runs") {
  const std::vector<SimConfig> configs{tiny(Protocol::Fixed10Hz), tiny(Protocol::Aoi), tiny(Protocol::Taoi, 2)};
  const auto batch = run_batch(configs, 3);
  REQUIRE(batch.size() == 3);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    CHECK(report_to_json(batch[i]).dump() == report_to_json(run_simulation(configs[i])).dump());
  }
  const fs::path dir = scratch("multi");
  CHECK(emit_reports(batch, dir));
  CHECK(line_count(dir / "summary.csv") == 4);
  for (const auto& r : batch) CHECK(fs::exists(dir / run_directory_name(r) / "report.json"));
}

TEST_CASE("command line: usage errors exit nonzero") {
  std::string text;
  CHECK(cli({}, &text) != 0);
  CHECK(cli({"run", "--out", "x"}, &text) != 0);
  CHECK(cli({"run", "--config", "/nonexistent/c.json", "--out", "x"}, &text) != 0);
  CHECK(text.find("error") != std::string::npos);
  CHECK(cli({"oracle", "--slots", "40"}) != 0);
}

TEST_CASE("command line: run and sweep") {
  const fs::path dir = scratch("cmd");
  {
    std::ofstream f(dir / "c.json");
    f << R"({"vehicle_count": 8, "duration": 2.0})";
  }
  std::string text;
  CHECK(cli({"run", "--config", (dir / "c.json").string(), "--seed", "4", "--out", (dir / "run").string()},
            &text) == 0);
  CHECK(fs::exists(dir / "run" / "report.json"));
  std::ifstream rj(dir / "run" / "report.json");
  CHECK(json::parse(rj)["config"]["seed"] == 4);
  CHECK(cli({"sweep", "--config", (dir / "c.json").string(), "--protocols", "aoi,taoi", "--seeds", "1,2",
             "--jobs", "2", "--out", (dir / "sweep").string()}) == 0);
  CHECK(line_count(dir / "sweep" / "summary.csv") == 5);
  CHECK(fs::exists(dir / "sweep" / "comparison.csv"));
  CHECK(cli({"sweep", "--config", (dir / "c.json").string(), "--protocols", "csma", "--out",
             (dir / "bad").string()}) != 0);
}

TEST_CASE("command line: oracle and reproduce-tables") {
  std::string text;
  CHECK(cli({"oracle", "--slots", "6", "--objective", "system_aoi"}, &text) == 0);
  CHECK(text.find("objective,system_aoi,0.5") != std::string::npos);
  const fs::path dir = scratch("tables");
  CHECK(cli({"reproduce-tables", "--out", dir.string()}, &text) == 0);
  CHECK(text.find("tables reproduced") != std::string::npos);
  CHECK(fs::exists(dir / "table1.csv"));
  CHECK(fs::exists(dir / "table2.csv"));
  std::ostringstream direct;
  CHECK(reproduce_tables(direct));
}
