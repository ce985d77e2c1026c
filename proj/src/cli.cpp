#include "taoi/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "taoi/config.hpp"
#include "taoi/errors.hpp"
#include "taoi/oracle.hpp"
#include "taoi/report.hpp"

namespace taoi {

void SweepSpec::validate() const {
  if (protocols.empty()) throw ConfigError("protocols", "must not be empty");
  if (vehicle_counts.empty()) throw ConfigError("densities", "must not be empty");
  if (seeds.empty()) throw ConfigError("seeds", "must not be empty");
  for (int n : vehicle_counts) {
    if (n < 2) throw ConfigError("densities", "vehicle counts must be >= 2");
  }
}

std::vector<SimConfig> SweepSpec::expand() const {
  validate();
  std::vector<SimConfig> out;
  for (Protocol p : protocols) {
    for (int n : vehicle_counts) {
      for (std::uint64_t s : seeds) {
        SimConfig c = base;
        c.protocol = p;
        c.vehicle_count = n;
        c.seed = s;
        out.push_back(c);
      }
    }
  }
  return out;
}

std::vector<RunReport> run_batch(const std::vector<SimConfig>& configs, int jobs) {
  std::vector<RunReport> reports(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        reports[i] = run_simulation(configs[i]);
        spdlog::info("finished {} n={} seed={}", to_string(configs[i].protocol),
                     configs[i].vehicle_count, configs[i].seed);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(configs.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return reports;
}

Assignment table1_schedule() { return {{0}, {1}, {0}, {1}, {0}, {1}}; }
Assignment table2_schedule() { return {{0}, {1}, {1}, {1}, {1}, {1}}; }

namespace {

struct ExpectedTable {
  const char* name;
  Assignment schedule;
  std::vector<std::int64_t> aoi_uv, aoi_vu;
  std::vector<double> yhat_uv, te_uv, yhat_vu, te_vu;
  Rational system_aoi;
  Rational te_vu_avg;
};

std::vector<ExpectedTable> expected_tables() {
  return {
      {"table1", table1_schedule(), {0, 1, 0, 1, 0, 1}, {1, 0, 1, 0, 1, 0}, {0, 4, 6, 8, 10, 12},
       {2, 0, 0, 0, 0, 0}, {0, 0, 8, 12, 24, 32}, {1, 4, 1, 4, 1, 4}, Rational(1, 2), Rational(5, 2)},
      {"table2", table2_schedule(), {0, 1, 2, 3, 4, 5}, {1, 0, 0, 0, 0, 0}, {0, 4, 6, 8, 10, 12},
       {2, 0, 0, 0, 0, 0}, {0, 0, 8, 15, 24, 35}, {1, 4, 1, 1, 1, 1}, Rational(4, 3), Rational(3, 2)},
  };
}

template <typename T>
bool same_row(const std::vector<T>& got, const std::vector<T>& want) {
  return got == want;
}

std::vector<double> ys(const std::vector<Point>& pts) {
  std::vector<double> out;
  for (const auto& p : pts) out.push_back(p.y);
  return out;
}

bool check(std::ostream& out, const std::string& what, bool ok) {
  out << (ok ? "PASS " : "FAIL ") << what << '\n';
  return ok;
}

SimConfig toy_engine_config(const Assignment& schedule) {
  SimConfig c;
  c.vehicle_count = 2;
  c.duration = 6.0;
  c.channel_mode = ChannelMode::IdealizedSlotted;
  c.slot_length = 1.0;
  c.slot_capacity = 1;
  c.forced_schedule = schedule;
  c.mobility_tick = 1.0;
  return c;
}

}  // namespace

bool reproduce_tables(std::ostream& out, const std::filesystem::path* out_dir) {
  bool all = true;
  const ScheduleProblem problem = toy_problem(6);
  const TrajectoryTable truth = sample_motions(problem.vehicles, 6.0, 1.0);
  for (const auto& e : expected_tables()) {
    const SlotTables t = replay_schedule(problem, e.schedule);
    std::ostringstream csv;
    write_slot_table(csv, problem, e.schedule, t);
    out << "# " << e.name << '\n' << csv.str();
    if (out_dir) {
      std::filesystem::create_directories(*out_dir);
      std::ofstream f(*out_dir / (std::string(e.name) + ".csv"), std::ios::binary);
      f << csv.str();
    }
    const std::string n = e.name;
    all &= check(out, n + " aoi_uv", same_row(t.aoi[0][1], e.aoi_uv));
    all &= check(out, n + " aoi_vu", same_row(t.aoi[1][0], e.aoi_vu));
    all &= check(out, n + " yhat_uv", same_row(ys(t.estimate[0][1]), e.yhat_uv));
    all &= check(out, n + " te_uv", same_row(t.te[0][1], e.te_uv));
    all &= check(out, n + " yhat_vu", same_row(ys(t.estimate[1][0]), e.yhat_vu));
    all &= check(out, n + " te_vu", same_row(t.te[1][0], e.te_vu));
    all &= check(out, n + " system_aoi = " + t.system_aoi.str(), t.system_aoi == e.system_aoi);
    const auto& te_row = t.te[1][0];
    const double te_avg = std::accumulate(te_row.begin(), te_row.end(), 0.0) / 6.0;
    all &= check(out, n + " te_vu average = " + format_double(te_avg), te_avg == e.te_vu_avg.to_double());

    const RunReport r = run_simulation(toy_engine_config(e.schedule), &truth);
    const SlotTables& s = *r.slotted;
    all &= check(out, n + " engine matches oracle",
                 s.aoi == t.aoi && s.te == t.te && s.system_aoi == t.system_aoi &&
                     s.system_taoi == t.system_taoi);
  }
  out << (all ? "tables reproduced\n" : "tables differ from the published values\n");
  return all;
}

void configure_logging() {
  const char* env = std::getenv("TAOI_SIM_LOG");
  spdlog::level::level_enum lvl = spdlog::level::warn;
  if (env != nullptr && *env != '\0') {
    lvl = spdlog::level::from_str(env);
    if (lvl == spdlog::level::off && std::string(env) != "off") lvl = spdlog::level::warn;
  }
  spdlog::set_level(lvl);
}

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T v;
    if (!(is >> v) || !is.eof()) throw ConfigError(what, "cannot parse '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<Protocol> parse_protocols(const std::string& text) {
  std::vector<Protocol> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(parse_protocol(item));
    } catch (const DomainError& e) {
      throw ConfigError("protocols", e.what());
    }
  }
  return out;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_logging();
  CLI::App app{"Broadcast rate control simulator for V2V safety messages"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 1;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Run one simulation");
  run->add_option("--config", config_path, "JSON config file")->required();
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--out", out_dir, "Output directory")->required();

  std::string protocols = "fixed10hz,aoi,taoi";
  std::string densities;
  std::string seeds = "1";
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* sweep = app.add_subcommand("sweep", "Run a protocol x density x seed matrix");
  sweep->add_option("--config", config_path, "JSON config file")->required();
  sweep->add_option("--protocols", protocols, "Comma-separated protocols");
  sweep->add_option("--densities", densities, "Comma-separated vehicle counts");
  sweep->add_option("--seeds", seeds, "Comma-separated seeds");
  sweep->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  sweep->add_option("--out", out_dir, "Output directory")->required();

  int slots = 6;
  std::string objective = "system_aoi";
  int capacity = 1;
  int r_min = 1;
  auto* oracle = app.add_subcommand("oracle", "Exhaustive schedule search on the two-vehicle example");
  oracle->add_option("--slots", slots, "Number of slots")->check(CLI::Range(1, ScheduleProblem::kMaxSlots));
  oracle->add_option("--objective", objective, "system_aoi|system_taoi|sum_te");
  oracle->add_option("--capacity", capacity, "Transmissions per slot")->check(CLI::PositiveNumber);
  oracle->add_option("--r-min", r_min, "Minimum transmissions per vehicle")->check(CLI::NonNegativeNumber);

  std::string tables_dir;
  auto* tables = app.add_subcommand("reproduce-tables", "Replay the two toy schedules");
  tables->add_option("--out", tables_dir, "Also write table1.csv and table2.csv here");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*run) {
      SimConfig cfg = parse_config(config_path);
      if (run->count("--seed") > 0) cfg.seed = seed;
      const RunReport r = run_simulation(cfg);
      emit_reports(std::span<const RunReport>(&r, 1), out_dir);
      write_summary_row(out, r);
      return 0;
    }
    if (*sweep) {
      SweepSpec spec;
      spec.base = parse_config(config_path);
      spec.protocols = parse_protocols(protocols);
      spec.vehicle_counts = densities.empty() ? std::vector<int>{spec.base.vehicle_count}
                                              : parse_list<int>(densities, "densities");
      spec.seeds = parse_list<std::uint64_t>(seeds, "seeds");
      const auto reports = run_batch(spec.expand(), jobs);
      emit_reports(reports, out_dir);
      std::filesystem::create_directories(out_dir);
      std::ofstream cmp(std::filesystem::path(out_dir) / "comparison.csv", std::ios::binary);
      write_comparison(cmp, reports);
      out << "wrote " << reports.size() << " runs to " << out_dir << '\n';
      return 0;
    }
    if (*oracle) {
      ScheduleProblem p = toy_problem(slots, parse_objective(objective));
      p.capacity = capacity;
      p.r_min = r_min;
      const ScheduleSolution sol = enumerate_optimal(p);
      write_slot_table(out, p, sol.assignment, sol.tables);
      out << "objective," << to_string(p.objective) << ',' << format_double(sol.objective_value) << '\n';
      out << "evaluated," << sol.evaluated << '\n';
      return 0;
    }
    if (*tables) {
      const std::filesystem::path dir(tables_dir);
      return reproduce_tables(out, tables_dir.empty() ? nullptr : &dir) ? 0 : 1;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace taoi
