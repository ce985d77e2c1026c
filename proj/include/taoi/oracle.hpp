#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "taoi/metrics.hpp"

namespace taoi {

/// Exact fraction with a positive denominator, always in lowest terms.
class Rational {
public:
  Rational(std::int64_t num = 0, std::int64_t den = 1);

  std::int64_t num() const noexcept { return num_; }
  std::int64_t den() const noexcept { return den_; }
  double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, const Rational& b);
  friend bool operator==(const Rational& a, const Rational& b) = default;
  friend bool operator<(const Rational& a, const Rational& b);

  std::string str() const;

private:
  std::int64_t num_;
  std::int64_t den_;
};

/// Polynomial motion per axis: x(t) = sum x[i] t^i, likewise y.
struct Motion {
  std::vector<double> x;
  std::vector<double> y;

  Point position(double t) const;
  Point velocity(double t) const;
};

enum class Objective { SystemAoi, SystemTaoi, SumTe };

std::string_view to_string(Objective o) noexcept;
Objective parse_objective(std::string_view name);

struct ScheduleProblem {
  std::vector<Motion> vehicles;
  int slots = 6;
  int capacity = 1;
  Objective objective = Objective::SystemAoi;
  double te_threshold = 0.5;  // m, self-TE over one slot gates TAoI
  int r_min = 1;              // transmissions per vehicle over the horizon
  int r_max = -1;             // -1: no upper bound (= slots)

  static constexpr int kMaxSlots = 12;
  static constexpr int kMaxVehicles = 3;
  static constexpr std::uint64_t kMaxAssignments = std::uint64_t{1} << 26;

  void validate() const;
};

/// The two-vehicle instance: u moves at constant speed (y = 2t), v
/// accelerates (y = t^2).
ScheduleProblem toy_problem(int slots = 6, Objective objective = Objective::SystemAoi);

/// Transmitters of every slot (slot k is time k, k = 1..slots).
using Assignment = std::vector<std::vector<int>>;

/// Per-slot tables; indices are [sender][receiver][slot - 1].
struct SlotTables {
  std::vector<std::vector<std::vector<std::int64_t>>> aoi;
  std::vector<std::vector<std::vector<std::int64_t>>> taoi;
  std::vector<std::vector<std::vector<Point>>> estimate;
  std::vector<std::vector<std::vector<double>>> te;
  std::vector<std::vector<Point>> position;  // [vehicle][slot - 1]
  std::vector<std::vector<bool>> flag;       // [vehicle][slot - 1]

  Rational system_aoi;   // sum over ordered pairs of the slot-mean AoI, / N(N-1)
  Rational system_taoi;
  double sum_te = 0.0;   // sum over ordered pairs and slots

  Rational pair_aoi(int sender, int receiver) const;
  double pair_te(int sender, int receiver) const;  // slot mean
};

struct ScheduleSolution {
  Assignment assignment;
  double objective_value = 0.0;
  SlotTables tables;
  std::uint64_t evaluated = 0;  // feasible assignments visited
};

/// Slot recurrence: AoI starts at 0, grows by one slot per slot and resets to
/// 0 when the sender transmits. The estimate at slot t extrapolates the last
/// BSM received before t (the origin before any reception).
SlotTables replay_schedule(const ScheduleProblem& problem, const Assignment& assignment);

/// Exhaustive minimum over capacity- and rate-feasible assignments. Per slot,
/// larger transmitter sets come first, then lower vehicle indices; the first
/// optimum in that order wins.
ScheduleSolution enumerate_optimal(const ScheduleProblem& problem);

double objective_value(const SlotTables& tables, Objective objective);

/// Per-slot table as CSV, one row per quantity, one column per slot.
void write_slot_table(std::ostream& out, const ScheduleProblem& problem,
                      const Assignment& assignment, const SlotTables& tables);

}  // namespace taoi
