#include "taoi/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "taoi/errors.hpp"

namespace taoi {

// --- Rational ----------------------------------------------------------------

namespace {

Rational make(__int128 num, __int128 den) {
  if (den == 0) throw DomainError("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  __int128 a = num < 0 ? -num : num;
  __int128 b = den;
  while (b != 0) {
    const __int128 r = a % b;
    a = b;
    b = r;
  }
  if (a > 1) {
    num /= a;
    den /= a;
  }
  constexpr auto lim = static_cast<__int128>(std::numeric_limits<std::int64_t>::max());
  if (num > lim || -num > lim || den > lim) throw DomainError("rational overflow");
  return Rational(static_cast<std::int64_t>(num), static_cast<std::int64_t>(den));
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) : num_(num), den_(den) {
  if (den == 0) throw DomainError("rational with zero denominator");
  if (den_ < 0) {
    num_ = -num_;
    den_ = -den_;
  }
  const std::int64_t g = std::gcd(num_, den_);
  if (g > 1) {
    num_ /= g;
    den_ /= g;
  }
}

Rational operator+(const Rational& a, const Rational& b) {
  return make(static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_,
              static_cast<__int128>(a.den_) * b.den_);
}

Rational operator*(const Rational& a, const Rational& b) {
  return make(static_cast<__int128>(a.num_) * b.num_, static_cast<__int128>(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  return make(static_cast<__int128>(a.num_) * b.den_, static_cast<__int128>(a.den_) * b.num_);
}

bool operator<(const Rational& a, const Rational& b) {
  return static_cast<__int128>(a.num_) * b.den_ < static_cast<__int128>(b.num_) * a.den_;
}

std::string Rational::str() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

// --- Motion ------------------------------------------------------------------

namespace {

double poly(const std::vector<double>& c, double t) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * t + *it;
  return v;
}

double dpoly(const std::vector<double>& c, double t) {
  double v = 0.0;
  for (std::size_t i = c.size(); i-- > 1;) v = v * t + static_cast<double>(i) * c[i];
  return v;
}

}  // namespace

Point Motion::position(double t) const { return {poly(x, t), poly(y, t)}; }
Point Motion::velocity(double t) const { return {dpoly(x, t), dpoly(y, t)}; }

// --- problem -----------------------------------------------------------------

std::string_view to_string(Objective o) noexcept {
  switch (o) {
    case Objective::SystemAoi: return "system_aoi";
    case Objective::SystemTaoi: return "system_taoi";
    case Objective::SumTe: return "sum_te";
  }
  return "system_aoi";
}

Objective parse_objective(std::string_view name) {
  if (name == "system_aoi") return Objective::SystemAoi;
  if (name == "system_taoi") return Objective::SystemTaoi;
  if (name == "sum_te") return Objective::SumTe;
  throw DomainError("unknown objective '" + std::string(name) +
                    "' (system_aoi|system_taoi|sum_te)");
}

namespace {

std::vector<std::vector<int>> slot_choices(int n, int capacity) {
  std::vector<std::vector<int>> out;
  for (int mask = 0; mask < (1 << n); ++mask) {
    if (std::popcount(static_cast<unsigned>(mask)) > capacity) continue;
    std::vector<int> s;
    for (int i = 0; i < n; ++i) {
      if (mask & (1 << i)) s.push_back(i);
    }
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a < b;
  });
  return out;
}

int upper_rate(const ScheduleProblem& p) { return p.r_max < 0 ? p.slots : p.r_max; }

}  // namespace

void ScheduleProblem::validate() const {
  const int n = static_cast<int>(vehicles.size());
  if (n < 2) throw DomainError("schedule problem needs at least two vehicles");
  if (n > kMaxVehicles) throw DomainError("too many vehicles for exhaustive enumeration");
  if (slots < 1) throw DomainError("schedule problem needs at least one slot");
  if (slots > kMaxSlots) throw DomainError("too many slots for exhaustive enumeration");
  if (capacity < 1) throw DomainError("slot capacity must be >= 1");
  if (r_min < 0 || upper_rate(*this) < r_min) throw DomainError("rate bounds must satisfy 0 <= r_min <= r_max");
  if (!(te_threshold >= 0)) throw DomainError("self-TE threshold must be >= 0");
}

ScheduleProblem toy_problem(int slots, Objective objective) {
  ScheduleProblem p;
  p.vehicles = {Motion{{0.0}, {0.0, 2.0}}, Motion{{0.0}, {0.0, 0.0, 1.0}}};
  p.slots = slots;
  p.objective = objective;
  return p;
}

// --- replay ------------------------------------------------------------------

namespace {

/// Slot-invariant precomputation shared by replay and enumeration.
struct Kinematics {
  int n;
  int k;
  std::vector<std::vector<Point>> pos;  // [v][t], t = 0..k
  std::vector<std::vector<Point>> vel;
  std::vector<std::vector<bool>> flag;  // [v][t-1]
  // te[v][t-1][last]: TE of v at slot t when its last BSM is from slot `last` (0 = none).
  std::vector<std::vector<std::vector<double>>> te;
  std::vector<std::vector<std::vector<Point>>> est;

  explicit Kinematics(const ScheduleProblem& p)
      : n(static_cast<int>(p.vehicles.size())), k(p.slots) {
    pos.assign(n, std::vector<Point>(k + 1));
    vel.assign(n, std::vector<Point>(k + 1));
    flag.assign(n, std::vector<bool>(k));
    te.assign(n, std::vector<std::vector<double>>(k));
    est.assign(n, std::vector<std::vector<Point>>(k));
    for (int v = 0; v < n; ++v) {
      for (int t = 0; t <= k; ++t) {
        pos[v][t] = p.vehicles[v].position(t);
        vel[v][t] = p.vehicles[v].velocity(t);
      }
      for (int t = 1; t <= k; ++t) {
        const Point e{pos[v][t - 1].x + vel[v][t - 1].x, pos[v][t - 1].y + vel[v][t - 1].y};
        flag[v][t - 1] = std::hypot(pos[v][t].x - e.x, pos[v][t].y - e.y) >= p.te_threshold;
        for (int last = 0; last < t; ++last) {
          Point e2{0.0, 0.0};
          if (last > 0) {
            const double dt = t - last;
            e2 = {pos[v][last].x + vel[v][last].x * dt, pos[v][last].y + vel[v][last].y * dt};
          }
          est[v][t - 1].push_back(e2);
          te[v][t - 1].push_back(std::hypot(pos[v][t].x - e2.x, pos[v][t].y - e2.y));
        }
      }
    }
  }
};

void check_assignment(const ScheduleProblem& p, const Assignment& a) {
  if (static_cast<int>(a.size()) != p.slots) {
    throw DomainError("assignment must list transmitters for every slot");
  }
  const int n = static_cast<int>(p.vehicles.size());
  for (const auto& slot : a) {
    if (static_cast<int>(slot.size()) > p.capacity) {
      throw DomainError("invalid assignment: slot capacity exceeded");
    }
    for (std::size_t i = 0; i < slot.size(); ++i) {
      if (slot[i] < 0 || slot[i] >= n) throw DomainError("invalid assignment: unknown vehicle");
      if (std::count(slot.begin(), slot.end(), slot[i]) > 1) {
        throw DomainError("invalid assignment: vehicle listed twice in one slot");
      }
    }
  }
}

}  // namespace

Rational SlotTables::pair_aoi(int sender, int receiver) const {
  const auto& row = aoi.at(sender).at(receiver);
  const std::int64_t sum = std::accumulate(row.begin(), row.end(), std::int64_t{0});
  return Rational(sum, static_cast<std::int64_t>(row.size()));
}

double SlotTables::pair_te(int sender, int receiver) const {
  const auto& row = te.at(sender).at(receiver);
  return std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
}

SlotTables replay_schedule(const ScheduleProblem& problem, const Assignment& assignment) {
  problem.validate();
  check_assignment(problem, assignment);
  const Kinematics kin(problem);
  const int n = kin.n;
  const int k = kin.k;

  SlotTables t;
  t.aoi.assign(n, std::vector<std::vector<std::int64_t>>(n, std::vector<std::int64_t>(k, 0)));
  t.taoi = t.aoi;
  t.estimate.assign(n, std::vector<std::vector<Point>>(n, std::vector<Point>(k)));
  t.te.assign(n, std::vector<std::vector<double>>(n, std::vector<double>(k, 0.0)));
  t.position.assign(n, std::vector<Point>(k));
  t.flag = kin.flag;

  std::vector<int> last(n, 0);
  std::vector<std::vector<std::int64_t>> age(n, std::vector<std::int64_t>(n, 0));
  std::int64_t aoi_sum = 0;
  std::int64_t taoi_sum = 0;
  for (int slot = 1; slot <= k; ++slot) {
    const auto& tx = assignment[slot - 1];
    for (int s = 0; s < n; ++s) {
      t.position[s][slot - 1] = kin.pos[s][slot];
      const bool sends = std::find(tx.begin(), tx.end(), s) != tx.end();
      for (int r = 0; r < n; ++r) {
        if (r == s) continue;
        t.estimate[s][r][slot - 1] = kin.est[s][slot - 1][last[s]];
        t.te[s][r][slot - 1] = kin.te[s][slot - 1][last[s]];
        t.sum_te += kin.te[s][slot - 1][last[s]];
        age[s][r] = sends ? 0 : age[s][r] + 1;
        t.aoi[s][r][slot - 1] = age[s][r];
        t.taoi[s][r][slot - 1] = kin.flag[s][slot - 1] ? age[s][r] : 0;
        aoi_sum += t.aoi[s][r][slot - 1];
        taoi_sum += t.taoi[s][r][slot - 1];
      }
    }
    for (int s : tx) last[s] = slot;
  }
  const std::int64_t norm = static_cast<std::int64_t>(k) * n * (n - 1);
  t.system_aoi = Rational(aoi_sum, norm);
  t.system_taoi = Rational(taoi_sum, norm);
  return t;
}

double objective_value(const SlotTables& tables, Objective objective) {
  switch (objective) {
    case Objective::SystemAoi: return tables.system_aoi.to_double();
    case Objective::SystemTaoi: return tables.system_taoi.to_double();
    case Objective::SumTe: return tables.sum_te;
  }
  return 0.0;
}

// --- enumeration -------------------------------------------------------------

namespace {

struct Search {
  const ScheduleProblem& p;
  const Kinematics& kin;
  std::vector<std::vector<int>> choices;
  int r_max;

  std::vector<int> last;
  std::vector<int> count;
  std::vector<std::int64_t> age;  // per sender; identical at every receiver
  std::vector<int> pick;          // choice index per slot

  bool have_best = false;
  std::int64_t best_int = 0;
  double best_te = 0.0;
  std::vector<int> best_pick;
  std::uint64_t evaluated = 0;

  Search(const ScheduleProblem& problem, const Kinematics& k)
      : p(problem),
        kin(k),
        choices(slot_choices(k.n, problem.capacity)),
        r_max(upper_rate(problem)),
        last(k.n, 0),
        count(k.n, 0),
        age(k.n, 0),
        pick(problem.slots, 0) {}

  void run(int slot, std::int64_t acc_int, double acc_te) {
    if (slot > kin.k) {
      for (int v = 0; v < kin.n; ++v) {
        if (count[v] < p.r_min) return;
      }
      ++evaluated;
      const bool better =
          !have_best || (p.objective == Objective::SumTe ? acc_te < best_te - 1e-9 : acc_int < best_int);
      if (better) {
        have_best = true;
        best_int = acc_int;
        best_te = acc_te;
        best_pick = pick;
      }
      return;
    }
    const int remaining_after = kin.k - slot;
    double slot_te = 0.0;
    for (int s = 0; s < kin.n; ++s) slot_te += kin.te[s][slot - 1][last[s]] * (kin.n - 1);

    for (std::size_t c = 0; c < choices.size(); ++c) {
      const auto& tx = choices[c];
      bool ok = true;
      for (int s : tx) ok = ok && count[s] + 1 <= r_max;
      if (!ok) continue;
      std::int64_t slot_int = 0;
      const auto saved_last = last;
      const auto saved_age = age;
      for (int s = 0; s < kin.n; ++s) {
        const bool sends = std::find(tx.begin(), tx.end(), s) != tx.end();
        age[s] = sends ? 0 : age[s] + 1;
        if (p.objective == Objective::SystemTaoi && !kin.flag[s][slot - 1]) continue;
        slot_int += age[s] * (kin.n - 1);
      }
      for (int s : tx) {
        ++count[s];
        last[s] = slot;
      }
      for (int v = 0; v < kin.n && ok; ++v) ok = count[v] + remaining_after >= p.r_min;
      if (ok) {
        pick[slot - 1] = static_cast<int>(c);
        run(slot + 1, acc_int + slot_int, acc_te + slot_te);
      }
      for (int s : tx) --count[s];
      last = saved_last;
      age = saved_age;
    }
  }
};

}  // namespace

ScheduleSolution enumerate_optimal(const ScheduleProblem& problem) {
  problem.validate();
  const Kinematics kin(problem);
  Search search(problem, kin);
  double total = 1.0;
  for (int i = 0; i < problem.slots; ++i) total *= static_cast<double>(search.choices.size());
  if (total > static_cast<double>(ScheduleProblem::kMaxAssignments)) {
    throw DomainError("enumeration refused: " + std::to_string(static_cast<std::uint64_t>(total)) +
                      " assignments exceed the limit");
  }
  search.run(1, 0, 0.0);
  if (!search.have_best) throw DomainError("no assignment satisfies the rate bounds");

  ScheduleSolution sol;
  for (int c : search.best_pick) sol.assignment.push_back(search.choices[c]);
  sol.tables = replay_schedule(problem, sol.assignment);
  sol.objective_value = objective_value(sol.tables, problem.objective);
  sol.evaluated = search.evaluated;
  return sol;
}

// --- output ------------------------------------------------------------------

namespace {

std::string vehicle_name(int i) {
  static const char* names[] = {"u", "v", "w"};
  return i < 3 ? names[i] : "n" + std::to_string(i);
}

std::string fmt(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void write_slot_table(std::ostream& out, const ScheduleProblem& problem,
                      const Assignment& assignment, const SlotTables& tables) {
  const int n = static_cast<int>(problem.vehicles.size());
  const int k = problem.slots;
  out << "quantity";
  for (int t = 1; t <= k; ++t) out << ",t" << t;
  out << ",average\n";
  out << "transmitters";
  for (const auto& slot : assignment) {
    out << ',';
    if (slot.empty()) out << '-';
    for (std::size_t i = 0; i < slot.size(); ++i) out << (i ? "+" : "") << vehicle_name(slot[i]);
  }
  out << ",\n";
  for (int s = 0; s < n; ++s) {
    for (int r = 0; r < n; ++r) {
      if (r == s) continue;
      const std::string pair = vehicle_name(s) + vehicle_name(r);
      out << "aoi_" << pair;
      for (int t = 0; t < k; ++t) out << ',' << tables.aoi[s][r][t];
      out << ',' << tables.pair_aoi(s, r).str() << '\n';
      out << "y_" << vehicle_name(s);
      for (int t = 0; t < k; ++t) out << ',' << fmt(tables.position[s][t].y);
      out << ",\n";
      out << "yhat_" << pair;
      for (int t = 0; t < k; ++t) out << ',' << fmt(tables.estimate[s][r][t].y);
      out << ",\n";
      out << "te_" << pair;
      for (int t = 0; t < k; ++t) out << ',' << fmt(tables.te[s][r][t]);
      out << ',' << fmt(tables.pair_te(s, r)) << '\n';
    }
  }
  out << "system_aoi," << tables.system_aoi.str() << '\n';
  out << "system_taoi," << tables.system_taoi.str() << '\n';
  out << "sum_te," << fmt(tables.sum_te) << '\n';
}

}  // namespace taoi
