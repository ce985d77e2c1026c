#include "taoi/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "taoi/errors.hpp"

namespace taoi {

using nlohmann::json;

namespace {

struct Field {
  std::string path;
  std::function<void(SimConfig&, const json&)> set;
  std::function<json(const SimConfig&)> get;
};

double as_number(const std::string& path, const json& v) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

long long as_integer(const std::string& path, const json& v) {
  if (v.is_number_integer() || v.is_number_unsigned()) return v.get<long long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == std::floor(d)) return static_cast<long long>(d);
  }
  throw ConfigError(path, "expected an integer");
}

std::string as_string(const std::string& path, const json& v) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

bool as_bool(const std::string& path, const json& v) {
  if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
  return v.get<bool>();
}

template <typename Member>
Field number(std::string path, Member member) {
  return {path,
          [path, member](SimConfig& c, const json& v) { std::invoke(member, c) = as_number(path, v); },
          [member](const SimConfig& c) { return json(std::invoke(member, c)); }};
}

template <typename Member>
Field integer(std::string path, Member member) {
  return {path,
          [path, member](SimConfig& c, const json& v) {
            const long long x = as_integer(path, v);
            using T = std::remove_reference_t<decltype(std::invoke(member, c))>;
            if (x < static_cast<long long>(std::numeric_limits<T>::min()) ||
                (x > 0 && static_cast<unsigned long long>(x) > std::numeric_limits<T>::max())) {
              throw ConfigError(path, "integer out of range");
            }
            std::invoke(member, c) = static_cast<T>(x);
          },
          [member](const SimConfig& c) { return json(std::invoke(member, c)); }};
}

// Nested member access: section pointer + member pointer.
template <typename S, typename M>
auto nested(S SimConfig::*section, M S::*member) {
  return [section, member](auto& c) -> decltype(auto) { return (c.*section).*member; };
}

std::vector<Field> fields() {
  std::vector<Field> f;
  f.push_back(integer("vehicle_count", &SimConfig::vehicle_count));
  f.push_back(number("duration", &SimConfig::duration));
  f.push_back({"seed",
               [](SimConfig& c, const json& v) {
                 if (v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0)) {
                   c.seed = v.get<std::uint64_t>();
                 } else {
                   throw ConfigError("seed", "expected a non-negative integer");
                 }
               },
               [](const SimConfig& c) { return json(c.seed); }});
  f.push_back({"protocol",
               [](SimConfig& c, const json& v) {
                 try {
                   c.protocol = parse_protocol(as_string("protocol", v));
                 } catch (const DomainError& e) {
                   throw ConfigError("protocol", e.what());
                 }
               },
               [](const SimConfig& c) { return json(std::string(to_string(c.protocol))); }});
  f.push_back({"channel_mode",
               [](SimConfig& c, const json& v) {
                 const auto s = as_string("channel_mode", v);
                 if (s == "realistic") {
                   c.channel_mode = ChannelMode::Realistic;
                 } else if (s == "idealized_slotted") {
                   c.channel_mode = ChannelMode::IdealizedSlotted;
                 } else {
                   throw ConfigError("channel_mode", "expected realistic|idealized_slotted");
                 }
               },
               [](const SimConfig& c) { return json(std::string(to_string(c.channel_mode))); }});
  f.push_back({"queue",
               [](SimConfig& c, const json& v) {
                 const auto s = as_string("queue", v);
                 if (s == "replace") {
                   c.queue = QueuePolicy::Replace;
                 } else if (s == "fcfs") {
                   c.queue = QueuePolicy::Fcfs;
                 } else {
                   throw ConfigError("queue", "expected replace|fcfs");
                 }
               },
               [](const SimConfig& c) { return json(std::string(to_string(c.queue))); }});
  f.push_back({"taoi_gate",
               [](SimConfig& c, const json& v) {
                 const auto s = as_string("taoi_gate", v);
                 if (s == "sender") {
                   c.taoi_gate = TaoiGate::Sender;
                 } else if (s == "receiver") {
                   c.taoi_gate = TaoiGate::Receiver;
                 } else {
                   throw ConfigError("taoi_gate", "expected sender|receiver");
                 }
               },
               [](const SimConfig& c) { return json(std::string(to_string(c.taoi_gate))); }});
  f.push_back({"trace",
               [](SimConfig& c, const json& v) {
                 if (v.is_null()) {
                   c.trace.reset();
                 } else {
                   c.trace = as_string("trace", v);
                 }
               },
               [](const SimConfig& c) { return c.trace ? json(c.trace->string()) : json(nullptr); }});
  f.push_back(number("mobility_tick", &SimConfig::mobility_tick));
  f.push_back(number("eviction_timeout", &SimConfig::eviction_timeout));
  f.push_back(number("generation_jitter", &SimConfig::generation_jitter));
  f.push_back({"range_eviction",
               [](SimConfig& c, const json& v) { c.range_eviction = as_bool("range_eviction", v); },
               [](const SimConfig& c) { return json(c.range_eviction); }});
  f.push_back(integer("bsm_size_bytes", &SimConfig::bsm_size_bytes));
  f.push_back(number("pdr_bin_width", &SimConfig::pdr_bin_width));
  f.push_back(number("interval_bin_ms", &SimConfig::interval_bin_ms));
  f.push_back(number("fading_margin_db", &SimConfig::fading_margin_db));
  f.push_back({"record_timeseries",
               [](SimConfig& c, const json& v) { c.record_timeseries = as_bool("record_timeseries", v); },
               [](const SimConfig& c) { return json(c.record_timeseries); }});
  f.push_back(number("slot_length", &SimConfig::slot_length));
  f.push_back(integer("slot_capacity", &SimConfig::slot_capacity));
  f.push_back({"forced_schedule",
               [](SimConfig& c, const json& v) {
                 if (v.is_null()) {
                   c.forced_schedule.reset();
                   return;
                 }
                 if (!v.is_array()) throw ConfigError("forced_schedule", "expected an array of arrays");
                 Assignment a;
                 for (std::size_t i = 0; i < v.size(); ++i) {
                   const std::string p = "forced_schedule[" + std::to_string(i) + "]";
                   if (!v[i].is_array()) throw ConfigError(p, "expected an array of vehicle indices");
                   std::vector<int> slot;
                   for (const auto& x : v[i]) slot.push_back(static_cast<int>(as_integer(p, x)));
                   a.push_back(std::move(slot));
                 }
                 c.forced_schedule = std::move(a);
               },
               [](const SimConfig& c) { return c.forced_schedule ? json(*c.forced_schedule) : json(nullptr); }});

  f.push_back(number("road.length", nested(&SimConfig::road, &RoadConfig::length)));
  f.push_back(number("road.width", nested(&SimConfig::road, &RoadConfig::width)));
  f.push_back(integer("road.lanes", nested(&SimConfig::road, &RoadConfig::lanes)));
  f.push_back(number("road.lane_width", nested(&SimConfig::road, &RoadConfig::lane_width)));

  using CC = ChannelConfig;
  f.push_back(number("channel.tx_power_dbm", nested(&SimConfig::channel, &CC::tx_power_dbm)));
  f.push_back(number("channel.freq_ghz", nested(&SimConfig::channel, &CC::freq_ghz)));
  f.push_back(number("channel.bandwidth_mhz", nested(&SimConfig::channel, &CC::bandwidth_mhz)));
  f.push_back(number("channel.data_rate_mbps", nested(&SimConfig::channel, &CC::data_rate_mbps)));
  f.push_back(number("channel.path_loss_exponent", nested(&SimConfig::channel, &CC::path_loss_exponent)));
  f.push_back(number("channel.reference_loss_db", nested(&SimConfig::channel, &CC::reference_loss_db)));
  f.push_back(number("channel.rx_sensitivity_dbm", nested(&SimConfig::channel, &CC::rx_sensitivity_dbm)));
  f.push_back(number("channel.carrier_sense_threshold_dbm",
                     nested(&SimConfig::channel, &CC::carrier_sense_threshold_dbm)));
  f.push_back(number("channel.slot_time_us", nested(&SimConfig::channel, &CC::slot_time_us)));
  f.push_back(number("channel.aifs_us", nested(&SimConfig::channel, &CC::aifs_us)));
  f.push_back(integer("channel.cw", nested(&SimConfig::channel, &CC::cw)));
  f.push_back(number("channel.preamble_overhead_us", nested(&SimConfig::channel, &CC::preamble_overhead_us)));
  f.push_back({"channel.nakagami_m_bins",
               [](SimConfig& c, const json& v) {
                 const std::string path = "channel.nakagami_m_bins";
                 if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a non-empty array");
                 std::vector<NakagamiBin> bins;
                 for (std::size_t i = 0; i < v.size(); ++i) {
                   const std::string p = path + "[" + std::to_string(i) + "]";
                   if (!v[i].is_object()) throw ConfigError(p, "expected {\"upper_m\": ..., \"m\": ...}");
                   for (const auto& [k, _] : v[i].items()) {
                     if (k != "upper_m" && k != "m") throw ConfigError(p + "." + k, "unknown key");
                   }
                   if (!v[i].contains("m")) throw ConfigError(p + ".m", "missing");
                   NakagamiBin b{std::numeric_limits<double>::infinity(), as_number(p + ".m", v[i]["m"])};
                   if (v[i].contains("upper_m") && !v[i]["upper_m"].is_null()) {
                     b.upper_m = as_number(p + ".upper_m", v[i]["upper_m"]);
                   }
                   bins.push_back(b);
                 }
                 c.channel.nakagami_m_bins = std::move(bins);
               },
               [](const SimConfig& c) {
                 json a = json::array();
                 for (const auto& b : c.channel.nakagami_m_bins) {
                   a.push_back({{"upper_m", std::isinf(b.upper_m) ? json(nullptr) : json(b.upper_m)},
                                {"m", b.m}});
                 }
                 return a;
               }});

  using KP = KraussParams;
  f.push_back(number("krauss.max_accel", nested(&SimConfig::krauss, &KP::max_accel)));
  f.push_back(number("krauss.max_decel", nested(&SimConfig::krauss, &KP::max_decel)));
  f.push_back(number("krauss.driver_reaction", nested(&SimConfig::krauss, &KP::driver_reaction)));
  f.push_back(number("krauss.imperfection_sigma", nested(&SimConfig::krauss, &KP::imperfection_sigma)));
  f.push_back(number("krauss.min_gap", nested(&SimConfig::krauss, &KP::min_gap)));
  f.push_back(number("krauss.vehicle_length", nested(&SimConfig::krauss, &KP::vehicle_length)));
  f.push_back(number("krauss.max_speed", nested(&SimConfig::krauss, &KP::max_speed)));
  f.push_back(number("krauss.lane_change_cooldown", nested(&SimConfig::krauss, &KP::lane_change_cooldown)));

  using SP = SafetyParams;
  f.push_back(number("safety.t_react", nested(&SimConfig::safety, &SP::t_react)));
  f.push_back(number("safety.decel", nested(&SimConfig::safety, &SP::decel)));
  f.push_back(number("safety.rel_speed_floor", nested(&SimConfig::safety, &SP::rel_speed_floor)));
  f.push_back(number("safety.te_threshold", nested(&SimConfig::safety, &SP::te_threshold)));

  using CP = ControllerParams;
  f.push_back(number("controller.beta", nested(&SimConfig::controller, &CP::beta)));
  f.push_back(number("controller.delta_min", nested(&SimConfig::controller, &CP::delta_min)));
  f.push_back(number("controller.delta_max", nested(&SimConfig::controller, &CP::delta_max)));
  f.push_back(number("controller.delta_init", nested(&SimConfig::controller, &CP::delta_init)));
  f.push_back(number("controller.t_mi", nested(&SimConfig::controller, &CP::t_mi)));
  f.push_back(number("controller.spread_lambda", nested(&SimConfig::controller, &CP::spread_lambda)));
  f.push_back(number("controller.eps_cmp", nested(&SimConfig::controller, &CP::eps_cmp)));
  f.push_back(number("controller.fixed_interval", nested(&SimConfig::controller, &CP::fixed_interval)));
  return f;
}

const std::vector<Field>& field_table() {
  static const std::vector<Field> table = fields();
  return table;
}

const Field* find_field(const std::string& path) {
  for (const auto& f : field_table()) {
    if (f.path == path) return &f;
  }
  return nullptr;
}

bool is_section(const std::string& path) {
  const std::string prefix = path + ".";
  for (const auto& f : field_table()) {
    if (f.path.compare(0, prefix.size(), prefix) == 0) return true;
  }
  return false;
}

void apply(SimConfig& c, const json& node, const std::string& prefix) {
  for (const auto& [key, value] : node.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (const Field* f = find_field(path)) {
      f->set(c, value);
    } else if (value.is_object() && is_section(path)) {
      apply(c, value, path);
    } else {
      throw ConfigError(path, "unknown key");
    }
  }
}

// Map section-level validation failures to the most specific key we can name.
void validate_with_paths(const SimConfig& c) {
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const DomainError& e) {
    throw ConfigError("config", e.what());
  }
}

}  // namespace

SimConfig parse_config_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("(root)", "config must be a JSON object");
  SimConfig c;
  apply(c, doc, "");
  validate_with_paths(c);
  return c;
}

SimConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("(file)", "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json doc;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    doc = json::object();
  } else {
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("(file)", std::string("invalid JSON: ") + e.what());
    }
  }
  return parse_config_json(doc);
}

json config_to_json(const SimConfig& config) {
  json out = json::object();
  for (const auto& f : field_table()) {
    json* node = &out;
    std::string rest = f.path;
    for (auto dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
      node = &(*node)[rest.substr(0, dot)];
      rest = rest.substr(dot + 1);
    }
    (*node)[rest] = f.get(config);
  }
  return out;
}

}  // namespace taoi
