#include "fuotasim/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

namespace fuotasim::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
  return v;
}

long long to_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

template <std::size_t N>
std::array<double, N> to_array(const std::string& key, const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != N) {
    throw ConfigError(key + ": expected " + std::to_string(N) + " comma-separated values, got " +
                      std::to_string(parts.size()));
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = to_double(key, parts[i]);
  return out;
}

template <std::size_t N>
std::string join(const std::array<double, N>& values) {
  std::string out;
  for (std::size_t i = 0; i < N; ++i) out += (i ? "," : "") + fmt(values[i]);
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ScenarioConfig&)> get;
  std::function<void(ScenarioConfig&, const std::string&)> set;
};

#define DOUBLE_FIELD(sec, name, member)                                                               \
  Field {                                                                                             \
    sec, name, [](const ScenarioConfig& c) { return fmt(c.member); },                                 \
        [](ScenarioConfig& c, const std::string& v) { c.member = to_double(sec "." name, v); }       \
  }
#define INT_FIELD(sec, name, member, type)                                                            \
  Field {                                                                                             \
    sec, name, [](const ScenarioConfig& c) { return std::to_string(c.member); },                      \
        [](ScenarioConfig& c, const std::string& v) {                                                 \
          const auto x = to_int(sec "." name, v);                                                     \
          if (x < 0 && !std::is_signed_v<type>) throw ConfigError(sec "." name ": must not be negative"); \
          c.member = static_cast<type>(x);                                                            \
        }                                                                                             \
  }
#define BOOL_FIELD(sec, name, member)                                                                 \
  Field {                                                                                             \
    sec, name, [](const ScenarioConfig& c) { return std::string(c.member ? "true" : "false"); },      \
        [](ScenarioConfig& c, const std::string& v) { c.member = to_bool(sec "." name, v); }         \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> t;
    t.push_back(INT_FIELD("scenario", "devices", devices, int));
    t.push_back({"scenario", "class", [](const ScenarioConfig& c) { return std::string(to_string(c.multicast_class)); },
                 [](ScenarioConfig& c, const std::string& v) { c.multicast_class = parse_class(v); }});
    t.push_back(INT_FIELD("scenario", "dr", multicast_dr, int));
    t.push_back(INT_FIELD("scenario", "ping_periodicity", ping_periodicity, int));
    t.push_back({"scenario", "firmware_size", [](const ScenarioConfig& c) { return std::to_string(c.firmware_size); },
                 [](ScenarioConfig& c, const std::string& v) { c.firmware_size = parse_size(v); }});
    t.push_back(INT_FIELD("scenario", "redundancy", redundancy, std::size_t));
    t.push_back({"scenario", "fragment_size",
                 [](const ScenarioConfig& c) {
                   return c.fragment_size == 0 ? std::string("max") : std::to_string(c.fragment_size);
                 },
                 [](ScenarioConfig& c, const std::string& v) {
                   c.fragment_size = trim(v) == "max" ? 0 : parse_size(v);
                 }});
    t.push_back({"scenario", "seeds",
                 [](const ScenarioConfig& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.seeds.size(); ++i) out += (i ? "," : "") + std::to_string(c.seeds[i]);
                   return out;
                 },
                 [](ScenarioConfig& c, const std::string& v) { c.seeds = parse_seed_list(v); }});
    t.push_back({"scenario", "dr_distribution", [](const ScenarioConfig& c) { return join(c.dr_distribution); },
                 [](ScenarioConfig& c, const std::string& v) {
                   c.dr_distribution = to_array<radio::kNumDataRates>("scenario.dr_distribution", v);
                 }});

    t.push_back(DOUBLE_FIELD("radio", "tx_power_dbm", link.tx_power_dbm));
    t.push_back(DOUBLE_FIELD("radio", "device_antenna_gain_db", link.device_antenna_gain_db));
    t.push_back(DOUBLE_FIELD("radio", "gateway_antenna_gain_db", link.gateway_antenna_gain_db));
    t.push_back({"radio", "sensitivity_dbm", [](const ScenarioConfig& c) { return join(c.link.sensitivity_dbm); },
                 [](ScenarioConfig& c, const std::string& v) {
                   c.link.sensitivity_dbm = to_array<radio::kNumDataRates>("radio.sensitivity_dbm", v);
                 }});
    t.push_back(DOUBLE_FIELD("radio", "path_loss_breakpoint_m", path_loss.breakpoint_m));
    t.push_back(DOUBLE_FIELD("radio", "near_d0_m", path_loss.near.d0_m));
    t.push_back(DOUBLE_FIELD("radio", "near_pl_d0_db", path_loss.near.pl_d0_db));
    t.push_back(DOUBLE_FIELD("radio", "near_gamma", path_loss.near.gamma));
    t.push_back(DOUBLE_FIELD("radio", "near_sigma_db", path_loss.near.sigma_db));
    t.push_back(DOUBLE_FIELD("radio", "far_d0_m", path_loss.far.d0_m));
    t.push_back(DOUBLE_FIELD("radio", "far_pl_d0_db", path_loss.far.pl_d0_db));
    t.push_back(DOUBLE_FIELD("radio", "far_gamma", path_loss.far.gamma));
    t.push_back(DOUBLE_FIELD("radio", "far_sigma_db", path_loss.far.sigma_db));
    t.push_back(DOUBLE_FIELD("radio", "reception_slope_per_db", reception.slope_per_db));
    t.push_back(DOUBLE_FIELD("radio", "reception_center_db", reception.center_db));
    for (int row = 0; row < radio::kNumDataRates; ++row) {
      const std::string key = "sir_dr" + std::to_string(row);
      t.push_back({"radio", key,
                   [row](const ScenarioConfig& c) { return join(c.sir.threshold_db[static_cast<std::size_t>(row)]); },
                   [row, key](ScenarioConfig& c, const std::string& v) {
                     c.sir.threshold_db[static_cast<std::size_t>(row)] =
                         to_array<radio::kNumDataRates>("radio." + key, v);
                   }});
    }
    t.push_back(DOUBLE_FIELD("radio", "placement_margin_db", placement_margin_db));
    t.push_back(BOOL_FIELD("radio", "ideal_channel", ideal_channel));
    t.push_back(INT_FIELD("radio", "gateway_receive_paths", gateway_receive_paths, int));

    t.push_back(BOOL_FIELD("mac", "duty_cycle", duty_cycle_enabled));
    t.push_back(INT_FIELD("mac", "poll_payload", poll_payload, std::size_t));
    t.push_back(DOUBLE_FIELD("mac", "poll_interval_min_s", poll_interval_min_s));
    t.push_back(DOUBLE_FIELD("mac", "poll_interval_max_s", poll_interval_max_s));
    t.push_back(DOUBLE_FIELD("mac", "answer_delay_min_s", answer_delay_min_s));
    t.push_back(DOUBLE_FIELD("mac", "answer_delay_max_s", answer_delay_max_s));
    t.push_back(DOUBLE_FIELD("mac", "retry_backoff_min_s", retry_backoff_min_s));
    t.push_back(DOUBLE_FIELD("mac", "retry_backoff_max_s", retry_backoff_max_s));
    t.push_back(DOUBLE_FIELD("mac", "start_spread_s", start_spread_s));
    t.push_back(DOUBLE_FIELD("mac", "app_period_s", app_period_s));
    t.push_back(INT_FIELD("mac", "max_uplinks_per_device", max_uplinks_per_device, long));
    t.push_back(DOUBLE_FIELD("mac", "phase_time_cap_s", phase_time_cap_s));

    t.push_back({"session", "start_guard_s",
                 [](const ScenarioConfig& c) { return c.start_guard_s ? fmt(*c.start_guard_s) : std::string("auto"); },
                 [](ScenarioConfig& c, const std::string& v) {
                   if (trim(v) == "auto") {
                     c.start_guard_s.reset();
                   } else {
                     c.start_guard_s = to_double("session.start_guard_s", v);
                   }
                 }});
    t.push_back(DOUBLE_FIELD("session", "start_guard_margin_s", start_guard_margin_s));
    t.push_back(DOUBLE_FIELD("session", "clock_skew_max_s", clock_skew_max_s));
    t.push_back(DOUBLE_FIELD("session", "multicast_guard_s", multicast_guard_s));
    t.push_back(INT_FIELD("session", "gps_start", gps_start, std::uint64_t));

    t.push_back(DOUBLE_FIELD("energy", "tx_mw", power.tx_mw));
    t.push_back(DOUBLE_FIELD("energy", "rx_mw", power.rx_mw));
    t.push_back(DOUBLE_FIELD("energy", "idle_mw", power.idle_mw));
    t.push_back(DOUBLE_FIELD("energy", "battery_j", power.battery_j));
    return t;
  }();
  return table;
}

#undef DOUBLE_FIELD
#undef INT_FIELD
#undef BOOL_FIELD

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

const char* to_string(MulticastClass c) { return c == MulticastClass::B ? "B" : "C"; }

MulticastClass parse_class(const std::string& text) {
  const std::string t = trim(text);
  if (t == "B" || t == "b") return MulticastClass::B;
  if (t == "C" || t == "c") return MulticastClass::C;
  throw ConfigError("multicast class must be B or C, got '" + text + "'");
}

std::size_t ScenarioConfig::effective_fragment_size() const {
  if (fragment_size != 0) return fragment_size;
  return radio::data_rate(multicast_dr).max_app_payload;
}

void ScenarioConfig::validate() const {
  if (devices < 1) throw ConfigError("devices must be at least 1");
  if (multicast_dr < 0 || multicast_dr >= radio::kNumDataRates) {
    throw ConfigError("dr must be between 0 and 5, got " + std::to_string(multicast_dr));
  }
  if (ping_periodicity < 0 || ping_periodicity > 7) {
    throw ConfigError("ping_periodicity must be between 0 and 7, got " + std::to_string(ping_periodicity));
  }
  if (firmware_size == 0) throw ConfigError("firmware_size must be at least 1 byte");
  const std::size_t cap = radio::data_rate(multicast_dr).max_app_payload;
  const std::size_t frag = effective_fragment_size();
  if (frag > cap) {
    throw ConfigError("fragment_size " + std::to_string(frag) + " exceeds the " + std::to_string(cap) +
                      "-byte payload cap of DR" + std::to_string(multicast_dr) +
                      "; lower fragment_size or choose a slower data rate");
  }
  const std::size_t nb_frag = (firmware_size + frag - 1) / frag;
  if (nb_frag + redundancy > 0xffff) {
    throw ConfigError("firmware needs " + std::to_string(nb_frag) + " fragments plus " + std::to_string(redundancy) +
                      " redundant ones, above the 65535 the session header can count; raise fragment_size");
  }
  if (seeds.empty()) throw ConfigError("seeds must list at least one seed");
  double mass = 0.0;
  for (double p : dr_distribution) {
    if (!(p >= 0.0)) throw ConfigError("dr_distribution entries must be non-negative");
    mass += p;
  }
  if (std::abs(mass - 1.0) > 1e-6) throw ConfigError("dr_distribution must sum to 1, sums to " + fmt(mass));
  link.validate();
  path_loss.validate();
  if (!(reception.slope_per_db > 0)) throw ConfigError("reception_slope_per_db must be positive");
  if (gateway_receive_paths < 1) throw ConfigError("gateway_receive_paths must be at least 1");
  if (poll_payload + radio::kMacHeaderBytes > radio::kMacHeaderBytes + 51) {
    throw ConfigError("poll_payload must fit the 51-byte DR0 cap");
  }
  const auto check_range = [](const char* name, double lo, double hi) {
    if (!(lo >= 0.0) || !(hi >= lo)) {
      throw ConfigError(std::string(name) + ": need 0 <= min <= max, got " + fmt(lo) + " .. " + fmt(hi));
    }
  };
  check_range("poll_interval", poll_interval_min_s, poll_interval_max_s);
  check_range("answer_delay", answer_delay_min_s, answer_delay_max_s);
  check_range("retry_backoff", retry_backoff_min_s, retry_backoff_max_s);
  if (!(start_spread_s >= 0.0)) throw ConfigError("start_spread_s must not be negative");
  if (!(app_period_s > 0.0)) throw ConfigError("app_period_s must be positive");
  if (max_uplinks_per_device < 1) throw ConfigError("max_uplinks_per_device must be at least 1");
  if (!(phase_time_cap_s > 0.0)) throw ConfigError("phase_time_cap_s must be positive");
  if (start_guard_s && !(*start_guard_s >= 0.0)) throw ConfigError("start_guard_s must not be negative");
  if (!(start_guard_margin_s >= 0.0)) throw ConfigError("start_guard_margin_s must not be negative");
  if (!(clock_skew_max_s >= 0.0)) throw ConfigError("clock_skew_max_s must not be negative");
  if (!(multicast_guard_s >= 0.0)) throw ConfigError("multicast_guard_s must not be negative");
  if (!(power.tx_mw >= 0 && power.rx_mw >= 0 && power.idle_mw >= 0 && power.battery_j > 0)) {
    throw ConfigError("power constants must be non-negative and the battery positive");
  }
}

ScenarioConfig parse_config_text(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  ScenarioConfig c;
  // Convenience keys that fill the whole SIR matrix apply before any per-row override.
  std::optional<double> same_sf, cross_sf;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty() && body.empty()) {
      throw ConfigError("key '" + section + "' must appear inside a [section]");
    }
    for (const auto& [key, value] : body) {
      if (section == "radio" && key == "sir_same_sf_db") same_sf = to_double("radio.sir_same_sf_db", value.data());
      if (section == "radio" && key == "sir_cross_sf_db") cross_sf = to_double("radio.sir_cross_sf_db", value.data());
    }
  }
  if (same_sf || cross_sf) c.sir = radio::SirMatrix::with_defaults(same_sf.value_or(6.0), cross_sf.value_or(-8.0));

  const auto& table = fields();
  for (const auto& [section, body] : tree) {
    for (const auto& [key, value] : body) {
      if (section == "radio" && (key == "sir_same_sf_db" || key == "sir_cross_sf_db")) continue;
      auto it = std::find_if(table.begin(), table.end(),
                             [&](const Field& f) { return f.section == section && f.key == key; });
      if (it == table.end()) throw ConfigError("unknown key '" + section + "." + key + "'");
      it->set(c, value.data());
    }
  }
  return c;
}

ScenarioConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string write_config(const ScenarioConfig& config, bool include_seeds) {
  std::string out;
  std::string current;
  for (const auto& f : fields()) {
    if (!include_seeds && f.section == "scenario" && f.key == "seeds") continue;
    if (f.section != current) {
      if (!current.empty()) out += "\n";
      out += "[" + f.section + "]\n";
      current = f.section;
    }
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

std::string fingerprint(const ScenarioConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(write_config(config, false))));
  return buf;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& part : split(text, ',')) {
    if (part.empty()) continue;
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      const auto v = to_int("seeds", part);
      if (v < 0) throw ConfigError("seeds must not be negative");
      out.push_back(static_cast<std::uint64_t>(v));
      continue;
    }
    const auto lo = to_int("seeds", part.substr(0, dots));
    const auto hi = to_int("seeds", part.substr(dots + 2));
    if (lo < 0 || hi < lo) throw ConfigError("seed range '" + part + "' is empty or negative");
    for (auto s = lo; s <= hi; ++s) out.push_back(static_cast<std::uint64_t>(s));
  }
  if (out.empty()) throw ConfigError("seed list is empty");
  return out;
}

std::size_t parse_size(const std::string& text) {
  std::string t = trim(text);
  double scale = 1.0;
  if (!t.empty() && (t.back() == 'k' || t.back() == 'K')) {
    scale = 1024.0;
    t.pop_back();
  }
  const double v = to_double("size", t) * scale;
  if (!(v >= 0.0) || v != std::floor(v)) throw ConfigError("size '" + text + "' is not a whole byte count");
  return static_cast<std::size_t>(v);
}

}  // namespace fuotasim::cli
