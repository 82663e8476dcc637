#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fuotasim/common.hpp"
#include "fuotasim/radio.hpp"

namespace fuotasim::cli {

enum class MulticastClass { B, C };

struct PowerProfile {
  double tx_mw = 132.0;
  double rx_mw = 48.0;
  double idle_mw = 0.018;
  double battery_j = 11100.0;
  friend bool operator==(const PowerProfile&, const PowerProfile&) = default;
};

struct ScenarioConfig {
  // [scenario]
  int devices = 100;
  MulticastClass multicast_class = MulticastClass::C;
  int multicast_dr = 0;
  int ping_periodicity = 0;
  std::size_t firmware_size = 5 * 1024;
  std::size_t redundancy = 30;
  std::size_t fragment_size = 0;  // 0 selects the multicast DR's maximum payload
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::array<double, radio::kNumDataRates> dr_distribution{0.06, 0.08, 0.08, 0.11, 0.22, 0.45};

  // [radio]
  radio::LinkBudget link;
  radio::PathLossParams path_loss;
  radio::ReceptionModel reception;
  radio::SirMatrix sir = radio::SirMatrix::with_defaults();
  double placement_margin_db = 0.6;
  bool ideal_channel = false;  // no fading, no collisions, no capacity limit
  int gateway_receive_paths = 8;

  // [mac]
  bool duty_cycle_enabled = true;
  std::size_t poll_payload = 15;
  double poll_interval_min_s = 30.0;
  double poll_interval_max_s = 90.0;
  double answer_delay_min_s = 1.0;
  double answer_delay_max_s = 5.0;
  double retry_backoff_min_s = 8.0;
  double retry_backoff_max_s = 16.0;
  double start_spread_s = 60.0;
  double app_period_s = 1800.0;
  long max_uplinks_per_device = 5000;
  double phase_time_cap_s = 30.0 * 86400.0;

  // [session]
  std::optional<double> start_guard_s;  // unset: measured start time plus margin
  double start_guard_margin_s = 60.0;
  double clock_skew_max_s = 64.0;
  double multicast_guard_s = 1.0;
  std::uint64_t gps_start = 1'300'000'000;

  // [energy]
  PowerProfile power;

  std::size_t effective_fragment_size() const;
  /// Throws ConfigError with an actionable message on the first violated rule.
  void validate() const;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

const char* to_string(MulticastClass c);
MulticastClass parse_class(const std::string& text);

/// Parses the INI-style text format. Unknown keys and malformed values throw ConfigError.
ScenarioConfig parse_config_text(const std::string& text);
ScenarioConfig load_config_file(const std::string& path);

/// Canonical text of every field; parse_config_text(write_config(c)) == c.
std::string write_config(const ScenarioConfig& config, bool include_seeds = true);

/// 16 hex digits identifying everything but the seed list.
std::string fingerprint(const ScenarioConfig& config);

/// Parses "1,2,5..8" into an ordered list.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Parses "5k", "10240", "1.5k" style byte counts.
std::size_t parse_size(const std::string& text);

}  // namespace fuotasim::cli
