#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fuotasim/common.hpp"

namespace fuotasim::metrics {

enum class Phase { Initial, Multicast };
const char* to_string(Phase phase);

struct EnergyBreakdown {
  double tx_j = 0.0;
  double rx_j = 0.0;
  double idle_j = 0.0;
  double total_j() const { return tx_j + rx_j + idle_j; }
};

struct DeviceReport {
  int id = 0;
  int dr = 0;
  EnergyBreakdown energy;
  double rx_time_s = 0.0;
  long uplinks = 0;
  long retransmissions = 0;
  long downlinks = 0;
  bool completed = false;  // initial: session acknowledged; multicast: image reassembled
  bool failed = false;
};

// Per failed uplink exchange, exactly one of these is counted.
struct LossCounters {
  long nr_collisions = 0;
  long nr_ulost = 0;
  long nr_no_down = 0;
  long total() const { return nr_collisions + nr_ulost + nr_no_down; }
};

struct PhaseReport {
  Phase phase = Phase::Initial;
  std::string config_fingerprint;
  double total_time_s = 0.0;
  std::optional<double> start_time_metric_min;  // initial phase only
  std::vector<DeviceReport> per_device;
  LossCounters losses;

  /// Completed devices over all devices.
  double efficiency() const;
  /// Named scalar metrics in a fixed order; aggregation and CSV emission run over these.
  std::vector<std::pair<std::string, double>> scalars() const;
};

struct Statistic {
  double mean = 0.0;
  double std = 0.0;
};

struct AggregateReport {
  std::string config_fingerprint;
  std::vector<std::uint64_t> seeds;
  std::vector<std::pair<std::string, Statistic>> metrics;  // order of the first report

  const Statistic& at(const std::string& name) const;
  std::size_t n_seeds() const { return seeds.size(); }
};

/// Sample mean and (n - 1) standard deviation of a series; std is 0 for a single value.
Statistic summarize(const std::vector<double>& values);

/// Element-wise statistics over per-seed reports. Throws AggregationError on
/// mixed fingerprints or an empty input.
AggregateReport aggregate(const std::vector<PhaseReport>& reports, const std::vector<std::uint64_t>& seeds);

/// Each value divided by the value stored under `reference_key`.
std::vector<std::pair<std::string, double>> rate_of_increase(const std::vector<std::pair<std::string, double>>& series,
                                                             const std::string& reference_key);

/// Share of each loss source in the total, in percent.
std::map<std::string, double> loss_shares(const LossCounters& losses);

}  // namespace fuotasim::metrics
