#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fuotasim/config.hpp"
#include "fuotasim/metrics.hpp"

namespace fuotasim::cli {

struct SweepAxis {
  std::string name;  // devices, class, dr, p, firmware_size, redundancy
  std::vector<std::string> values;
};

/// Parses "name=v1,v2" or "name=a..b" (integer range). Throws ConfigError.
SweepAxis parse_axis(const std::string& text);

/// Sets one axis field on a config. Throws ConfigError on unknown axes or bad values.
void apply_axis_value(ScenarioConfig& config, const std::string& name, const std::string& value);

/// Cartesian product of the axes over `base`. Axes are applied in a fixed
/// canonical order, so the result does not depend on the order they were given in.
std::vector<ScenarioConfig> expand_sweep(const ScenarioConfig& base, std::vector<SweepAxis> axes);

struct SeedRun {
  metrics::PhaseReport initial;
  metrics::PhaseReport multicast;
  std::string transcript;
};

struct PointResult {
  ScenarioConfig config;
  std::vector<SeedRun> runs;  // in seed order
  metrics::AggregateReport initial;
  metrics::AggregateReport multicast;
  std::string error;  // empty when every seed ran
};

/// Runs every (point, seed) pair on up to `jobs` threads. Results come back in
/// point order, each with its seeds in list order, whatever the scheduling.
std::vector<PointResult> run_points(const std::vector<ScenarioConfig>& points, int jobs, bool transcript);

/// Long format: one row per (point, phase, metric).
std::string results_csv(const std::vector<PointResult>& results);

/// Whitespace-separated wide table, one row per point, for plotting tools.
std::string results_dat(const std::vector<PointResult>& results);

struct FecStudyPoint {
  double loss = 0.0;
  std::size_t trials = 0;
  std::size_t successes = 0;
  double success_rate() const { return trials == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(trials); }
};

/// Decoding success over independent fragment erasures at each loss rate.
std::vector<FecStudyPoint> fec_study(std::size_t nb_frag, std::size_t redundancy, const std::vector<double>& losses,
                                     std::size_t trials, std::uint64_t seed);

std::string fec_study_csv(std::size_t nb_frag, std::size_t redundancy, const std::vector<FecStudyPoint>& points);

}  // namespace fuotasim::cli
