#include "fuotasim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fuotasim::metrics {

const char* to_string(Phase phase) { return phase == Phase::Initial ? "initial" : "multicast"; }

double PhaseReport::efficiency() const {
  if (per_device.empty()) return 0.0;
  const auto done = std::count_if(per_device.begin(), per_device.end(), [](const DeviceReport& d) { return d.completed; });
  return static_cast<double>(done) / static_cast<double>(per_device.size());
}

std::vector<std::pair<std::string, double>> PhaseReport::scalars() const {
  const double n = per_device.empty() ? 1.0 : static_cast<double>(per_device.size());
  double energy_all = 0, uplinks = 0, retrans = 0, downlinks = 0, rx_time = 0;
  double energy_done = 0, rx_done = 0;
  long n_done = 0;
  for (const auto& d : per_device) {
    energy_all += d.energy.total_j();
    uplinks += static_cast<double>(d.uplinks);
    retrans += static_cast<double>(d.retransmissions);
    downlinks += static_cast<double>(d.downlinks);
    rx_time += d.rx_time_s;
    if (d.completed) {
      energy_done += d.energy.total_j();
      rx_done += d.rx_time_s;
      ++n_done;
    }
  }
  const double nd = n_done == 0 ? 1.0 : static_cast<double>(n_done);
  std::vector<std::pair<std::string, double>> out;
  out.emplace_back("efficiency_pct", 100.0 * efficiency());
  out.emplace_back("total_time_s", total_time_s);
  out.emplace_back("total_time_min", total_time_s / 60.0);
  out.emplace_back("start_time_min", start_time_metric_min.value_or(0.0));
  // Multicast energy is averaged over updated devices only; the all-device mean is kept alongside.
  out.emplace_back("energy_j", phase == Phase::Multicast ? energy_done / nd : energy_all / n);
  out.emplace_back("energy_all_j", energy_all / n);
  out.emplace_back("rx_time_s", phase == Phase::Multicast ? rx_done / nd : rx_time / n);
  out.emplace_back("uplinks_per_device", uplinks / n);
  out.emplace_back("retransmissions_per_device", retrans / n);
  out.emplace_back("downlinks_per_device", downlinks / n);
  out.emplace_back("nr_collisions", static_cast<double>(losses.nr_collisions));
  out.emplace_back("nr_ulost", static_cast<double>(losses.nr_ulost));
  out.emplace_back("nr_no_down", static_cast<double>(losses.nr_no_down));
  return out;
}

const Statistic& AggregateReport::at(const std::string& name) const {
  for (const auto& [key, stat] : metrics) {
    if (key == name) return stat;
  }
  throw std::out_of_range("no aggregated metric named " + name);
}

Statistic summarize(const std::vector<double>& values) {
  Statistic s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

AggregateReport aggregate(const std::vector<PhaseReport>& reports, const std::vector<std::uint64_t>& seeds) {
  if (reports.empty()) throw AggregationError("nothing to aggregate");
  if (!seeds.empty() && seeds.size() != reports.size()) {
    throw AggregationError("seed list and report list differ in length");
  }
  AggregateReport out;
  out.config_fingerprint = reports.front().config_fingerprint;
  out.seeds = seeds;
  const auto first = reports.front().scalars();
  std::vector<std::vector<double>> columns(first.size());
  for (const auto& r : reports) {
    if (r.config_fingerprint != out.config_fingerprint) {
      throw AggregationError("reports come from different configurations (" + out.config_fingerprint + " vs " +
                             r.config_fingerprint + ")");
    }
    if (r.phase != reports.front().phase) throw AggregationError("reports come from different phases");
    const auto s = r.scalars();
    for (std::size_t i = 0; i < s.size(); ++i) columns[i].push_back(s[i].second);
  }
  for (std::size_t i = 0; i < first.size(); ++i) out.metrics.emplace_back(first[i].first, summarize(columns[i]));
  return out;
}

std::vector<std::pair<std::string, double>> rate_of_increase(const std::vector<std::pair<std::string, double>>& series,
                                                             const std::string& reference_key) {
  auto ref = std::find_if(series.begin(), series.end(), [&](const auto& kv) { return kv.first == reference_key; });
  if (ref == series.end()) throw std::out_of_range("no reference entry " + reference_key);
  if (ref->second == 0.0) throw std::domain_error("reference value is zero");
  std::vector<std::pair<std::string, double>> out;
  out.reserve(series.size());
  for (const auto& [key, value] : series) out.emplace_back(key, value / ref->second);
  return out;
}

std::map<std::string, double> loss_shares(const LossCounters& losses) {
  const double total = static_cast<double>(losses.total());
  const auto share = [total](long v) { return total == 0.0 ? 0.0 : 100.0 * static_cast<double>(v) / total; };
  return {{"nr_collisions", share(losses.nr_collisions)},
          {"nr_ulost", share(losses.nr_ulost)},
          {"nr_no_down", share(losses.nr_no_down)}};
}

}  // namespace fuotasim::metrics
