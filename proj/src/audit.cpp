#include "fuotasim/audit.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace fuotasim::sim {

namespace {

struct Tx {
  double start;
  double airtime;
  double duty;
};

constexpr double kTolerance = 1e-6;

}  // namespace

DutyAudit audit_duty_cycle(const std::string& transcript, const std::vector<double>& windows) {
  std::map<std::pair<std::string, int>, std::vector<Tx>> streams;
  DutyAudit audit;
  std::istringstream in(transcript);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    double time = 0.0;
    std::string actor, kind;
    if (!(fields >> time >> actor >> kind) || kind != "tx-start") continue;
    int channel = -1;
    double airtime = -1.0, duty = -1.0;
    std::string token;
    while (fields >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      if (key == "ch") channel = std::stoi(value);
      if (key == "airtime") airtime = std::stod(value);
      if (key == "dc") duty = std::stod(value);
    }
    if (channel < 0 || airtime <= 0 || duty <= 0) continue;
    streams[{actor, channel}].push_back({time, airtime, duty});
    ++audit.transmissions;
  }

  for (auto& [key, txs] : streams) {
    std::stable_sort(txs.begin(), txs.end(), [](const Tx& a, const Tx& b) { return a.start < b.start; });
    double max_airtime = 0.0;
    for (const auto& t : txs) max_airtime = std::max(max_airtime, t.airtime);
    // Transcript times carry six decimals, so allow for their rounding.
    for (std::size_t i = 1; i < txs.size(); ++i) {
      const auto& prev = txs[i - 1];
      const double allowed = prev.start + prev.airtime / prev.duty;
      if (txs[i].start + kTolerance + 1e-6 < allowed) {
        audit.violations.push_back({key.first, key.second, txs[i].start, "gate"});
      }
    }
    for (double w : windows) {
      std::size_t hi = 0;
      double sum = 0.0;
      for (std::size_t lo = 0; lo < txs.size(); ++lo) {
        while (hi < txs.size() && txs[hi].start < txs[lo].start + w) sum += txs[hi++].airtime;
        if (sum > txs[lo].duty * w + max_airtime + kTolerance) {
          audit.violations.push_back({key.first, key.second, txs[lo].start, "window"});
        }
        sum -= txs[lo].airtime;
      }
    }
  }
  return audit;
}

}  // namespace fuotasim::sim
