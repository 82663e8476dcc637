#pragma once

#include <string>
#include <vector>

namespace fuotasim::sim {

struct DutyViolation {
  std::string actor;
  int channel = 0;
  double time = 0.0;
  std::string rule;  // "gate" or "window"
};

struct DutyAudit {
  std::size_t transmissions = 0;
  std::vector<DutyViolation> violations;
  bool ok() const { return violations.empty(); }
};

/// Replays every "tx-start" line of a transcript per (actor, channel) and checks
/// that each start respects the previous transmission's off-time, and that the
/// airtime inside any window of each listed length stays within
/// duty_cycle * W plus one maximal airtime.
DutyAudit audit_duty_cycle(const std::string& transcript, const std::vector<double>& windows = {600.0, 3600.0});

}  // namespace fuotasim::sim
