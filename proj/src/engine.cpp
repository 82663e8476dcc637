#include "fuotasim/engine.hpp"

#include <algorithm>
#include <cstdio>

namespace fuotasim::sim {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::TxStart: return "tx-start";
    case EventKind::TxEnd: return "tx-end";
    case EventKind::RxWindowOpen: return "rx-window-open";
    case EventKind::Beacon: return "beacon";
    case EventKind::PingSlot: return "ping-slot";
    case EventKind::SessionStart: return "session-start";
    case EventKind::Timer: return "timer";
  }
  return "?";
}

void Transcript::write(double time, const std::string& actor, const std::string& kind, const std::string& detail) {
  if (!enabled_) return;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f ", time);
  text_ += buf;
  text_ += actor;
  text_ += ' ';
  text_ += kind;
  if (!detail.empty()) {
    text_ += ' ';
    text_ += detail;
  }
  text_ += '\n';
}

void EventQueue::schedule(double time, EventKind kind, Action action) {
  if (time < now_) throw StateError("event scheduled in the past");
  heap_.push(Entry{time, next_seq_++, kind, std::move(action)});
}

bool EventQueue::step() {
  if (heap_.empty()) return false;
  // priority_queue::top is const; the action is copied out before popping.
  Entry e = heap_.top();
  heap_.pop();
  now_ = e.time;
  current_kind_ = e.kind;
  ++dispatched_;
  e.action();
  return true;
}

void EventQueue::run_until(double until) {
  while (!heap_.empty() && heap_.top().time <= until) step();
}

void EventQueue::clear() { heap_ = {}; }

DutyCycleGate::DutyCycleGate(std::span<const radio::Channel> channels, bool enabled)
    : next_allowed_(channels.size(), 0.0), enabled_(enabled) {
  for (const auto& ch : channels) duty_.push_back(ch.duty_cycle);
}

double DutyCycleGate::transmit_at(int channel, double now) const {
  return enabled_ ? std::max(now, next_allowed(channel)) : now;
}

void DutyCycleGate::commit(int channel, double start, double airtime) {
  if (!(airtime > 0)) throw std::domain_error("airtime must be positive");
  auto& slot = next_allowed_.at(static_cast<std::size_t>(channel));
  slot = std::max(slot, start + airtime + off_time(channel, airtime));
}

double DutyCycleGate::next_allowed(int channel) const { return next_allowed_.at(static_cast<std::size_t>(channel)); }

double DutyCycleGate::off_time(int channel, double airtime) const {
  return airtime * (1.0 / duty_.at(static_cast<std::size_t>(channel)) - 1.0);
}

void EnergyLedger::add_tx(double seconds) {
  if (seconds < 0) throw std::domain_error("negative tx time");
  tx_ += seconds;
}

void EnergyLedger::add_rx(double seconds) {
  if (seconds < 0) throw std::domain_error("negative rx time");
  rx_ += seconds;
}

double EnergyLedger::idle_time(double lifetime) const {
  const double idle = lifetime - tx_ - rx_;
  // Rounding in long sums may leave a few nanoseconds of negative slack.
  if (idle < -1e-6) throw StateError("radio activity exceeds the device lifetime");
  return std::max(0.0, idle);
}

int ClassBSchedule::draw_offset(Rng& rng) const {
  return std::uniform_int_distribution<int>(0, period_slots() - 1)(rng);
}

void ClassBSchedule::validate() const {
  if (ping_periodicity < 0 || ping_periodicity > 7) throw std::domain_error("ping periodicity must be in 0..7");
}

std::vector<double> ping_slot_times(const ClassBSchedule& schedule, double beacon_time, int ping_offset) {
  schedule.validate();
  if (ping_offset < 0 || ping_offset >= schedule.period_slots()) throw std::domain_error("ping offset out of range");
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(schedule.slots_per_window()));
  for (int k = 0; k < schedule.slots_per_window(); ++k) {
    times.push_back(beacon_time + (ping_offset + k * schedule.period_slots()) * ClassBSchedule::kSlotLength);
  }
  return times;
}

double unicast_transfer_time(std::size_t fragments, std::size_t frag_size, int dr, double duty_cycle) {
  if (fragments == 0) return 0.0;
  const double airtime = radio::time_on_air(radio::data_rate(dr), frag_size + radio::kMacHeaderBytes);
  // Every frame but the last is followed by its mandatory silence.
  return static_cast<double>(fragments - 1) * airtime / duty_cycle + airtime;
}

}  // namespace fuotasim::sim
