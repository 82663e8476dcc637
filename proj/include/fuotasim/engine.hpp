#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "fuotasim/common.hpp"
#include "fuotasim/config.hpp"
#include "fuotasim/radio.hpp"

// Building blocks of the discrete-event kernel.
namespace fuotasim::sim {

enum class EventKind { TxStart, TxEnd, RxWindowOpen, Beacon, PingSlot, SessionStart, Timer };
const char* to_string(EventKind kind);

/// Line-oriented event log: "time actor kind detail".
class Transcript {
 public:
  explicit Transcript(bool enabled = false) : enabled_(enabled) {}
  bool enabled() const { return enabled_; }
  void write(double time, const std::string& actor, const std::string& kind, const std::string& detail);
  const std::string& text() const { return text_; }
  void clear() { text_.clear(); }

 private:
  bool enabled_;
  std::string text_;
};

class EventQueue {
 public:
  using Action = std::function<void()>;

  /// Scheduling in the past is a logic error; ties run in insertion order.
  void schedule(double time, EventKind kind, Action action);
  /// Dispatches the earliest event. Returns false when the queue is empty.
  bool step();
  /// Runs until empty or until the next event lies beyond `until`.
  void run_until(double until);
  void clear();

  double now() const { return now_; }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  std::uint64_t dispatched() const { return dispatched_; }
  /// Kind of the event being dispatched (or last dispatched).
  EventKind current_kind() const { return current_kind_; }

 private:
  struct Entry {
    double time;
    std::uint64_t seq;
    EventKind kind;
    Action action;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t dispatched_ = 0;
  double now_ = 0.0;
  EventKind current_kind_ = EventKind::Timer;
};

/// Per-channel off-time bookkeeping for one transmitter.
class DutyCycleGate {
 public:
  DutyCycleGate() = default;
  DutyCycleGate(std::span<const radio::Channel> channels, bool enabled);

  /// Earliest start at or after `now` allowed on `channel`.
  double transmit_at(int channel, double now) const;
  bool free_at(int channel, double t) const { return transmit_at(channel, t) <= t; }
  /// Records a transmission; the channel stays closed for airtime * (1/dc - 1) after it ends.
  void commit(int channel, double start, double airtime);
  double next_allowed(int channel) const;
  /// Silence enforced after `airtime` on `channel`.
  double off_time(int channel, double airtime) const;

 private:
  std::vector<double> duty_;
  std::vector<double> next_allowed_;
  bool enabled_ = true;
};

class EnergyLedger {
 public:
  void add_tx(double seconds);
  void add_rx(double seconds);
  double tx_time() const { return tx_; }
  double rx_time() const { return rx_; }
  /// Remaining lifetime spent idle; throws StateError if tx + rx exceed it.
  double idle_time(double lifetime) const;
  double tx_energy_j(const cli::PowerProfile& p) const { return tx_ * p.tx_mw / 1000.0; }
  double rx_energy_j(const cli::PowerProfile& p) const { return rx_ * p.rx_mw / 1000.0; }
  double idle_energy_j(double lifetime, const cli::PowerProfile& p) const {
    return idle_time(lifetime) * p.idle_mw / 1000.0;
  }
  double energy_j(double lifetime, const cli::PowerProfile& p) const {
    return tx_energy_j(p) + rx_energy_j(p) + idle_energy_j(lifetime, p);
  }

 private:
  double tx_ = 0.0;
  double rx_ = 0.0;
};

struct ClassBSchedule {
  static constexpr double kBeaconPeriod = 128.0;
  static constexpr double kSlotLength = 0.030;
  static constexpr int kSlotsPerWindow = 4096;

  int ping_periodicity = 0;

  int slots_per_window() const { return 1 << (7 - ping_periodicity); }
  int period_slots() const { return 1 << (5 + ping_periodicity); }
  double ping_period() const { return period_slots() * kSlotLength; }
  /// Offset in slots, uniform in [0, period_slots - 1]; redrawn every window.
  int draw_offset(Rng& rng) const;
  void validate() const;
};

/// Open times of the assigned ping slots in the window starting at `beacon_time`.
std::vector<double> ping_slot_times(const ClassBSchedule& schedule, double beacon_time, int ping_offset);

/// Time to push `fragments` frames of `frag_size` payload bytes one after another
/// through a single transmitter on one channel, duty cycle permitting.
double unicast_transfer_time(std::size_t fragments, std::size_t frag_size, int dr, double duty_cycle);

}  // namespace fuotasim::sim
