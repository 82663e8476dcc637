#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fuotasim/config.hpp"
#include "fuotasim/engine.hpp"
#include "fuotasim/fec.hpp"
#include "fuotasim/metrics.hpp"
#include "fuotasim/placement.hpp"
#include "fuotasim/protocol.hpp"

namespace fuotasim::sim {

enum class DeviceClass { A, BTemporary, CTemporary };

enum class UplinkKind { Poll, Answer, TimeRequest };

struct Device {
  int id = 0;
  PlacedDevice site;
  DeviceClass clazz = DeviceClass::A;
  double clock_skew_s = 0.0;
  protocol::DeviceSessionTable sessions;
  EnergyLedger energy;
  DutyCycleGate duty;

  long nr_sent = 0;
  long nr_retrans = 0;
  long nr_downlinks = 0;
  metrics::LossCounters losses;  // as observed at the gateway

  // Initial phase.
  std::optional<protocol::Command> pending_answer;
  bool synced = false;
  bool session_acked = false;  // device sent its session answer
  bool failed = false;
  std::uint8_t next_token = 0;

  // Multicast phase.
  bool in_session = false;
  bool completed = false;
  double session_open = 0.0;
  double session_close = 0.0;
  double completion_time = 0.0;
  EnergyLedger mc_energy;
  std::optional<fec::Decoder> decoder;

  /// Device clock reading at true time t: GPS seconds plus skew plus applied corrections.
  double local_gps(double t, std::uint64_t gps_start) const {
    return static_cast<double>(gps_start) + t + clock_skew_s + static_cast<double>(sessions.clock_offset);
  }
};

enum class ServerStep { GroupSetup, FragSetup, AwaitTimeSync, SessionSetup, Done };

struct ServerDeviceState {
  ServerStep step = ServerStep::GroupSetup;
  bool time_synced = false;
  double acked_at = 0.0;
};

struct UplinkFrame {
  std::uint64_t id = 0;
  int device = 0;
  int channel = 0;
  int dr = 0;
  double start = 0.0;
  double end = 0.0;
  double rx_power_dbm = 0.0;
  std::size_t phy_len = 0;
  UplinkKind kind = UplinkKind::Poll;
  std::optional<protocol::Command> payload;
  bool capacity_dropped = false;
};

struct SimulationOutcome {
  metrics::PhaseReport initial;
  metrics::PhaseReport multicast;
  double session_start_s = 0.0;  // true time the multicast window opens
  double start_guard_s = 0.0;
  std::string transcript;
};

class Simulation {
 public:
  Simulation(const cli::ScenarioConfig& config, std::uint64_t seed, bool transcript);

  /// Unicast setup of every device until all acknowledged the session or failed.
  metrics::PhaseReport run_initial_phase();
  /// Multicast class C or B distribution of the firmware image.
  metrics::PhaseReport run_multicast_phase();

  const std::vector<Device>& devices() const { return devices_; }
  const std::vector<ServerDeviceState>& server_state() const { return server_; }
  const Transcript& transcript() const { return transcript_; }
  double session_start() const { return session_true_; }
  double first_session_request() const { return first_session_req_; }
  /// Start-time metric of the initial phase, in seconds after the first session request.
  double start_time_metric_s() const { return start_metric_s_; }
  fec::FragmentPlan fragment_plan() const;
  std::uint32_t session_timeout() const;

 private:
  struct Downlink {
    protocol::Command cmd;
    double start = 0.0;
    double airtime = 0.0;
    int channel = 0;
    int dr = 0;
    std::size_t phy_len = 0;
    int window = 1;
  };

  // Initial phase.
  void schedule_uplink(int dev, double earliest, UplinkKind kind, bool retransmission);
  void on_tx_start(UplinkFrame frame, bool retransmission);
  void on_tx_end(std::uint64_t frame_id);
  std::optional<protocol::Command> server_on_uplink(const UplinkFrame& frame);
  std::optional<Downlink> try_downlink(const UplinkFrame& frame, protocol::Command cmd);
  void on_rx1(int dev, UplinkKind kind, int uplink_dr, std::optional<Downlink> down);
  void on_rx2(int dev, UplinkKind kind, std::optional<Downlink> down);
  bool receive_downlink(Device& d, const Downlink& down);
  void device_after_windows(int dev, UplinkKind kind, const std::optional<protocol::Command>& cmd, double now);
  void finish_initial_phase(double now);
  protocol::Command session_request() const;
  bool all_settled() const;
  metrics::PhaseReport initial_report(double t_first, double t_end) const;

  // Multicast phase.
  void open_session(int dev, double now);
  void close_session(int dev, double now);
  void deliver_fragment(std::size_t index, double start, double end);
  void send_fragment(std::size_t index, double start);
  void class_b_window(double beacon);
  void ping_slot(double t, double beacon);
  double next_beacon(double t) const;
  void run_class_c();
  void run_class_b();
  metrics::PhaseReport multicast_report(double phase_start, double phase_end, double first_fragment,
                                        double last_fragment_end) const;

  bool gateway_free(double start, double airtime) const;
  void gateway_commit(int channel, double start, double airtime, const std::string& what);
  std::string actor(int dev) const;
  double downlink_rx_power(const Device& d) const;
  double uplink_rx_power(const Device& d) const;

  cli::ScenarioConfig config_;
  std::uint64_t seed_;
  Transcript transcript_;
  EventQueue queue_;
  Rng mac_rng_;
  Rng channel_rng_;
  Rng session_rng_;

  std::vector<Device> devices_;
  std::vector<ServerDeviceState> server_;
  DutyCycleGate gateway_duty_;
  std::vector<std::pair<double, double>> gateway_tx_;  // scheduled downlink intervals
  std::vector<UplinkFrame> air_;
  std::uint64_t next_frame_id_ = 1;
  double max_uplink_airtime_ = 0.0;

  double first_uplink_ = -1.0;
  double first_session_req_ = -1.0;
  double session_true_ = 0.0;
  double start_metric_s_ = 0.0;
  bool initial_done_ = false;
  double initial_end_ = 0.0;

  // Multicast bookkeeping.
  std::size_t next_fragment_ = 0;
  double first_fragment_ = -1.0;
  double last_fragment_end_ = 0.0;
  double mc_phase_start_ = 0.0;
  double fragment_airtime_ = 0.0;
  int open_sessions_ = 0;
  int pending_opens_ = 0;
  double b_window_ = -1.0;
  double fragments_from_ = 0.0;

  fec::Bytes image_;
  std::vector<fec::Fragment> coded_;
};

/// Both phases for one seed. An unset start guard runs the initial phase twice:
/// the first pass measures the start-time metric, the second uses it plus the margin.
SimulationOutcome run_fuota(const cli::ScenarioConfig& config, std::uint64_t seed, bool transcript = false);

}  // namespace fuotasim::sim
