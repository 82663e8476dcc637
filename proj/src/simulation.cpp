#include "fuotasim/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace fuotasim::sim {

namespace {

constexpr std::uint64_t kStreamPlacement = 1;
constexpr std::uint64_t kStreamMac = 2;
constexpr std::uint64_t kStreamChannel = 3;
constexpr std::uint64_t kStreamImage = 4;
constexpr std::uint64_t kStreamSession = 5;
constexpr std::uint64_t kStreamClock = 6;

constexpr double kRx1Delay = 1.0;
constexpr double kRx2Delay = 2.0;
constexpr std::uint8_t kGroupId = 0;
constexpr std::uint8_t kFragSessionId = 0;
constexpr std::uint32_t kMulticastAddress = 0x01ff0001;

template <typename... Args>
std::string format(const char* fmt, Args... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

const char* kind_name(UplinkKind kind) {
  switch (kind) {
    case UplinkKind::Poll: return "poll";
    case UplinkKind::Answer: return "answer";
    case UplinkKind::TimeRequest: return "app-time-req";
  }
  return "?";
}

bool is_session_answer(const protocol::Command& cmd) {
  if (const auto* c = std::get_if<protocol::McClassCSessionAns>(&cmd)) return !c->error;
  if (const auto* b = std::get_if<protocol::McClassBSessionAns>(&cmd)) return !b->error;
  return false;
}

}  // namespace

Simulation::Simulation(const cli::ScenarioConfig& config, std::uint64_t seed, bool transcript)
    : config_(config),
      seed_(seed),
      transcript_(transcript),
      mac_rng_(make_stream(seed, kStreamMac)),
      channel_rng_(make_stream(seed, kStreamChannel)),
      session_rng_(make_stream(seed, kStreamSession)),
      gateway_duty_(radio::default_channels(), config.duty_cycle_enabled) {
  config_.validate();
  Rng placement = make_stream(seed, kStreamPlacement);
  const auto sites = place_devices(config_.devices, config_.dr_distribution, config_.path_loss, config_.link,
                                   config_.placement_margin_db, placement);
  Rng clock = make_stream(seed, kStreamClock);
  devices_.resize(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    Device& d = devices_[i];
    d.id = static_cast<int>(i);
    d.site = sites[i];
    d.clock_skew_s = uniform(clock, -config_.clock_skew_max_s, config_.clock_skew_max_s);
    d.duty = DutyCycleGate(radio::default_channels(), config_.duty_cycle_enabled);
  }
  server_.resize(devices_.size());
  max_uplink_airtime_ =
      radio::time_on_air(radio::data_rate(0), std::max<std::size_t>(config_.poll_payload, 6) + radio::kMacHeaderBytes);
}

fec::FragmentPlan Simulation::fragment_plan() const {
  return fec::plan_fragments(config_.firmware_size, config_.effective_fragment_size(), config_.redundancy);
}

std::uint32_t Simulation::session_timeout() const {
  const auto plan = fragment_plan();
  const double n = static_cast<double>(plan.total_fragments());
  const double airtime =
      radio::time_on_air(radio::data_rate(config_.multicast_dr), plan.frag_size + radio::kMacHeaderBytes);
  const double dc = config_.duty_cycle_enabled ? radio::default_channels()[radio::kDownlinkChannel].duty_cycle : 1.0;
  double seconds = 0.0;
  if (config_.multicast_class == cli::MulticastClass::C) {
    seconds = n * airtime / dc + config_.multicast_guard_s + 60.0;
  } else {
    const ClassBSchedule schedule{config_.ping_periodicity};
    seconds = n * std::max(airtime / dc, schedule.ping_period()) * 1.5 + 2.0 * ClassBSchedule::kBeaconPeriod;
  }
  return static_cast<std::uint32_t>(std::ceil(seconds));
}

std::string Simulation::actor(int dev) const { return "dev" + std::to_string(dev); }

double Simulation::uplink_rx_power(const Device& d) const {
  return radio::received_power(config_.link.tx_power_dbm, config_.link.device_antenna_gain_db,
                               config_.link.gateway_antenna_gain_db, d.site.path_loss_db);
}

double Simulation::downlink_rx_power(const Device& d) const {
  return radio::received_power(config_.link.tx_power_dbm, config_.link.gateway_antenna_gain_db,
                               config_.link.device_antenna_gain_db, d.site.path_loss_db);
}

bool Simulation::gateway_free(double start, double airtime) const {
  return std::none_of(gateway_tx_.begin(), gateway_tx_.end(),
                      [&](const auto& iv) { return start < iv.second && start + airtime > iv.first; });
}

void Simulation::gateway_commit(int channel, double start, double airtime, const std::string& what) {
  gateway_duty_.commit(channel, start, airtime);
  const double horizon = queue_.now() - 10.0;
  std::erase_if(gateway_tx_, [horizon](const auto& iv) { return iv.second < horizon; });
  gateway_tx_.emplace_back(start, start + airtime);
  if (!transcript_.enabled()) return;
  const double dc = config_.duty_cycle_enabled ? radio::default_channels()[static_cast<std::size_t>(channel)].duty_cycle
                                               : 1.0;
  std::string detail = format("ch=%d airtime=%.9f dc=%g ", channel, airtime, dc) + what;
  if (start <= queue_.now()) {
    transcript_.write(start, "gw", to_string(EventKind::TxStart), detail);
  } else {
    queue_.schedule(start, EventKind::TxStart,
                    [this, start, detail] { transcript_.write(start, "gw", to_string(EventKind::TxStart), detail); });
  }
}

// ---------------------------------------------------------------------------
// Initial phase

void Simulation::schedule_uplink(int dev, double earliest, UplinkKind kind, bool retransmission) {
  Device& d = devices_[static_cast<std::size_t>(dev)];
  if (d.failed || initial_done_) return;
  if (d.nr_sent >= config_.max_uplinks_per_device) {
    d.failed = true;
    transcript_.write(queue_.now(), actor(dev), "failed", "reason=uplink-cap");
    if (all_settled()) finish_initial_phase(queue_.now());
    return;
  }
  const int channel = std::uniform_int_distribution<int>(0, radio::kNumUplinkChannels - 1)(mac_rng_);
  const double t = d.duty.transmit_at(channel, earliest);
  queue_.schedule(t, EventKind::TxStart, [this, dev, channel, kind, retransmission] {
    UplinkFrame frame;
    frame.device = dev;
    frame.channel = channel;
    frame.kind = kind;
    on_tx_start(std::move(frame), retransmission);
  });
}

void Simulation::on_tx_start(UplinkFrame frame, bool retransmission) {
  Device& d = devices_[static_cast<std::size_t>(frame.device)];
  const double now = queue_.now();
  std::size_t app_len = config_.poll_payload;
  if (frame.kind == UplinkKind::Answer) {
    frame.payload = d.pending_answer;
  } else if (frame.kind == UplinkKind::TimeRequest) {
    const auto device_time = static_cast<std::uint64_t>(std::floor(d.local_gps(now, config_.gps_start)));
    frame.payload = protocol::AppTimeReq{protocol::GpsTime::from(device_time), d.next_token++};
  }
  if (frame.payload) app_len = protocol::encode_command(*frame.payload).bytes.size();

  frame.id = next_frame_id_++;
  frame.dr = d.site.dr;
  frame.phy_len = app_len + radio::kMacHeaderBytes;
  frame.start = now;
  const double airtime = radio::time_on_air(radio::data_rate(frame.dr), frame.phy_len);
  frame.end = now + airtime;
  frame.rx_power_dbm = uplink_rx_power(d);

  d.duty.commit(frame.channel, now, airtime);
  d.energy.add_tx(airtime);
  ++d.nr_sent;
  if (retransmission) ++d.nr_retrans;
  if (first_uplink_ < 0) first_uplink_ = now;

  const double horizon = now - 2.0 * max_uplink_airtime_ - 1.0;
  std::erase_if(air_, [horizon](const UplinkFrame& f) { return f.end < horizon; });
  if (!config_.ideal_channel) {
    const auto busy = std::count_if(air_.begin(), air_.end(), [now](const UplinkFrame& f) {
      return f.start <= now && f.end > now && !f.capacity_dropped;
    });
    frame.capacity_dropped = busy >= config_.gateway_receive_paths;
  }
  if (transcript_.enabled()) {
    const double dc = config_.duty_cycle_enabled
                          ? radio::default_channels()[static_cast<std::size_t>(frame.channel)].duty_cycle
                          : 1.0;
    transcript_.write(now, actor(frame.device), to_string(EventKind::TxStart),
                      format("ch=%d airtime=%.9f dc=%g dr=%d len=%zu type=%s%s", frame.channel, airtime, dc, frame.dr,
                             frame.phy_len, frame.payload ? protocol::name_of(*frame.payload) : kind_name(frame.kind),
                             retransmission ? " retx" : ""));
  }
  const std::uint64_t id = frame.id;
  air_.push_back(std::move(frame));
  queue_.schedule(now + airtime, EventKind::TxEnd, [this, id] { on_tx_end(id); });
}

void Simulation::on_tx_end(std::uint64_t frame_id) {
  const auto it = std::find_if(air_.begin(), air_.end(), [frame_id](const UplinkFrame& f) { return f.id == frame_id; });
  if (it == air_.end()) throw StateError("uplink frame vanished before its end");
  const UplinkFrame frame = *it;
  Device& d = devices_[static_cast<std::size_t>(frame.device)];

  enum class Outcome { Received, Collision, Faded } outcome = Outcome::Received;
  if (!config_.ideal_channel) {
    if (frame.capacity_dropped) {
      outcome = Outcome::Collision;
    } else {
      const double p = radio::reception_probability(frame.rx_power_dbm, radio::data_rate(frame.dr), frame.phy_len,
                                                    config_.link, config_.reception);
      if (uniform(channel_rng_, 0.0, 1.0) >= p) {
        outcome = Outcome::Faded;
      } else {
        std::vector<radio::ReceivedFrame> others;
        for (const auto& f : air_) {
          if (f.id != frame.id && f.channel == frame.channel && f.start < frame.end && f.end > frame.start) {
            others.push_back({f.id, f.dr, f.rx_power_dbm});
          }
        }
        if (!others.empty() &&
            !radio::survives_interference({frame.id, frame.dr, frame.rx_power_dbm}, others, config_.sir)) {
          outcome = Outcome::Collision;
        }
      }
    }
  }

  std::optional<Downlink> down;
  if (outcome == Outcome::Received) {
    transcript_.write(queue_.now(), "gw", "rx-ok", format("from=%s frame=%llu", actor(frame.device).c_str(),
                                                           static_cast<unsigned long long>(frame.id)));
    auto cmd = server_on_uplink(frame);
    if (initial_done_) return;
    if (cmd) {
      down = try_downlink(frame, *cmd);
      if (!down) {
        ++d.losses.nr_no_down;
        transcript_.write(queue_.now(), "gw", "no-down", "to=" + actor(frame.device));
      }
    }
  } else {
    const bool collision = outcome == Outcome::Collision;
    ++(collision ? d.losses.nr_collisions : d.losses.nr_ulost);
    transcript_.write(queue_.now(), "gw", "rx-fail",
                      format("from=%s frame=%llu reason=%s", actor(frame.device).c_str(),
                             static_cast<unsigned long long>(frame.id),
                             collision ? (frame.capacity_dropped ? "capacity" : "collision") : "fading"));
  }
  queue_.schedule(frame.end + kRx1Delay, EventKind::RxWindowOpen,
                  [this, dev = frame.device, kind = frame.kind, dr = frame.dr, down] { on_rx1(dev, kind, dr, down); });
}

protocol::Command Simulation::session_request() const {
  const std::uint32_t session_time = protocol::GpsTime::from(config_.gps_start + static_cast<std::uint64_t>(session_true_)).seconds;
  const auto freq = static_cast<std::uint32_t>(radio::default_channels()[radio::kDownlinkChannel].center_frequency_hz);
  if (config_.multicast_class == cli::MulticastClass::C) {
    return protocol::McClassCSessionReq{kGroupId, {session_time}, session_timeout(),
                                        static_cast<std::uint8_t>(config_.multicast_dr), freq};
  }
  return protocol::McClassBSessionReq{kGroupId, {session_time}, session_timeout(),
                                      static_cast<std::uint8_t>(config_.multicast_dr), freq,
                                      static_cast<std::uint8_t>(config_.ping_periodicity)};
}

std::optional<protocol::Command> Simulation::server_on_uplink(const UplinkFrame& frame) {
  ServerDeviceState& s = server_[static_cast<std::size_t>(frame.device)];
  switch (frame.kind) {
    case UplinkKind::Answer: {
      const auto& cmd = *frame.payload;
      if (const auto* g = std::get_if<protocol::McGroupSetupAns>(&cmd)) {
        if (!g->error && s.step == ServerStep::GroupSetup) s.step = ServerStep::FragSetup;
      } else if (const auto* f = std::get_if<protocol::FragSessionSetupAns>(&cmd)) {
        if (f->ok() && s.step == ServerStep::FragSetup) {
          s.step = s.time_synced ? ServerStep::SessionSetup : ServerStep::AwaitTimeSync;
        }
      } else if (is_session_answer(cmd) && s.step == ServerStep::SessionSetup) {
        s.step = ServerStep::Done;
        s.acked_at = frame.end;
        transcript_.write(frame.end, "ns", "session-ack", "from=" + actor(frame.device));
        if (all_settled()) finish_initial_phase(frame.end);
      }
      return std::nullopt;
    }
    case UplinkKind::TimeRequest: {
      const auto& req = std::get<protocol::AppTimeReq>(*frame.payload);
      // Referencing the uplink start keeps the residual below one second.
      const auto network_time = static_cast<std::uint64_t>(std::floor(static_cast<double>(config_.gps_start) + frame.start));
      const auto delta = protocol::clock_correction(req.device_time.seconds, protocol::GpsTime::from(network_time).seconds);
      s.time_synced = true;
      if (s.step == ServerStep::AwaitTimeSync) s.step = ServerStep::SessionSetup;
      return protocol::AppTimeAns{delta, req.token};
    }
    case UplinkKind::Poll:
      break;
  }
  switch (s.step) {
    case ServerStep::GroupSetup: {
      protocol::McGroupSetupReq req;
      req.group_id = kGroupId;
      for (std::size_t i = 0; i < req.mc_key.size(); ++i) req.mc_key[i] = static_cast<std::uint8_t>(0xa0 + i);
      req.mc_addr = kMulticastAddress;
      return req;
    }
    case ServerStep::FragSetup: {
      const auto plan = fragment_plan();
      return protocol::FragSessionSetupReq{kFragSessionId, 1u << kGroupId, static_cast<std::uint16_t>(plan.nb_frag),
                                           static_cast<std::uint8_t>(plan.frag_size), 0,
                                           static_cast<std::uint8_t>(plan.padding)};
    }
    case ServerStep::SessionSetup:
      return session_request();
    case ServerStep::AwaitTimeSync:
    case ServerStep::Done:
      break;
  }
  return std::nullopt;
}

std::optional<Simulation::Downlink> Simulation::try_downlink(const UplinkFrame& frame, protocol::Command cmd) {
  const std::size_t phy_len = protocol::encode_command(cmd).bytes.size() + radio::kMacHeaderBytes;
  struct Option {
    double start;
    int channel;
    int dr;
    int window;
  };
  const Option options[] = {{frame.end + kRx1Delay, frame.channel, frame.dr, 1},
                            {frame.end + kRx2Delay, radio::kDownlinkChannel, 0, 2}};
  for (const auto& o : options) {
    const double airtime = radio::time_on_air(radio::data_rate(o.dr), phy_len);
    if (!gateway_duty_.free_at(o.channel, o.start) || !gateway_free(o.start, airtime)) continue;
    const bool session = std::holds_alternative<protocol::McClassCSessionReq>(cmd) ||
                         std::holds_alternative<protocol::McClassBSessionReq>(cmd);
    if (session) {
      if (first_session_req_ < 0) {
        first_session_req_ = o.start;
        const double guard = config_.start_guard_s.value_or(0.0);
        session_true_ =
            std::ceil(static_cast<double>(config_.gps_start) + o.start + guard) - static_cast<double>(config_.gps_start);
      }
      cmd = session_request();
    }
    ++devices_[static_cast<std::size_t>(frame.device)].nr_downlinks;
    gateway_commit(o.channel, o.start, airtime,
                   format("dr=%d len=%zu type=%s to=%s rx%d", o.dr, phy_len, protocol::name_of(cmd),
                          actor(frame.device).c_str(), o.window));
    return Downlink{cmd, o.start, airtime, o.channel, o.dr, phy_len, o.window};
  }
  return std::nullopt;
}

bool Simulation::receive_downlink(Device& d, const Downlink& down) {
  d.energy.add_rx(down.airtime);
  if (config_.ideal_channel) return true;
  const double p = radio::reception_probability(downlink_rx_power(d), radio::data_rate(down.dr), down.phy_len,
                                                config_.link, config_.reception);
  if (uniform(channel_rng_, 0.0, 1.0) < p) return true;
  ++d.losses.nr_ulost;
  transcript_.write(queue_.now(), actor(d.id), "rx-fail", "reason=fading downlink");
  return false;
}

void Simulation::on_rx1(int dev, UplinkKind kind, int uplink_dr, std::optional<Downlink> down) {
  Device& d = devices_[static_cast<std::size_t>(dev)];
  const double now = queue_.now();
  transcript_.write(now, actor(dev), to_string(EventKind::RxWindowOpen), "window=1");
  if (down && down->window == 1) {
    const bool got = receive_downlink(d, *down);
    device_after_windows(dev, kind, got ? std::optional(down->cmd) : std::nullopt, now + down->airtime);
    return;
  }
  d.energy.add_rx(radio::preamble_time(radio::data_rate(uplink_dr)));
  queue_.schedule(now + (kRx2Delay - kRx1Delay), EventKind::RxWindowOpen,
                  [this, dev, kind, down] { on_rx2(dev, kind, down); });
}

void Simulation::on_rx2(int dev, UplinkKind kind, std::optional<Downlink> down) {
  Device& d = devices_[static_cast<std::size_t>(dev)];
  const double now = queue_.now();
  transcript_.write(now, actor(dev), to_string(EventKind::RxWindowOpen), "window=2");
  if (down) {
    const bool got = receive_downlink(d, *down);
    device_after_windows(dev, kind, got ? std::optional(down->cmd) : std::nullopt, now + down->airtime);
    return;
  }
  const double listen = radio::preamble_time(radio::data_rate(0));
  d.energy.add_rx(listen);
  device_after_windows(dev, kind, std::nullopt, now + listen);
}

void Simulation::device_after_windows(int dev, UplinkKind kind, const std::optional<protocol::Command>& cmd,
                                      double now) {
  if (initial_done_) return;
  Device& d = devices_[static_cast<std::size_t>(dev)];
  const auto poll_gap = [this] { return uniform(mac_rng_, config_.poll_interval_min_s, config_.poll_interval_max_s); };

  if (kind == UplinkKind::Answer) {
    if (d.pending_answer && is_session_answer(*d.pending_answer)) d.session_acked = true;
    d.pending_answer.reset();
  }
  if (cmd) {
    const auto result = protocol::device_handle_command(d.sessions, *cmd);
    if (std::holds_alternative<protocol::AppTimeAns>(*cmd)) {
      d.synced = true;
      schedule_uplink(dev, now + poll_gap(), UplinkKind::Poll, false);
      return;
    }
    if (result.answer) {
      d.pending_answer = result.answer;
      schedule_uplink(dev, now + uniform(mac_rng_, config_.answer_delay_min_s, config_.answer_delay_max_s),
                      UplinkKind::Answer, false);
      return;
    }
  }
  if (d.session_acked) {
    // Regular application traffic; it still opens windows for a re-sent session request.
    schedule_uplink(dev, now + config_.app_period_s, UplinkKind::Poll, false);
    return;
  }
  // Once a fragmentation session exists the device asks for the time itself.
  const bool has_frag = !d.sessions.frag_sessions.empty();
  const UplinkKind next = has_frag && !d.synced ? UplinkKind::TimeRequest : UplinkKind::Poll;
  if (kind == UplinkKind::Answer) {
    schedule_uplink(dev, now + poll_gap(), next, false);
    return;
  }
  schedule_uplink(dev, now + uniform(mac_rng_, config_.retry_backoff_min_s, config_.retry_backoff_max_s), next, true);
}

bool Simulation::all_settled() const {
  for (std::size_t i = 0; i < devices_.size(); ++i) {
    if (!devices_[i].failed && server_[i].step != ServerStep::Done) return false;
  }
  return true;
}

void Simulation::finish_initial_phase(double now) {
  if (initial_done_) return;
  initial_done_ = true;
  initial_end_ = now;
  queue_.clear();
  transcript_.write(now, "ns", "phase-end", "phase=initial");
}

metrics::PhaseReport Simulation::run_initial_phase() {
  if (initial_done_ || first_uplink_ >= 0) throw StateError("initial phase already ran");
  for (std::size_t i = 0; i < devices_.size(); ++i) {
    schedule_uplink(static_cast<int>(i), uniform(mac_rng_, 0.0, config_.start_spread_s), UplinkKind::Poll, false);
  }
  queue_.schedule(config_.phase_time_cap_s, EventKind::Timer, [this] {
    for (std::size_t i = 0; i < devices_.size(); ++i) {
      if (server_[i].step != ServerStep::Done) devices_[i].failed = true;
    }
    finish_initial_phase(queue_.now());
  });
  while (queue_.step()) {
  }
  if (!initial_done_) finish_initial_phase(queue_.now());

  start_metric_s_ = 0.0;
  if (first_session_req_ >= 0) {
    for (std::size_t i = 0; i < devices_.size(); ++i) {
      if (server_[i].step == ServerStep::Done) start_metric_s_ = std::max(start_metric_s_, server_[i].acked_at - first_session_req_);
    }
  }
  return initial_report(std::max(0.0, first_uplink_), initial_end_);
}

metrics::PhaseReport Simulation::initial_report(double t_first, double t_end) const {
  metrics::PhaseReport r;
  r.phase = metrics::Phase::Initial;
  r.config_fingerprint = cli::fingerprint(config_);
  r.total_time_s = t_end - t_first;
  r.start_time_metric_min = start_metric_s_ / 60.0;
  for (std::size_t i = 0; i < devices_.size(); ++i) {
    const Device& d = devices_[i];
    metrics::DeviceReport dr;
    dr.id = d.id;
    dr.dr = d.site.dr;
    dr.energy = {d.energy.tx_energy_j(config_.power), d.energy.rx_energy_j(config_.power),
                 d.energy.idle_energy_j(t_end, config_.power)};
    dr.rx_time_s = d.energy.rx_time();
    dr.uplinks = d.nr_sent;
    dr.retransmissions = d.nr_retrans;
    dr.downlinks = d.nr_downlinks;
    dr.completed = server_[i].step == ServerStep::Done;
    dr.failed = d.failed;
    r.per_device.push_back(dr);
    r.losses.nr_collisions += d.losses.nr_collisions;
    r.losses.nr_ulost += d.losses.nr_ulost;
    r.losses.nr_no_down += d.losses.nr_no_down;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Multicast phase

double Simulation::next_beacon(double t) const {
  const double gps = static_cast<double>(config_.gps_start) + t;
  return std::ceil(gps / ClassBSchedule::kBeaconPeriod) * ClassBSchedule::kBeaconPeriod -
         static_cast<double>(config_.gps_start);
}

void Simulation::open_session(int dev, double now) {
  Device& d = devices_[static_cast<std::size_t>(dev)];
  const auto plan = fragment_plan();
  d.in_session = true;
  d.session_open = now;
  d.clazz = config_.multicast_class == cli::MulticastClass::C ? DeviceClass::CTemporary : DeviceClass::BTemporary;
  d.decoder.emplace(plan.nb_frag, plan.frag_size);
  --pending_opens_;
  ++open_sessions_;
  transcript_.write(now, actor(dev), to_string(EventKind::SessionStart),
                    std::string("class=") + cli::to_string(config_.multicast_class));
}

void Simulation::close_session(int dev, double now) {
  Device& d = devices_[static_cast<std::size_t>(dev)];
  if (!d.in_session) return;
  d.in_session = false;
  d.clazz = DeviceClass::A;
  d.session_close = now;
  if (config_.multicast_class == cli::MulticastClass::C) d.mc_energy.add_rx(now - d.session_open);
  --open_sessions_;
  transcript_.write(now, actor(dev), "session-end", d.completed ? "reason=complete" : "reason=timeout");
}

void Simulation::deliver_fragment(std::size_t index, double start, double end) {
  const bool class_b = config_.multicast_class == cli::MulticastClass::B;
  const auto& dr = radio::data_rate(config_.multicast_dr);
  const std::size_t phy_len = coded_[index].payload.size() + radio::kMacHeaderBytes;
  for (auto& d : devices_) {
    if (!d.in_session || d.completed) continue;
    if (class_b ? d.session_open > b_window_ : d.session_open > start) continue;
    bool ok = config_.ideal_channel;
    if (!ok) {
      const double p =
          radio::reception_probability(downlink_rx_power(d), dr, phy_len, config_.link, config_.reception);
      ok = uniform(channel_rng_, 0.0, 1.0) < p;
    }
    if (!ok) continue;
    if (d.decoder->ingest(coded_[index]) != fec::DecodeStatus::Complete) continue;
    if (d.decoder->finalize(fragment_plan()) != image_) throw StateError("reassembled image differs from the original");
    d.completed = true;
    d.completion_time = end;
    close_session(d.id, end);
  }
}

void Simulation::send_fragment(std::size_t index, double start) {
  const double airtime = fragment_airtime_;
  gateway_commit(radio::kDownlinkChannel, start, airtime,
                 format("dr=%d len=%zu type=fragment index=%u", config_.multicast_dr,
                        coded_[index].payload.size() + radio::kMacHeaderBytes, coded_[index].index));
  if (first_fragment_ < 0) first_fragment_ = start;
  last_fragment_end_ = start + airtime;
  queue_.schedule(start + airtime, EventKind::TxEnd,
                  [this, index, start, airtime] { deliver_fragment(index, start, start + airtime); });
}

void Simulation::run_class_c() {
  const double t0 = std::max(session_true_ + config_.multicast_guard_s, queue_.now());
  const auto chain = [this](auto&& self, double earliest) -> void {
    if (next_fragment_ >= coded_.size()) return;
    const double t = gateway_duty_.transmit_at(radio::kDownlinkChannel, earliest);
    queue_.schedule(t, EventKind::TxStart, [this, self, t] {
      const std::size_t index = next_fragment_++;
      send_fragment(index, t);
      self(self, t + fragment_airtime_);
    });
  };
  chain(chain, t0);
}

void Simulation::run_class_b() {
  fragments_from_ = next_beacon(session_true_ + config_.multicast_guard_s);
  double earliest_open = std::numeric_limits<double>::infinity();
  for (const auto& d : devices_) {
    if (!d.failed && d.sessions.active_session()) earliest_open = std::min(earliest_open, d.session_open);
  }
  const double first = next_beacon(std::max(queue_.now(), std::min(earliest_open, fragments_from_)));
  queue_.schedule(first, EventKind::Beacon, [this, first] { class_b_window(first); });
}

void Simulation::class_b_window(double beacon) {
  if (pending_opens_ == 0 && open_sessions_ == 0) return;
  b_window_ = beacon;
  const double airtime = radio::beacon_airtime();
  if (gateway_duty_.free_at(radio::kDownlinkChannel, beacon)) {
    gateway_commit(radio::kDownlinkChannel, beacon, airtime, "type=beacon");
  }
  for (auto& d : devices_) {
    if (d.in_session && d.session_open <= beacon) d.mc_energy.add_rx(airtime);
  }
  const ClassBSchedule schedule{config_.ping_periodicity};
  const int offset = schedule.draw_offset(session_rng_);
  transcript_.write(beacon, "gw", to_string(EventKind::Beacon), format("ping_offset=%d", offset));
  for (double t : ping_slot_times(schedule, beacon, offset)) {
    queue_.schedule(t, EventKind::PingSlot, [this, t, beacon] { ping_slot(t, beacon); });
  }
  const double next = beacon + ClassBSchedule::kBeaconPeriod;
  queue_.schedule(next, EventKind::Beacon, [this, next] { class_b_window(next); });
}

void Simulation::ping_slot(double t, double beacon) {
  const double airtime = fragment_airtime_;
  const double protected_until = beacon + ClassBSchedule::kBeaconPeriod;
  const double busy = config_.duty_cycle_enabled ? airtime + gateway_duty_.off_time(radio::kDownlinkChannel, airtime)
                                                 : airtime;
  // A fragment goes out only if its enforced silence ends before the next beacon.
  const bool send = next_fragment_ < coded_.size() && beacon >= fragments_from_ &&
                    gateway_duty_.free_at(radio::kDownlinkChannel, t) && t + busy <= protected_until;
  const double listen = send ? airtime : radio::preamble_time(radio::data_rate(config_.multicast_dr));
  for (auto& d : devices_) {
    if (d.in_session && d.session_open <= beacon) d.mc_energy.add_rx(listen);
  }
  if (send) send_fragment(next_fragment_++, t);
}

metrics::PhaseReport Simulation::run_multicast_phase() {
  if (!initial_done_) throw StateError("initial phase has not run");
  if (first_fragment_ >= 0 || !coded_.empty()) throw StateError("multicast phase already ran");
  const auto plan = fragment_plan();
  Rng image_rng = make_stream(seed_, kStreamImage);
  std::uniform_int_distribution<int> byte(0, 255);
  image_.resize(config_.firmware_size);
  for (auto& b : image_) b = static_cast<std::uint8_t>(byte(image_rng));
  coded_ = fec::encode_all(fec::fragment_image(image_, plan.frag_size, plan.nb_redundancy));
  fragment_airtime_ = radio::time_on_air(radio::data_rate(config_.multicast_dr), plan.frag_size + radio::kMacHeaderBytes);
  mc_phase_start_ = queue_.now();

  const auto reference = static_cast<std::uint32_t>((config_.gps_start + static_cast<std::uint64_t>(session_true_)) & 0xffffffffu);
  for (auto& d : devices_) {
    const auto session = d.sessions.active_session();
    if (d.failed || !session) continue;
    // Solve local_gps(t) == session_time on the device's corrected clock.
    const auto diff = static_cast<std::int32_t>(session->session_time.seconds - reference);
    const double residual = d.clock_skew_s + static_cast<double>(d.sessions.clock_offset);
    const double nominal = session_true_ + diff - residual;
    const double close = nominal + session->session_timeout;
    // A session time already in the past opens at once and keeps its original end.
    const double open = std::max(nominal, mc_phase_start_);
    if (close <= open) continue;
    d.session_open = open;
    ++pending_opens_;
    const int id = d.id;
    queue_.schedule(open, EventKind::SessionStart, [this, id] { open_session(id, queue_.now()); });
    queue_.schedule(close, EventKind::Timer, [this, id] { close_session(id, queue_.now()); });
  }
  if (config_.multicast_class == cli::MulticastClass::C) {
    run_class_c();
  } else {
    run_class_b();
  }
  while (queue_.step()) {
  }
  transcript_.write(queue_.now(), "ns", "phase-end", "phase=multicast");
  return multicast_report(mc_phase_start_, queue_.now(), first_fragment_, last_fragment_end_);
}

metrics::PhaseReport Simulation::multicast_report(double phase_start, double phase_end, double first_fragment,
                                                  double last_fragment_end) const {
  metrics::PhaseReport r;
  r.phase = metrics::Phase::Multicast;
  r.config_fingerprint = cli::fingerprint(config_);
  double last_completion = -1.0;
  for (const auto& d : devices_) {
    if (d.completed) last_completion = std::max(last_completion, d.completion_time);
  }
  if (first_fragment >= 0) {
    r.total_time_s = (last_completion >= 0 ? last_completion : last_fragment_end) - first_fragment;
  }
  const double lifetime = phase_end - phase_start;
  for (const auto& d : devices_) {
    metrics::DeviceReport dr;
    dr.id = d.id;
    dr.dr = d.site.dr;
    dr.energy = {0.0, d.mc_energy.rx_energy_j(config_.power), d.mc_energy.idle_energy_j(lifetime, config_.power)};
    dr.rx_time_s = d.mc_energy.rx_time();
    dr.completed = d.completed;
    dr.failed = d.failed;
    r.per_device.push_back(dr);
  }
  return r;
}

SimulationOutcome run_fuota(const cli::ScenarioConfig& config, std::uint64_t seed, bool transcript) {
  cli::ScenarioConfig effective = config;
  if (!config.start_guard_s) {
    cli::ScenarioConfig probe = config;
    probe.start_guard_s = 0.0;
    Simulation pass(probe, seed, false);
    pass.run_initial_phase();
    effective.start_guard_s = pass.start_time_metric_s() + config.start_guard_margin_s;
  }
  Simulation sim(effective, seed, transcript);
  SimulationOutcome out;
  out.initial = sim.run_initial_phase();
  out.multicast = sim.run_multicast_phase();
  const std::string fp = cli::fingerprint(config);
  out.initial.config_fingerprint = fp;
  out.multicast.config_fingerprint = fp;
  out.session_start_s = sim.session_start();
  out.start_guard_s = *effective.start_guard_s;
  out.transcript = sim.transcript().text();
  return out;
}

}  // namespace fuotasim::sim
