#include "fuotasim/protocol.hpp"

#include <string>
#include <type_traits>

namespace fuotasim::protocol {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

class Writer {
 public:
  explicit Writer(std::uint8_t cid) { out_.push_back(cid); }
  Writer& u8(std::uint8_t v) {
    out_.push_back(v);
    return *this;
  }
  Writer& u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    return *this;
  }
  Writer& u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    return *this;
  }
  template <std::size_t N>
  Writer& raw(const std::array<std::uint8_t, N>& a) {
    out_.insert(out_.end(), a.begin(), a.end());
    return *this;
  }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::size_t expected, const char* what) : bytes_(bytes) {
    if (bytes.size() != expected) {
      throw DecodeError(DecodeError::Kind::Length, std::string(what) + ": expected " + std::to_string(expected) +
                                                       " bytes, got " + std::to_string(bytes.size()));
    }
    pos_ = 1;  // CID already dispatched
  }
  std::uint8_t u8() { return bytes_[pos_++]; }
  std::uint16_t u16() {
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(bytes_[pos_++] << (8 * i));
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  template <std::size_t N>
  std::array<std::uint8_t, N> raw() {
    std::array<std::uint8_t, N> a{};
    for (auto& b : a) b = bytes_[pos_++];
    return a;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void require(bool ok, const char* what) {
  if (!ok) throw EncodeError(what);
}

std::uint8_t group_status(std::uint8_t group_id, bool error) {
  require(group_id < kMaxGroups, "group id must be below 4");
  return static_cast<std::uint8_t>(group_id | (error ? 0x04 : 0x00));
}

void check_session(std::uint8_t group_id, std::uint32_t timeout, std::uint8_t dr) {
  require(group_id < kMaxGroups, "group id must be below 4");
  require(timeout > 0, "session timeout must be positive");
  require(dr <= 5, "data rate must be DR0..DR5");
}

}  // namespace

std::uint8_t port_of(const Command& cmd) {
  switch (cmd.index()) {
    case 0: case 1: case 2: case 3: case 4: case 5:
      return kPortMulticast;
    case 6: case 7:
      return kPortFragmentation;
    default:
      return kPortClockSync;
  }
}

Direction direction_of(const Command& cmd) {
  return std::visit(Overloaded{
                        [](const McGroupSetupReq&) { return Direction::Downlink; },
                        [](const McClassCSessionReq&) { return Direction::Downlink; },
                        [](const McClassBSessionReq&) { return Direction::Downlink; },
                        [](const FragSessionSetupReq&) { return Direction::Downlink; },
                        [](const AppTimeAns&) { return Direction::Downlink; },
                        [](const auto&) { return Direction::Uplink; },
                    },
                    cmd);
}

const char* name_of(const Command& cmd) {
  static constexpr const char* kNames[] = {"McGroupSetupReq",    "McGroupSetupAns",    "McClassCSessionReq",
                                           "McClassCSessionAns", "McClassBSessionReq", "McClassBSessionAns",
                                           "FragSessionSetupReq", "FragSessionSetupAns", "AppTimeReq",
                                           "AppTimeAns"};
  return kNames[cmd.index()];
}

EncodedCommand encode_command(const Command& cmd) {
  Bytes bytes = std::visit(
      Overloaded{
          [](const McGroupSetupReq& c) {
            require(c.group_id < kMaxGroups, "group id must be below 4");
            return Writer(kCidMcGroupSetup).u8(c.group_id).raw(c.mc_key).u32(c.mc_addr).take();
          },
          [](const McGroupSetupAns& c) { return Writer(kCidMcGroupSetup).u8(group_status(c.group_id, c.error)).take(); },
          [](const McClassCSessionReq& c) {
            check_session(c.group_id, c.session_timeout, c.dr);
            return Writer(kCidMcClassCSession)
                .u8(c.group_id)
                .u32(c.session_time.seconds)
                .u32(c.session_timeout)
                .u8(c.dr)
                .u32(c.frequency_hz)
                .take();
          },
          [](const McClassCSessionAns& c) {
            return Writer(kCidMcClassCSession).u8(group_status(c.group_id, c.error)).take();
          },
          [](const McClassBSessionReq& c) {
            check_session(c.group_id, c.session_timeout, c.dr);
            require(c.ping_periodicity <= 7, "ping periodicity must be 0..7");
            return Writer(kCidMcClassBSession)
                .u8(c.group_id)
                .u32(c.session_time.seconds)
                .u32(c.session_timeout)
                .u8(c.dr)
                .u32(c.frequency_hz)
                .u8(c.ping_periodicity & 0x0f)
                .take();
          },
          [](const McClassBSessionAns& c) {
            return Writer(kCidMcClassBSession).u8(group_status(c.group_id, c.error)).take();
          },
          [](const FragSessionSetupReq& c) {
            require(c.allowed_mc_groups <= 0x0f, "allowed groups mask covers four groups");
            require(c.nb_frag >= 1, "nb_frag must be at least 1");
            require(c.frag_size >= 1, "fragment size must be at least 1");
            require(c.padding < c.frag_size, "padding must be smaller than the fragment size");
            return Writer(kCidFragSessionSetup)
                .u8(c.frag_session_id)
                .u8(c.allowed_mc_groups)
                .u16(c.nb_frag)
                .u8(c.frag_size)
                .u8(c.frag_algo)
                .u8(c.padding)
                .take();
          },
          [](const FragSessionSetupAns& c) {
            return Writer(kCidFragSessionSetup).u8(c.frag_session_id).u8(c.status).take();
          },
          [](const AppTimeReq& c) { return Writer(kCidAppTime).u32(c.device_time.seconds).u8(c.token).take(); },
          [](const AppTimeAns& c) {
            return Writer(kCidAppTime).u32(static_cast<std::uint32_t>(c.time_correction)).u8(c.token).take();
          },
      },
      cmd);
  return {port_of(cmd), std::move(bytes)};
}

Command decode_command(std::uint8_t port, std::span<const std::uint8_t> bytes, Direction direction) {
  if (bytes.empty()) throw DecodeError(DecodeError::Kind::Length, "empty command payload");
  const std::uint8_t cid = bytes[0];
  const bool down = direction == Direction::Downlink;
  const auto unknown = [&] {
    return DecodeError(DecodeError::Kind::UnknownCommand,
                       "unknown command: port " + std::to_string(port) + " cid " + std::to_string(cid));
  };

  if (port == kPortMulticast) {
    if (cid == kCidMcGroupSetup) {
      if (down) {
        Reader r(bytes, 22, "McGroupSetupReq");
        McGroupSetupReq c;
        c.group_id = r.u8();
        c.mc_key = r.raw<16>();
        c.mc_addr = r.u32();
        return c;
      }
      Reader r(bytes, 2, "McGroupSetupAns");
      const auto s = r.u8();
      return McGroupSetupAns{static_cast<std::uint8_t>(s & 0x03), (s & 0x04) != 0};
    }
    if (cid == kCidMcClassCSession || cid == kCidMcClassBSession) {
      const bool class_b = cid == kCidMcClassBSession;
      if (down) {
        Reader r(bytes, class_b ? 16 : 15, class_b ? "McClassBSessionReq" : "McClassCSessionReq");
        const auto group = r.u8();
        const GpsTime time{r.u32()};
        const auto timeout = r.u32();
        const auto dr = r.u8();
        const auto freq = r.u32();
        if (!class_b) return McClassCSessionReq{group, time, timeout, dr, freq};
        return McClassBSessionReq{group, time, timeout, dr, freq, static_cast<std::uint8_t>(r.u8() & 0x0f)};
      }
      Reader r(bytes, 2, class_b ? "McClassBSessionAns" : "McClassCSessionAns");
      const auto s = r.u8();
      const auto group = static_cast<std::uint8_t>(s & 0x03);
      const bool error = (s & 0x04) != 0;
      if (class_b) return McClassBSessionAns{group, error};
      return McClassCSessionAns{group, error};
    }
    throw unknown();
  }
  if (port == kPortFragmentation) {
    if (cid != kCidFragSessionSetup) throw unknown();
    if (down) {
      Reader r(bytes, 8, "FragSessionSetupReq");
      FragSessionSetupReq c;
      c.frag_session_id = r.u8();
      c.allowed_mc_groups = r.u8();
      c.nb_frag = r.u16();
      c.frag_size = r.u8();
      c.frag_algo = r.u8();
      c.padding = r.u8();
      return c;
    }
    Reader r(bytes, 3, "FragSessionSetupAns");
    FragSessionSetupAns c;
    c.frag_session_id = r.u8();
    c.status = r.u8();
    return c;
  }
  if (port == kPortClockSync) {
    if (cid != kCidAppTime) throw unknown();
    Reader r(bytes, 6, down ? "AppTimeAns" : "AppTimeReq");
    const auto value = r.u32();
    const auto token = r.u8();
    if (down) return AppTimeAns{static_cast<std::int32_t>(value), token};
    return AppTimeReq{GpsTime{value}, token};
  }
  throw unknown();
}

std::int32_t clock_correction(std::uint32_t device_time, std::uint32_t network_time) {
  const std::uint32_t forward = network_time - device_time;  // wraps modulo 2^32
  if (forward <= 0x80000000u) return static_cast<std::int32_t>(static_cast<std::int64_t>(forward));
  return static_cast<std::int32_t>(static_cast<std::int64_t>(forward) - (std::int64_t{1} << 32));
}

std::optional<ClassSession> DeviceSessionTable::active_session() const {
  for (const auto& g : multicast_groups) {
    if (g && g->session) return g->session;
  }
  return std::nullopt;
}

HandleResult device_handle_command(DeviceSessionTable& state, const Command& cmd) {
  return std::visit(
      Overloaded{
          [&](const McGroupSetupReq& c) -> HandleResult {
            if (c.group_id >= kMaxGroups) return {McGroupSetupAns{static_cast<std::uint8_t>(c.group_id & 0x03), true}};
            state.multicast_groups[c.group_id] = GroupEntry{c.mc_key, c.mc_addr, std::nullopt};
            return {McGroupSetupAns{c.group_id, false}};
          },
          [&](const McClassCSessionReq& c) -> HandleResult {
            if (!state.has_group(c.group_id) || c.session_timeout == 0 || c.dr > 5) {
              return {McClassCSessionAns{static_cast<std::uint8_t>(c.group_id & 0x03), true}};
            }
            state.multicast_groups[c.group_id]->session =
                ClassSession{ClassSession::Kind::C, c.session_time, c.session_timeout, c.dr, c.frequency_hz, 0};
            return {McClassCSessionAns{c.group_id, false}};
          },
          [&](const McClassBSessionReq& c) -> HandleResult {
            if (!state.has_group(c.group_id) || c.session_timeout == 0 || c.dr > 5 || c.ping_periodicity > 7) {
              return {McClassBSessionAns{static_cast<std::uint8_t>(c.group_id & 0x03), true}};
            }
            state.multicast_groups[c.group_id]->session = ClassSession{
                ClassSession::Kind::B, c.session_time, c.session_timeout, c.dr, c.frequency_hz, c.ping_periodicity};
            return {McClassBSessionAns{c.group_id, false}};
          },
          [&](const FragSessionSetupReq& c) -> HandleResult {
            std::uint8_t status = 0;
            if (c.frag_algo != 0) status |= FragSessionSetupAns::kUnsupportedAlgorithm;
            bool groups_ok = c.allowed_mc_groups != 0 && c.allowed_mc_groups <= 0x0f;
            for (std::uint8_t g = 0; g < kMaxGroups && groups_ok; ++g) {
              if ((c.allowed_mc_groups >> g) & 1u) groups_ok = state.has_group(g);
            }
            if (!groups_ok) status |= FragSessionSetupAns::kInvalidGroup;
            if (c.nb_frag == 0 || c.frag_size == 0 || c.padding >= c.frag_size) {
              status |= FragSessionSetupAns::kInvalidParameters;
            }
            if (status == 0) {
              state.frag_sessions.insert_or_assign(c.frag_session_id,
                                                   FragSessionEntry{c, fec::Decoder(c.nb_frag, c.frag_size)});
            }
            return {FragSessionSetupAns{c.frag_session_id, status}};
          },
          [&](const AppTimeAns& c) -> HandleResult {
            apply_clock_correction(state, c.time_correction);
            return {};
          },
          [](const auto&) -> HandleResult { return {}; },
      },
      cmd);
}

void apply_clock_correction(DeviceSessionTable& state, std::int32_t delta) { state.clock_offset += delta; }

}  // namespace fuotasim::protocol
