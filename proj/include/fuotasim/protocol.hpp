#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "fuotasim/common.hpp"
#include "fuotasim/fec.hpp"

// Application-layer FUOTA commands: multicast setup (port 200), fragmentation
// (port 201) and clock synchronization (port 202).
namespace fuotasim::protocol {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kPortMulticast = 200;
inline constexpr std::uint8_t kPortFragmentation = 201;
inline constexpr std::uint8_t kPortClockSync = 202;

inline constexpr std::uint8_t kCidMcGroupSetup = 0x02;
inline constexpr std::uint8_t kCidMcClassCSession = 0x04;
inline constexpr std::uint8_t kCidMcClassBSession = 0x05;
inline constexpr std::uint8_t kCidFragSessionSetup = 0x02;
inline constexpr std::uint8_t kCidAppTime = 0x01;

inline constexpr int kMaxGroups = 4;

enum class Direction { Downlink, Uplink };

/// Seconds since the GPS epoch, carried modulo 2^32.
struct GpsTime {
  std::uint32_t seconds = 0;

  static constexpr GpsTime from(std::uint64_t s) { return {static_cast<std::uint32_t>(s & 0xffffffffu)}; }
  friend bool operator==(const GpsTime&, const GpsTime&) = default;
};

struct McGroupSetupReq {
  std::uint8_t group_id = 0;
  std::array<std::uint8_t, 16> mc_key{};
  std::uint32_t mc_addr = 0;
  friend bool operator==(const McGroupSetupReq&, const McGroupSetupReq&) = default;
};

struct McGroupSetupAns {
  std::uint8_t group_id = 0;
  bool error = false;
  friend bool operator==(const McGroupSetupAns&, const McGroupSetupAns&) = default;
};

struct McClassCSessionReq {
  std::uint8_t group_id = 0;
  GpsTime session_time;
  std::uint32_t session_timeout = 0;  // seconds
  std::uint8_t dr = 0;
  std::uint32_t frequency_hz = 0;
  friend bool operator==(const McClassCSessionReq&, const McClassCSessionReq&) = default;
};

struct McClassCSessionAns {
  std::uint8_t group_id = 0;
  bool error = false;
  friend bool operator==(const McClassCSessionAns&, const McClassCSessionAns&) = default;
};

struct McClassBSessionReq {
  std::uint8_t group_id = 0;
  GpsTime session_time;
  std::uint32_t session_timeout = 0;
  std::uint8_t dr = 0;
  std::uint32_t frequency_hz = 0;
  std::uint8_t ping_periodicity = 0;  // 0..7, low nibble on the wire
  friend bool operator==(const McClassBSessionReq&, const McClassBSessionReq&) = default;
};

struct McClassBSessionAns {
  std::uint8_t group_id = 0;
  bool error = false;
  friend bool operator==(const McClassBSessionAns&, const McClassBSessionAns&) = default;
};

struct FragSessionSetupReq {
  std::uint8_t frag_session_id = 0;
  std::uint8_t allowed_mc_groups = 0;  // bitmask over group ids
  std::uint16_t nb_frag = 0;
  std::uint8_t frag_size = 0;
  std::uint8_t frag_algo = 0;
  std::uint8_t padding = 0;
  friend bool operator==(const FragSessionSetupReq&, const FragSessionSetupReq&) = default;
};

struct FragSessionSetupAns {
  static constexpr std::uint8_t kUnsupportedAlgorithm = 0x01;
  static constexpr std::uint8_t kInvalidGroup = 0x02;
  static constexpr std::uint8_t kInvalidParameters = 0x04;

  std::uint8_t frag_session_id = 0;
  std::uint8_t status = 0;
  bool ok() const { return status == 0; }
  friend bool operator==(const FragSessionSetupAns&, const FragSessionSetupAns&) = default;
};

struct AppTimeReq {
  GpsTime device_time;
  std::uint8_t token = 0;
  friend bool operator==(const AppTimeReq&, const AppTimeReq&) = default;
};

struct AppTimeAns {
  std::int32_t time_correction = 0;
  std::uint8_t token = 0;
  friend bool operator==(const AppTimeAns&, const AppTimeAns&) = default;
};

using Command = std::variant<McGroupSetupReq, McGroupSetupAns, McClassCSessionReq, McClassCSessionAns,
                             McClassBSessionReq, McClassBSessionAns, FragSessionSetupReq, FragSessionSetupAns,
                             AppTimeReq, AppTimeAns>;

struct EncodedCommand {
  std::uint8_t port;
  Bytes bytes;
  friend bool operator==(const EncodedCommand&, const EncodedCommand&) = default;
};

std::uint8_t port_of(const Command& cmd);
Direction direction_of(const Command& cmd);
const char* name_of(const Command& cmd);

/// One-byte CID followed by the fields in declaration order, little-endian.
/// Throws EncodeError if a field violates its type invariant.
EncodedCommand encode_command(const Command& cmd);

/// Inverse of encode_command. Throws DecodeError (UnknownCommand or Length).
Command decode_command(std::uint8_t port, std::span<const std::uint8_t> bytes, Direction direction);

/// Signed delta in (-2^31, 2^31] with (device_time + delta) mod 2^32 == network_time.
std::int32_t clock_correction(std::uint32_t device_time, std::uint32_t network_time);

struct ClassSession {
  enum class Kind { C, B };
  Kind kind = Kind::C;
  GpsTime session_time;
  std::uint32_t session_timeout = 0;
  std::uint8_t dr = 0;
  std::uint32_t frequency_hz = 0;
  std::uint8_t ping_periodicity = 0;
  friend bool operator==(const ClassSession&, const ClassSession&) = default;
};

struct GroupEntry {
  std::array<std::uint8_t, 16> mc_key{};
  std::uint32_t mc_addr = 0;
  std::optional<ClassSession> session;
};

struct FragSessionEntry {
  FragSessionSetupReq setup;
  fec::Decoder decoder;
};

struct DeviceSessionTable {
  std::array<std::optional<GroupEntry>, kMaxGroups> multicast_groups;
  std::map<std::uint8_t, FragSessionEntry> frag_sessions;
  std::int64_t clock_offset = 0;  // sum of applied corrections, seconds

  bool has_group(std::uint8_t id) const { return id < kMaxGroups && multicast_groups[id].has_value(); }
  std::optional<ClassSession> active_session() const;
};

struct HandleResult {
  std::optional<Command> answer;
};

/// Applies a request to the device tables and returns its answer. Answers to
/// requests that cannot be honored carry an error flag and leave the table as is.
/// Answer variants and non-protocol commands yield no answer.
HandleResult device_handle_command(DeviceSessionTable& state, const Command& cmd);

void apply_clock_correction(DeviceSessionTable& state, std::int32_t delta);

}  // namespace fuotasim::protocol
