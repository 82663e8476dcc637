#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fuotasim/common.hpp"

// Physical-layer models for the EU868 LoRaWAN band.
namespace fuotasim::radio {

inline constexpr int kNumDataRates = 6;
inline constexpr std::size_t kMacHeaderBytes = 8;
inline constexpr double kBandwidthHz = 125000.0;

struct DataRate {
  int index;
  int spreading_factor;
  double bandwidth_hz;
  std::size_t max_app_payload;

  friend bool operator==(const DataRate&, const DataRate&) = default;
};

/// DR0..DR5. Throws std::out_of_range for any other index.
const DataRate& data_rate(int index);

enum class ChannelUse { UplinkDownlink, DownlinkOnly };

struct Channel {
  double center_frequency_hz;
  double duty_cycle;
  ChannelUse use;
};

/// 868.1 / 868.3 / 868.5 MHz at 1% (uplink and downlink) plus 869.525 MHz at 10% (downlink).
std::span<const Channel> default_channels();

inline constexpr int kNumUplinkChannels = 3;
inline constexpr int kDownlinkChannel = 3;

// LoRa modem parameters for the raw airtime formula.
struct LoraFrameFormat {
  int spreading_factor = 7;
  double bandwidth_hz = kBandwidthHz;
  double preamble_symbols = 8.0;
  bool explicit_header = true;
  bool crc = true;
  int coding_rate = 1;  // 4/(4+cr)
};

double lora_airtime(const LoraFrameFormat& format, std::size_t payload_bytes);

/// Time on air of a LoRaWAN frame whose PHY payload is `phy_payload_len` bytes
/// (application payload plus the 8-byte MAC header). Throws SizeViolation when
/// the frame would exceed the data rate's payload cap.
double time_on_air(const DataRate& dr, std::size_t phy_payload_len);

/// Symbol duration at a data rate.
double symbol_time(const DataRate& dr);

/// Duration of the preamble (8 programmed + 4.25 sync symbols).
double preamble_time(const DataRate& dr);

/// Gateway beacon: SF9, 17 bytes, implicit header, no CRC, 10-symbol preamble.
double beacon_airtime();

struct PathLossBranch {
  double d0_m;
  double pl_d0_db;
  double gamma;
  double sigma_db;

  friend bool operator==(const PathLossBranch&, const PathLossBranch&) = default;
};

struct PathLossParams {
  double breakpoint_m = 400.0;
  PathLossBranch near{92.67, 128.63, 1.05, 8.72};
  PathLossBranch far{37.27, 132.54, 0.8, 3.34};

  const PathLossBranch& branch(double d) const { return d < breakpoint_m ? near : far; }
  void validate() const;

  friend bool operator==(const PathLossParams&, const PathLossParams&) = default;
};

double path_loss_mean(double distance_m, const PathLossParams& params);

/// Mean path loss plus a log-normal shadowing draw with the branch sigma.
double path_loss_sample(double distance_m, const PathLossParams& params, Rng& rng);

/// Smallest distance whose mean path loss reaches `pl_db`. The model jumps at the
/// breakpoint, so losses inside the jump map onto the breakpoint itself.
double distance_for_path_loss(double pl_db, const PathLossParams& params);

struct LinkBudget {
  double tx_power_dbm = 14.0;
  double device_antenna_gain_db = 2.2;
  double gateway_antenna_gain_db = 8.0;
  // SX1276 at 125 kHz, DR0 (SF12) .. DR5 (SF7).
  std::array<double, kNumDataRates> sensitivity_dbm{-137.0, -134.5, -132.0, -129.0, -126.0, -123.0};

  double sensitivity(int dr_index) const { return sensitivity_dbm.at(static_cast<std::size_t>(dr_index)); }
  /// Mean-link path loss that leaves exactly `margin_db` above sensitivity at `dr_index`.
  double max_path_loss(int dr_index, double margin_db) const;
  void validate() const;

  friend bool operator==(const LinkBudget&, const LinkBudget&) = default;
};

double received_power(double tx_power_dbm, double tx_gain_db, double rx_gain_db, double path_loss_db);

// Packet success = (1 - BER(margin))^(8 * len) with a logistic BER in the link margin.
struct ReceptionModel {
  double slope_per_db = 30.0;
  double center_db = 0.0;

  double bit_error_rate(double margin_db) const;
  double packet_success(double margin_db, std::size_t phy_payload_len) const;

  friend bool operator==(const ReceptionModel&, const ReceptionModel&) = default;
};

double reception_probability(double rx_power_dbm, const DataRate& dr, std::size_t phy_payload_len,
                             const LinkBudget& budget = {}, const ReceptionModel& model = {});

// Minimum signal-to-interference ratio per (wanted SF, interfering SF), indexed by DR.
struct SirMatrix {
  std::array<std::array<double, kNumDataRates>, kNumDataRates> threshold_db{};

  static SirMatrix with_defaults(double same_sf_db = 6.0, double cross_sf_db = -8.0);
  double threshold(int wanted_dr, int interferer_dr) const {
    return threshold_db.at(static_cast<std::size_t>(wanted_dr)).at(static_cast<std::size_t>(interferer_dr));
  }

  friend bool operator==(const SirMatrix&, const SirMatrix&) = default;
};

struct ReceivedFrame {
  std::uint64_t id;
  int dr_index;
  double rx_power_dbm;
};

/// Whether `wanted` clears the SIR threshold against the aggregate power of each
/// interfering data rate.
bool survives_interference(const ReceivedFrame& wanted, std::span<const ReceivedFrame> interferers,
                           const SirMatrix& sir);

/// Ids of the frames that survive, in ascending id order. All frames are assumed
/// to overlap in time on one channel.
std::vector<std::uint64_t> resolve_collisions(std::span<const ReceivedFrame> frames, const SirMatrix& sir);

}  // namespace fuotasim::radio
