#include "fuotasim/radio.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fuotasim::radio {

namespace {

constexpr std::array<DataRate, kNumDataRates> kDataRates{{
    {0, 12, kBandwidthHz, 51},
    {1, 11, kBandwidthHz, 51},
    {2, 10, kBandwidthHz, 51},
    {3, 9, kBandwidthHz, 115},
    {4, 8, kBandwidthHz, 222},
    {5, 7, kBandwidthHz, 222},
}};

constexpr std::array<Channel, 4> kChannels{{
    {868.10e6, 0.01, ChannelUse::UplinkDownlink},
    {868.30e6, 0.01, ChannelUse::UplinkDownlink},
    {868.50e6, 0.01, ChannelUse::UplinkDownlink},
    {869.525e6, 0.10, ChannelUse::DownlinkOnly},
}};

bool low_data_rate_optimize(int sf, double bw) { return sf >= 11 && bw <= kBandwidthHz; }

}  // namespace

const DataRate& data_rate(int index) {
  if (index < 0 || index >= kNumDataRates) {
    throw std::out_of_range("data rate index out of range: " + std::to_string(index));
  }
  return kDataRates[static_cast<std::size_t>(index)];
}

std::span<const Channel> default_channels() { return kChannels; }

double lora_airtime(const LoraFrameFormat& f, std::size_t payload_bytes) {
  const double tsym = std::ldexp(1.0, f.spreading_factor) / f.bandwidth_hz;
  const int de = low_data_rate_optimize(f.spreading_factor, f.bandwidth_hz) ? 1 : 0;
  const double numerator = 8.0 * static_cast<double>(payload_bytes) - 4.0 * f.spreading_factor + 28.0 +
                           (f.crc ? 16.0 : 0.0) - (f.explicit_header ? 0.0 : 20.0);
  const double denominator = 4.0 * (f.spreading_factor - 2 * de);
  const double payload_symbols = 8.0 + std::max(std::ceil(numerator / denominator) * (f.coding_rate + 4), 0.0);
  return (f.preamble_symbols + 4.25 + payload_symbols) * tsym;
}

double time_on_air(const DataRate& dr, std::size_t phy_payload_len) {
  if (phy_payload_len < 1 || phy_payload_len > dr.max_app_payload + kMacHeaderBytes) {
    throw SizeViolation("PHY payload of " + std::to_string(phy_payload_len) + " bytes exceeds DR" +
                        std::to_string(dr.index) + " cap of " +
                        std::to_string(dr.max_app_payload + kMacHeaderBytes));
  }
  return lora_airtime({.spreading_factor = dr.spreading_factor, .bandwidth_hz = dr.bandwidth_hz}, phy_payload_len);
}

double symbol_time(const DataRate& dr) { return std::ldexp(1.0, dr.spreading_factor) / dr.bandwidth_hz; }

double preamble_time(const DataRate& dr) { return (8.0 + 4.25) * symbol_time(dr); }

double beacon_airtime() {
  return lora_airtime({.spreading_factor = 9, .preamble_symbols = 10.0, .explicit_header = false, .crc = false}, 17);
}

void PathLossParams::validate() const {
  for (const auto* b : {&near, &far}) {
    if (!(b->d0_m > 0 && b->pl_d0_db > 0 && b->gamma > 0 && b->sigma_db >= 0)) {
      throw ConfigError("path loss parameters must be positive");
    }
  }
  if (!(breakpoint_m > 0)) throw ConfigError("path loss breakpoint must be positive");
}

double path_loss_mean(double distance_m, const PathLossParams& params) {
  if (!(distance_m > 0)) throw std::domain_error("path loss distance must be positive");
  const auto& b = params.branch(distance_m);
  return b.pl_d0_db + 10.0 * b.gamma * std::log10(distance_m / b.d0_m);
}

double path_loss_sample(double distance_m, const PathLossParams& params, Rng& rng) {
  const double mean = path_loss_mean(distance_m, params);
  const double sigma = params.branch(distance_m).sigma_db;
  if (sigma == 0.0) return mean;
  return mean + std::normal_distribution<double>(0.0, sigma)(rng);
}

double distance_for_path_loss(double pl_db, const PathLossParams& params) {
  const auto inverse = [pl_db](const PathLossBranch& b) {
    return b.d0_m * std::pow(10.0, (pl_db - b.pl_d0_db) / (10.0 * b.gamma));
  };
  const double bp = params.breakpoint_m;
  const double near_edge = params.near.pl_d0_db + 10.0 * params.near.gamma * std::log10(bp / params.near.d0_m);
  const double far_edge = path_loss_mean(bp, params);
  if (pl_db < near_edge) return inverse(params.near);
  if (pl_db < far_edge) return bp;
  return inverse(params.far);
}

double LinkBudget::max_path_loss(int dr_index, double margin_db) const {
  return tx_power_dbm + device_antenna_gain_db + gateway_antenna_gain_db - sensitivity(dr_index) - margin_db;
}

void LinkBudget::validate() const {
  for (std::size_t i = 1; i < sensitivity_dbm.size(); ++i) {
    // DR index runs opposite to SF, so sensitivity rises with the index.
    if (!(sensitivity_dbm[i] > sensitivity_dbm[i - 1])) {
      throw ConfigError("sensitivity must strictly decrease as the spreading factor increases");
    }
  }
}

double received_power(double tx_power_dbm, double tx_gain_db, double rx_gain_db, double path_loss_db) {
  return tx_power_dbm + tx_gain_db + rx_gain_db - path_loss_db;
}

double ReceptionModel::bit_error_rate(double margin_db) const {
  return 0.5 / (1.0 + std::exp(slope_per_db * (margin_db - center_db)));
}

double ReceptionModel::packet_success(double margin_db, std::size_t phy_payload_len) const {
  const double ber = bit_error_rate(margin_db);
  return std::exp(8.0 * static_cast<double>(phy_payload_len) * std::log1p(-ber));
}

double reception_probability(double rx_power_dbm, const DataRate& dr, std::size_t phy_payload_len,
                             const LinkBudget& budget, const ReceptionModel& model) {
  return model.packet_success(rx_power_dbm - budget.sensitivity(dr.index), phy_payload_len);
}

SirMatrix SirMatrix::with_defaults(double same_sf_db, double cross_sf_db) {
  SirMatrix m;
  for (int i = 0; i < kNumDataRates; ++i) {
    for (int j = 0; j < kNumDataRates; ++j) {
      m.threshold_db[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = i == j ? same_sf_db : cross_sf_db;
    }
  }
  return m;
}

bool survives_interference(const ReceivedFrame& wanted, std::span<const ReceivedFrame> interferers,
                           const SirMatrix& sir) {
  // Powers are summed in sorted order so the outcome does not depend on input order.
  std::array<std::vector<double>, kNumDataRates> powers_mw;
  for (const auto& f : interferers) {
    if (f.id == wanted.id) continue;
    powers_mw.at(static_cast<std::size_t>(f.dr_index)).push_back(std::pow(10.0, f.rx_power_dbm / 10.0));
  }
  for (int dr = 0; dr < kNumDataRates; ++dr) {
    auto& group = powers_mw[static_cast<std::size_t>(dr)];
    if (group.empty()) continue;
    std::sort(group.begin(), group.end());
    double mw = 0.0;
    for (double p : group) mw += p;
    if (wanted.rx_power_dbm - 10.0 * std::log10(mw) < sir.threshold(wanted.dr_index, dr)) return false;
  }
  return true;
}

std::vector<std::uint64_t> resolve_collisions(std::span<const ReceivedFrame> frames, const SirMatrix& sir) {
  std::vector<std::uint64_t> out;
  for (const auto& f : frames) {
    if (survives_interference(f, frames, sir)) out.push_back(f.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace fuotasim::radio
