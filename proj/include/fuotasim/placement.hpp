#pragma once

#include <array>
#include <vector>

#include "fuotasim/common.hpp"
#include "fuotasim/radio.hpp"

namespace fuotasim::sim {

struct PlacedDevice {
  double x_m = 0.0;
  double y_m = 0.0;
  double distance_m = 0.0;
  int dr = 0;
  double path_loss_db = 0.0;  // mean loss plus the device's static shadowing
};

/// Largest-remainder split of `n` devices over the distribution.
std::array<int, radio::kNumDataRates> apportion(int n, const std::array<double, radio::kNumDataRates>& distribution);

/// Path-loss band [lower, upper) a device must fall into to be assigned `dr`.
/// The fastest rate has no lower bound.
std::pair<double, double> dr_path_loss_band(int dr, const radio::LinkBudget& budget, double margin_db);

/// Places devices around a gateway at the origin. A device assigned DRk lands
/// uniformly in the annulus whose mean loss falls in DRk's band; its static
/// shadowing is redrawn until the shadowed loss stays inside that band.
/// Throws ConfigError when a band with nonzero mass is empty.
std::vector<PlacedDevice> place_devices(int n, const std::array<double, radio::kNumDataRates>& distribution,
                                        const radio::PathLossParams& path_loss, const radio::LinkBudget& budget,
                                        double margin_db, Rng& rng);

}  // namespace fuotasim::sim
