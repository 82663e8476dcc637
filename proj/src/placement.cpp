#include "fuotasim/placement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace fuotasim::sim {

namespace {

constexpr double kMinDistance = 1.0;
constexpr int kShadowAttempts = 200;

}  // namespace

std::array<int, radio::kNumDataRates> apportion(int n, const std::array<double, radio::kNumDataRates>& distribution) {
  if (n < 0) throw std::domain_error("device count must not be negative");
  const double mass = std::accumulate(distribution.begin(), distribution.end(), 0.0);
  if (!(mass > 0)) throw ConfigError("dr distribution has no mass");
  std::array<int, radio::kNumDataRates> counts{};
  std::array<double, radio::kNumDataRates> remainder{};
  int assigned = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double exact = n * distribution[i] / mass;
    counts[i] = static_cast<int>(std::floor(exact));
    remainder[i] = exact - counts[i];
    assigned += counts[i];
  }
  std::array<std::size_t, radio::kNumDataRates> order{};
  std::iota(order.begin(), order.end(), 0);
  // Ties go to the faster rate, which holds the larger share by default.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainder[a] != remainder[b] ? remainder[a] > remainder[b] : a > b;
  });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % order.size()]];
  return counts;
}

std::pair<double, double> dr_path_loss_band(int dr, const radio::LinkBudget& budget, double margin_db) {
  const double upper = budget.max_path_loss(dr, margin_db);
  const double lower = dr + 1 < radio::kNumDataRates ? budget.max_path_loss(dr + 1, margin_db)
                                                     : -std::numeric_limits<double>::infinity();
  return {lower, upper};
}

std::vector<PlacedDevice> place_devices(int n, const std::array<double, radio::kNumDataRates>& distribution,
                                        const radio::PathLossParams& path_loss, const radio::LinkBudget& budget,
                                        double margin_db, Rng& rng) {
  const auto counts = apportion(n, distribution);
  std::vector<PlacedDevice> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int dr = 0; dr < radio::kNumDataRates; ++dr) {
    if (counts[static_cast<std::size_t>(dr)] == 0) continue;
    const auto [lower, upper] = dr_path_loss_band(dr, budget, margin_db);
    if (!(upper > lower)) throw ConfigError("DR" + std::to_string(dr) + " has an empty path-loss band");
    const double d_hi = distance_for_path_loss(upper, path_loss);
    const double d_lo = std::isinf(lower) ? kMinDistance : std::max(kMinDistance, distance_for_path_loss(lower, path_loss));
    if (!(d_hi > d_lo)) {
      throw ConfigError("no placement area yields DR" + std::to_string(dr) +
                        " under the configured link budget; adjust the distribution or the margin");
    }
    for (int i = 0; i < counts[static_cast<std::size_t>(dr)]; ++i) {
      const double r = std::sqrt(uniform(rng, d_lo * d_lo, d_hi * d_hi));
      const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      double pl = radio::path_loss_mean(r, path_loss);
      for (int attempt = 0; attempt < kShadowAttempts; ++attempt) {
        const double shadowed = radio::path_loss_sample(r, path_loss, rng);
        if (shadowed >= lower && shadowed < upper) {
          pl = shadowed;
          break;
        }
      }
      // A mean outside the band only happens inside the breakpoint jump; pin it to the band edge.
      pl = std::clamp(pl, std::isinf(lower) ? pl : lower, std::nextafter(upper, lower));
      out.push_back({r * std::cos(theta), r * std::sin(theta), r, dr, pl});
    }
  }
  return out;
}

}  // namespace fuotasim::sim
