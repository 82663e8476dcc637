#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fuotasim/radio.hpp"

using namespace fuotasim;
using namespace fuotasim::radio;

// Airtimes frozen from an independent evaluation of the Semtech SX127x formula
// (8 + 4.25 preamble symbols, explicit header, CRC on, CR 4/5, LDRO at SF11/12).
TEST_CASE("time on air matches the Semtech formula") {
  CHECK(time_on_air(data_rate(0), 23) == doctest::Approx(1.482752).epsilon(1e-9));
  CHECK(time_on_air(data_rate(0), 59) == doctest::Approx(2.629632).epsilon(1e-9));
  CHECK(time_on_air(data_rate(1), 59) == doctest::Approx(1.478656).epsilon(1e-9));
  CHECK(time_on_air(data_rate(2), 59) == doctest::Approx(0.657408).epsilon(1e-9));
  CHECK(time_on_air(data_rate(3), 123) == doctest::Approx(0.656384).epsilon(1e-9));
  CHECK(time_on_air(data_rate(4), 230) == doctest::Approx(0.635392).epsilon(1e-9));
  CHECK(time_on_air(data_rate(5), 23) == doctest::Approx(0.061696).epsilon(1e-9));
  CHECK(time_on_air(data_rate(5), 230) == doctest::Approx(0.363776).epsilon(1e-9));
  CHECK(beacon_airtime() == doctest::Approx(0.152576).epsilon(1e-9));
}

TEST_CASE("slower spreading factors always take longer") {
  for (std::size_t len = 1; len <= 59; ++len) {
    for (int i = 0; i < kNumDataRates - 1; ++i) {
      CHECK(time_on_air(data_rate(i), len) > time_on_air(data_rate(i + 1), len));
    }
  }
}

TEST_CASE("frames above the data rate cap are rejected") {
  CHECK_THROWS_AS(time_on_air(data_rate(0), 51 + kMacHeaderBytes + 1), SizeViolation);
  CHECK_THROWS_AS(time_on_air(data_rate(5), 222 + kMacHeaderBytes + 1), SizeViolation);
  CHECK_NOTHROW(time_on_air(data_rate(5), 222 + kMacHeaderBytes));
  CHECK_THROWS_AS(data_rate(6), std::out_of_range);
  CHECK_THROWS_AS(data_rate(-1), std::out_of_range);
}

TEST_CASE("data rate table") {
  const std::size_t caps[] = {51, 51, 51, 115, 222, 222};
  for (int i = 0; i < kNumDataRates; ++i) {
    CHECK(data_rate(i).spreading_factor == 12 - i);
    CHECK(data_rate(i).max_app_payload == caps[i]);
  }
  const auto channels = default_channels();
  REQUIRE(channels.size() == 4);
  CHECK(channels[0].center_frequency_hz == 868.1e6);
  CHECK(channels[kDownlinkChannel].center_frequency_hz == 869.525e6);
  CHECK(channels[kDownlinkChannel].duty_cycle == 0.10);
  CHECK(channels[kDownlinkChannel].use == ChannelUse::DownlinkOnly);
  for (int c = 0; c < kNumUplinkChannels; ++c) CHECK(channels[static_cast<std::size_t>(c)].duty_cycle == 0.01);
}

TEST_CASE("dual-slope path loss") {
  const PathLossParams p;
  CHECK(path_loss_mean(92.67, p) == doctest::Approx(128.63).epsilon(1e-12));
  CHECK(path_loss_mean(100.0, p) == doctest::Approx(128.9771387882783).epsilon(1e-12));
  CHECK(path_loss_mean(400.0, p) == doctest::Approx(140.78560478859296).epsilon(1e-12));
  CHECK(path_loss_mean(399.999, p) == doctest::Approx(135.2987572969775).epsilon(1e-9));
  CHECK_THROWS_AS(path_loss_mean(0.0, p), std::domain_error);
  CHECK_THROWS_AS(path_loss_mean(-5.0, p), std::domain_error);
}

TEST_CASE("path loss grows with distance inside each branch") {
  const PathLossParams p;
  double prev = path_loss_mean(1.0, p);
  for (double d = 2.0; d < 400.0; d += 3.0) {
    const double pl = path_loss_mean(d, p);
    CHECK(pl > prev);
    prev = pl;
  }
  prev = path_loss_mean(400.0, p);
  for (double d = 410.0; d < 20000.0; d += 97.0) {
    const double pl = path_loss_mean(d, p);
    CHECK(pl > prev);
    prev = pl;
  }
}

TEST_CASE("inverse path loss lands on the smallest matching distance") {
  const PathLossParams p;
  for (double pl : {110.0, 128.63, 133.0, 135.0, 141.0, 150.0}) {
    const double d = distance_for_path_loss(pl, p);
    CHECK(path_loss_mean(d, p) == doctest::Approx(pl).epsilon(1e-9));
  }
  // Losses inside the jump at the breakpoint map onto the breakpoint.
  CHECK(distance_for_path_loss(138.0, p) == doctest::Approx(400.0));
}

TEST_CASE("shadowing samples") {
  PathLossParams p;
  SUBCASE("zero sigma gives the mean") {
    p.near.sigma_db = 0.0;
    Rng rng = make_stream(7, 1);
    for (int i = 0; i < 10; ++i) CHECK(path_loss_sample(100.0, p, rng) == path_loss_mean(100.0, p));
  }
  SUBCASE("sample moments converge") {
    Rng rng = make_stream(42, 1);
    std::vector<double> xs(100000);
    for (auto& x : xs) x = path_loss_sample(100.0, p, rng);
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    CHECK(std::abs(sd - 8.72) / 8.72 < 0.02);
    CHECK(mean == doctest::Approx(path_loss_mean(100.0, p)).epsilon(0.002));
  }
  SUBCASE("same seed, same sequence") {
    Rng a = make_stream(3, 1), b = make_stream(3, 1);
    for (int i = 0; i < 100; ++i) CHECK(path_loss_sample(700.0, p, a) == path_loss_sample(700.0, p, b));
  }
}

TEST_CASE("link budget sum") {
  CHECK(received_power(14.0, 2.2, 8.0, 128.63) == doctest::Approx(-104.43).epsilon(1e-12));
  CHECK(received_power(3.5, 0.0, 0.0, 0.0) == 3.5);
  CHECK(received_power(14.0, 8.0, 2.2, 120.0) == received_power(14.0, 2.2, 8.0, 120.0));
  const LinkBudget b;
  CHECK(b.max_path_loss(0, 0.0) == doctest::Approx(14.0 + 2.2 + 8.0 + 137.0));
  CHECK(b.max_path_loss(5, 1.0) == doctest::Approx(14.0 + 2.2 + 8.0 + 123.0 - 1.0));
}

TEST_CASE("reception probability") {
  const LinkBudget b;
  for (int i = 0; i < kNumDataRates; ++i) {
    const auto& dr = data_rate(i);
    CHECK(reception_probability(b.sensitivity(i) - 30.0, dr, 59) < 0.001);
    CHECK(reception_probability(b.sensitivity(i) + 30.0, dr, 59) > 0.999);
    CHECK(reception_probability(b.sensitivity(i) + 10.0, dr, 59) > 0.99);
    CHECK(reception_probability(b.sensitivity(i) - 10.0, dr, 23) < 0.01);
  }
  for (double m = -12.0; m <= 12.0; m += 0.05) {
    const double rx = b.sensitivity(5) + m;
    CHECK(reception_probability(rx, data_rate(5), 230) <= reception_probability(rx, data_rate(5), 59));
  }
}

TEST_CASE("reception probability is monotone over a random grid") {
  Rng rng = make_stream(11, 99);
  const LinkBudget b;
  const ReceptionModel soft{5.0, 0.0};
  for (int trial = 0; trial < 2000; ++trial) {
    const int dr = static_cast<int>(rng() % kNumDataRates);
    const auto cap = data_rate(dr).max_app_payload + kMacHeaderBytes;
    const std::size_t len = 1 + rng() % cap;
    const double p1 = uniform(rng, -150.0, -90.0);
    const double p2 = p1 + uniform(rng, 0.0, 5.0);
    for (const auto& model : {ReceptionModel{}, soft}) {
      const double a = reception_probability(p1, data_rate(dr), len, b, model);
      const double c = reception_probability(p2, data_rate(dr), len, b, model);
      CHECK(a >= 0.0);
      CHECK(c <= 1.0);
      CHECK(c >= a);
      if (len < cap) CHECK(reception_probability(p1, data_rate(dr), len + 1, b, model) <= a);
    }
  }
}

TEST_CASE("capture and cross spreading factor interference") {
  const auto sir = SirMatrix::with_defaults();
  SUBCASE("lone frame survives") {
    const ReceivedFrame f{1, 5, -100.0};
    CHECK(resolve_collisions(std::vector{f}, sir) == std::vector<std::uint64_t>{1});
  }
  SUBCASE("equal same-SF frames both die") {
    const std::vector<ReceivedFrame> fs{{1, 5, -100.0}, {2, 5, -100.0}};
    CHECK(resolve_collisions(fs, sir).empty());
  }
  SUBCASE("20 dB apart: the stronger survives") {
    const std::vector<ReceivedFrame> fs{{1, 3, -100.0}, {2, 3, -120.0}};
    CHECK(resolve_collisions(fs, sir) == std::vector<std::uint64_t>{1});
  }
  SUBCASE("cross-SF interference is tolerated below 8 dB") {
    const std::vector<ReceivedFrame> fs{{1, 0, -110.0}, {2, 5, -103.0}};
    CHECK(resolve_collisions(fs, sir) == std::vector<std::uint64_t>{1, 2});
    const std::vector<ReceivedFrame> gs{{1, 0, -110.0}, {2, 5, -101.0}};
    CHECK(resolve_collisions(gs, sir) == std::vector<std::uint64_t>{2});
  }
  SUBCASE("interferers of one rate add up") {
    // Two interferers 3 dB below each sum to about 0 dB below.
    const std::vector<ReceivedFrame> fs{{1, 5, -100.0}, {2, 5, -107.0}, {3, 5, -107.0}};
    CHECK(survives_interference(fs[0], fs, sir) == false);
    CHECK(survives_interference(fs[0], std::vector{fs[1]}, sir) == true);
  }
}

TEST_CASE("collision resolution is permutation invariant") {
  Rng rng = make_stream(5, 5);
  const auto sir = SirMatrix::with_defaults();
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ReceivedFrame> fs;
    const int n = 1 + static_cast<int>(rng() % 7);
    for (int i = 0; i < n; ++i) {
      fs.push_back({static_cast<std::uint64_t>(i + 1), static_cast<int>(rng() % kNumDataRates), uniform(rng, -130, -90)});
    }
    const auto ref = resolve_collisions(fs, sir);
    for (int k = 0; k < 5; ++k) {
      std::shuffle(fs.begin(), fs.end(), rng);
      CHECK(resolve_collisions(fs, sir) == ref);
    }
  }
}

TEST_CASE("invalid radio parameters") {
  PathLossParams p;
  p.far.gamma = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  LinkBudget b;
  b.sensitivity_dbm[3] = -140.0;
  CHECK_THROWS_AS(b.validate(), ConfigError);
}
