#include <doctest.h>

#include <cmath>

#include "fuotasim/audit.hpp"
#include "fuotasim/simulation.hpp"

using namespace fuotasim;
using namespace fuotasim::sim;

namespace {

cli::ScenarioConfig ideal_single() {
  cli::ScenarioConfig c;
  c.devices = 1;
  c.ideal_channel = true;
  c.duty_cycle_enabled = false;
  return c;
}

double mean_of(const metrics::PhaseReport& r, const std::string& key) {
  for (const auto& [k, v] : r.scalars()) {
    if (k == key) return v;
  }
  throw std::out_of_range(key);
}

}  // namespace

TEST_CASE("a lossless single device needs 7 uplinks and 4 downlinks") {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto c = ideal_single();
    for (bool duty : {false, true}) {
      c.duty_cycle_enabled = duty;
      const auto out = run_fuota(c, seed);
      REQUIRE(out.initial.per_device.size() == 1);
      CHECK(out.initial.per_device[0].uplinks == 7);
      CHECK(out.initial.per_device[0].downlinks == 4);
      CHECK(out.initial.losses.total() == 0);
      CHECK(out.initial.per_device[0].completed);
      CHECK(out.multicast.efficiency() == 1.0);
    }
  }
}

TEST_CASE("initial phase ends with every device acknowledged or failed") {
  cli::ScenarioConfig c;
  c.devices = 60;
  Simulation sim(c, 7, false);
  const auto r = sim.run_initial_phase();
  for (std::size_t i = 0; i < sim.devices().size(); ++i) {
    const auto& d = sim.devices()[i];
    CHECK((sim.server_state()[i].step == ServerStep::Done || d.failed));
    if (sim.server_state()[i].step == ServerStep::Done) {
      // The clock correction leaves at most the sub-second residual.
      CHECK(std::abs(d.clock_skew_s + static_cast<double>(d.sessions.clock_offset)) <= 1.0);
    }
  }
  CHECK(r.total_time_s > 0.0);
  CHECK(r.start_time_metric_min.has_value());
  CHECK_THROWS_AS(sim.run_initial_phase(), StateError);
}

TEST_CASE("lossless class C time is the fragment count over the duty cycle") {
  auto c = ideal_single();
  c.duty_cycle_enabled = true;
  const auto out = run_fuota(c, 1);
  const double a = radio::time_on_air(radio::data_rate(0), 51 + radio::kMacHeaderBytes);
  // 101 originals suffice without losses; each but the last is followed by 9 a of silence.
  CHECK(out.multicast.total_time_s == doctest::Approx(100.0 * a / 0.1 + a).epsilon(0.01));
}

TEST_CASE("runs are reproducible from the seed") {
  cli::ScenarioConfig c;
  c.devices = 40;
  c.multicast_class = cli::MulticastClass::B;
  c.multicast_dr = 3;
  c.ping_periodicity = 1;
  const auto a = run_fuota(c, 11, true);
  const auto b = run_fuota(c, 11, true);
  const auto other = run_fuota(c, 12, true);
  CHECK(a.transcript == b.transcript);
  CHECK(a.transcript != other.transcript);
  CHECK(a.multicast.scalars() == b.multicast.scalars());
  CHECK(a.initial.scalars() == b.initial.scalars());
  // Recording a transcript does not change the outcome.
  CHECK(run_fuota(c, 11, false).multicast.scalars() == a.multicast.scalars());
}

TEST_CASE("energy accounting is conserved per device") {
  cli::ScenarioConfig c;
  c.devices = 50;
  c.multicast_dr = 2;
  const auto out = run_fuota(c, 5);
  for (const auto* r : {&out.initial, &out.multicast}) {
    for (const auto& d : r->per_device) {
      CHECK(d.energy.tx_j >= 0.0);
      CHECK(d.energy.rx_j >= 0.0);
      CHECK(d.energy.idle_j >= 0.0);
      CHECK(d.energy.total_j() == doctest::Approx(d.energy.tx_j + d.energy.rx_j + d.energy.idle_j));
      CHECK(d.energy.rx_j == doctest::Approx(d.rx_time_s * c.power.rx_mw / 1000.0));
    }
  }
  for (const auto& d : out.multicast.per_device) CHECK(d.energy.tx_j == 0.0);
}

TEST_CASE("coverage shrinks as the multicast data rate rises") {
  cli::ScenarioConfig c;
  c.devices = 100;
  double prev = 101.0;
  for (int dr = 0; dr < radio::kNumDataRates; ++dr) {
    c.multicast_dr = dr;
    double eff = 0.0;
    for (std::uint64_t seed : {1, 2, 3}) eff += run_fuota(c, seed).multicast.efficiency() * 100.0 / 3.0;
    CAPTURE(dr);
    CHECK(eff <= prev + 1.0);
    prev = eff;
  }
  CHECK(prev < 70.0);
}

TEST_CASE("class B devices sleep between ping slots") {
  cli::ScenarioConfig c;
  c.devices = 30;
  c.multicast_dr = 5;
  // Class C keeps the receiver open for the whole session.
  const auto always_on = run_fuota(c, 3);
  CHECK(mean_of(always_on.multicast, "rx_time_s") > 0.5 * always_on.multicast.total_time_s);
  c.multicast_class = cli::MulticastClass::B;
  for (int p = 2; p <= 7; ++p) {
    c.ping_periodicity = p;
    const auto out = run_fuota(c, 3);
    CAPTURE(p);
    CHECK(mean_of(out.multicast, "rx_time_s") < 0.25 * mean_of(always_on.multicast, "rx_time_s"));
    CHECK(out.multicast.efficiency() > 0.0);
  }
}

TEST_CASE("class B is slower than class C at the same data rate") {
  cli::ScenarioConfig c;
  c.devices = 30;
  c.multicast_dr = 3;
  const double t_c = run_fuota(c, 2).multicast.total_time_s;
  c.multicast_class = cli::MulticastClass::B;
  c.ping_periodicity = 0;
  const double t_b0 = run_fuota(c, 2).multicast.total_time_s;
  c.ping_periodicity = 7;
  const double t_b7 = run_fuota(c, 2).multicast.total_time_s;
  CHECK(t_b0 >= t_c);
  CHECK(t_b7 > t_b0);
}

TEST_CASE("busy gateways fall back to the second receive window") {
  cli::ScenarioConfig c;
  c.devices = 100;
  const auto out = run_fuota(c, 1, true);
  CHECK(out.transcript.find(" rx2\n") != std::string::npos);
  CHECK(out.transcript.find(" rx1\n") != std::string::npos);
  CHECK(audit_duty_cycle(out.transcript).ok());
  CHECK(out.initial.losses.total() > 0);
}

TEST_CASE("the multicast window opens after the guard") {
  cli::ScenarioConfig c;
  c.devices = 30;
  const auto out = run_fuota(c, 9);
  CHECK(out.start_guard_s > 0.0);
  CHECK(out.session_start_s > 0.0);
  c.start_guard_s = 5000.0;
  const auto fixed = run_fuota(c, 9);
  CHECK(fixed.start_guard_s == 5000.0);
}
