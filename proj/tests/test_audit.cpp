#include <doctest.h>

#include <cstdio>

#include "fuotasim/audit.hpp"
#include "fuotasim/simulation.hpp"

using namespace fuotasim;
using namespace fuotasim::sim;

TEST_CASE("audit accepts transmissions that respect the off-time") {
  const std::string t =
      "0.000000 dev1 tx-start ch=0 airtime=1.000000 dc=0.01\n"
      "100.000000 dev1 tx-start ch=0 airtime=1.000000 dc=0.01\n"
      "100.500000 dev1 tx-start ch=1 airtime=1.000000 dc=0.01\n"
      "150.000000 dev2 tx-start ch=0 airtime=1.000000 dc=0.01\n"
      "150.000000 dev2 rx-fail reason=collision\n";
  const auto a = audit_duty_cycle(t);
  CHECK(a.transmissions == 4);
  CHECK(a.ok());
}

TEST_CASE("audit flags a transmission inside the off-time") {
  const std::string t =
      "0.000000 gw tx-start ch=3 airtime=1.000000 dc=0.1\n"
      "9.000000 gw tx-start ch=3 airtime=1.000000 dc=0.1\n";
  const auto a = audit_duty_cycle(t);
  REQUIRE_FALSE(a.ok());
  CHECK(a.violations.front().actor == "gw");
  CHECK(a.violations.front().channel == 3);
  CHECK(a.violations.front().rule == "gate");
  CHECK(a.violations.front().time == doctest::Approx(9.0));
}

TEST_CASE("audit flags excess airtime within a window") {
  std::string t;
  char buf[96];
  // 10% of 600 s is 60 s; 80 back-to-back seconds exceed it even with one frame of slack.
  for (int i = 0; i < 80; ++i) {
    std::snprintf(buf, sizeof buf, "%d.000000 gw tx-start ch=3 airtime=1.000000 dc=0.1\n", i);
    t += buf;
  }
  bool window = false;
  for (const auto& v : audit_duty_cycle(t).violations) window |= v.rule == "window";
  CHECK(window);
}

TEST_CASE("simulated runs never violate the duty cycle") {
  cli::ScenarioConfig c;
  c.devices = 30;
  for (auto cls : {cli::MulticastClass::C, cli::MulticastClass::B}) {
    c.multicast_class = cls;
    c.multicast_dr = 5;
    c.ping_periodicity = 2;
    const auto out = run_fuota(c, 4, true);
    const auto a = audit_duty_cycle(out.transcript);
    CHECK(a.transmissions > 100);
    CHECK(a.ok());
  }
}
