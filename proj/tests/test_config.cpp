#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fuotasim/config.hpp"

using namespace fuotasim;
using namespace fuotasim::cli;

TEST_CASE("defaults") {
  const ScenarioConfig c;
  CHECK(c.devices == 100);
  CHECK(c.multicast_class == MulticastClass::C);
  CHECK(c.firmware_size == 5120);
  CHECK(c.redundancy == 30);
  CHECK(c.effective_fragment_size() == 51);
  CHECK(c.seeds.size() == 10);
  CHECK_NOTHROW(c.validate());
  ScenarioConfig fast = c;
  fast.multicast_dr = 5;
  CHECK(fast.effective_fragment_size() == 222);
}

TEST_CASE("the written form parses back to the same config") {
  ScenarioConfig c;
  c.devices = 321;
  c.multicast_class = MulticastClass::B;
  c.multicast_dr = 4;
  c.ping_periodicity = 6;
  c.firmware_size = 50 * 1024;
  c.fragment_size = 200;
  c.seeds = {3, 9, 27};
  c.placement_margin_db = 0.123456789;
  c.start_guard_s = 1234.5;
  c.ideal_channel = true;
  c.sir.threshold_db[1][4] = -13.25;
  const std::string text = write_config(c);
  const ScenarioConfig back = parse_config_text(text);
  CHECK(back == c);
  CHECK(write_config(back) == text);
  CHECK(parse_config_text(write_config(ScenarioConfig{})) == ScenarioConfig{});
}

TEST_CASE("fingerprints ignore seeds only") {
  ScenarioConfig a, b;
  b.seeds = {42};
  CHECK(fingerprint(a) == fingerprint(b));
  CHECK(fingerprint(a).size() == 16);
  b.devices = 101;
  CHECK(fingerprint(a) != fingerprint(b));
}

TEST_CASE("partial files override defaults") {
  const auto c = parse_config_text("[scenario]\ndevices = 200\nclass = b\n\n[mac]\nduty_cycle = off\n");
  CHECK(c.devices == 200);
  CHECK(c.multicast_class == MulticastClass::B);
  CHECK_FALSE(c.duty_cycle_enabled);
  CHECK(c.multicast_dr == 0);

  const auto path = std::filesystem::temp_directory_path() / "fuotasim_test_config.ini";
  std::ofstream(path) << "[scenario]\ndevices = 200\n";
  CHECK(load_config_file(path.string()).devices == 200);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_config_file("/nonexistent/fuotasim.ini"), ConfigError);
}

TEST_CASE("uniform SIR keys fill the matrix") {
  const auto c = parse_config_text("[radio]\nsir_same_sf_db = 1\nsir_cross_sf_db = -20\n");
  CHECK(c.sir.threshold(2, 2) == 1.0);
  CHECK(c.sir.threshold(0, 5) == -20.0);
}

TEST_CASE("invalid configs are rejected") {
  CHECK_THROWS_AS(parse_config_text("[scenario]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[nowhere]\ndevices = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[scenario]\ndevices = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[scenario]\nclass = A\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[scenario]\ndr_distribution = 1,0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[mac]\nduty_cycle = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("devices = 3\n"), ConfigError);

  ScenarioConfig c;
  c.multicast_dr = 5;
  c.fragment_size = 223;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.fragment_size = 222;
  CHECK_NOTHROW(c.validate());

  const auto bad = [](auto mutate) {
    ScenarioConfig x;
    mutate(x);
    CHECK_THROWS_AS(x.validate(), ConfigError);
  };
  bad([](ScenarioConfig& x) { x.devices = 0; });
  bad([](ScenarioConfig& x) { x.multicast_dr = 6; });
  bad([](ScenarioConfig& x) { x.ping_periodicity = 8; });
  bad([](ScenarioConfig& x) { x.firmware_size = 0; });
  bad([](ScenarioConfig& x) { x.seeds.clear(); });
  bad([](ScenarioConfig& x) { x.dr_distribution[0] = 0.5; });
  bad([](ScenarioConfig& x) { x.poll_interval_min_s = 100.0; });
  bad([](ScenarioConfig& x) { x.fragment_size = 1; x.firmware_size = 70000; });
}

TEST_CASE("seed lists, sizes and classes") {
  CHECK(parse_seed_list("1,2,5..8") == std::vector<std::uint64_t>{1, 2, 5, 6, 7, 8});
  CHECK(parse_seed_list("1..10").size() == 10);
  CHECK_THROWS_AS(parse_seed_list(""), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("5..2"), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("x"), ConfigError);
  CHECK(parse_size("5k") == 5120);
  CHECK(parse_size("10240") == 10240);
  CHECK(parse_size("1.5k") == 1536);
  CHECK_THROWS_AS(parse_size("0.3"), ConfigError);
  CHECK_THROWS_AS(parse_size("k"), ConfigError);
  CHECK(parse_class("C") == MulticastClass::C);
  CHECK(std::string(to_string(MulticastClass::B)) == "B");
}
