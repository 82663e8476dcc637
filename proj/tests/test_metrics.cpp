#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fuotasim/metrics.hpp"

using namespace fuotasim;
using namespace fuotasim::metrics;

namespace {

PhaseReport make_report(const std::string& fp, double time, std::vector<bool> done) {
  PhaseReport r;
  r.phase = Phase::Multicast;
  r.config_fingerprint = fp;
  r.total_time_s = time;
  for (std::size_t i = 0; i < done.size(); ++i) {
    DeviceReport d;
    d.id = static_cast<int>(i);
    d.completed = done[i];
    d.energy = {1.0, 2.0 * static_cast<double>(i + 1), 0.5};
    d.uplinks = 3;
    r.per_device.push_back(d);
  }
  return r;
}

}  // namespace

TEST_CASE("summary statistics") {
  const auto s = summarize({2.0, 4.0});
  CHECK(s.mean == 3.0);
  CHECK(s.std == doctest::Approx(std::sqrt(2.0)));
  CHECK(summarize({7.0}).std == 0.0);
  CHECK(summarize({7.0}).mean == 7.0);
  CHECK(summarize({}).mean == 0.0);
}

TEST_CASE("aggregation is invariant to seed order") {
  Rng rng = make_stream(1, 1);
  std::vector<PhaseReport> reports;
  for (int i = 0; i < 10; ++i) reports.push_back(make_report("abc", uniform(rng, 10, 100), {true, i % 2 == 0, true}));
  const auto a = aggregate(reports, {});
  for (int k = 0; k < 5; ++k) {
    std::shuffle(reports.begin(), reports.end(), rng);
    const auto b = aggregate(reports, {});
    REQUIRE(a.metrics.size() == b.metrics.size());
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
      CHECK(a.metrics[i].first == b.metrics[i].first);
      CHECK(a.metrics[i].second.mean == doctest::Approx(b.metrics[i].second.mean).epsilon(1e-12));
      CHECK(a.metrics[i].second.std == doctest::Approx(b.metrics[i].second.std).epsilon(1e-9));
    }
  }
  CHECK(a.at("efficiency_pct").mean == doctest::Approx(100.0 * 25.0 / 30.0));
}

TEST_CASE("aggregation errors") {
  CHECK_THROWS_AS(aggregate({}, {}), AggregationError);
  CHECK_THROWS_AS(aggregate({make_report("a", 1, {true}), make_report("b", 1, {true})}, {}), AggregationError);
  CHECK_THROWS_AS(aggregate({make_report("a", 1, {true})}, {1, 2}), AggregationError);
  auto initial = make_report("a", 1, {true});
  initial.phase = Phase::Initial;
  CHECK_THROWS_AS(aggregate({make_report("a", 1, {true}), initial}, {}), AggregationError);
  const auto ok = aggregate({make_report("a", 1, {true})}, {9});
  CHECK(ok.n_seeds() == 1);
  CHECK_THROWS_AS(ok.at("nonexistent"), std::out_of_range);
}

TEST_CASE("phase scalars") {
  const auto r = make_report("x", 120.0, {true, false, true});
  CHECK(r.efficiency() == doctest::Approx(2.0 / 3.0));
  const auto s = r.scalars();
  const auto get = [&](const std::string& k) {
    return std::find_if(s.begin(), s.end(), [&](const auto& kv) { return kv.first == k; })->second;
  };
  CHECK(get("total_time_min") == 2.0);
  // Multicast energy averages over updated devices: (3.5 + 7.5) / 2.
  CHECK(get("energy_j") == doctest::Approx(5.5));
  CHECK(get("energy_all_j") == doctest::Approx((3.5 + 5.5 + 7.5) / 3.0));
  CHECK(get("uplinks_per_device") == 3.0);
  CHECK(PhaseReport{}.efficiency() == 0.0);
  CHECK(std::string(to_string(Phase::Initial)) == "initial");
}

TEST_CASE("rate of increase") {
  const std::vector<std::pair<std::string, double>> series{{"5k", 10.0}, {"10k", 20.0}, {"50k", 100.0}};
  const auto r = rate_of_increase(series, "5k");
  CHECK(r[0].second == 1.0);
  CHECK(r[1].second == 2.0);
  CHECK(r[2].second == 10.0);
  CHECK_THROWS_AS(rate_of_increase(series, "7k"), std::out_of_range);
  CHECK_THROWS_AS(rate_of_increase({{"a", 0.0}}, "a"), std::domain_error);
}

TEST_CASE("loss shares") {
  const auto s = loss_shares({1, 3, 96});
  CHECK(s.at("nr_collisions") == doctest::Approx(1.0));
  CHECK(s.at("nr_ulost") == doctest::Approx(3.0));
  CHECK(s.at("nr_no_down") == doctest::Approx(96.0));
  CHECK(loss_shares({}).at("nr_no_down") == 0.0);
}
