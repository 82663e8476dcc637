#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "fuotasim/fec.hpp"

using namespace fuotasim;
using namespace fuotasim::fec;

namespace {

Bytes random_image(Rng& rng, std::size_t len) {
  Bytes b(len);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

}  // namespace

TEST_CASE("fragment plans") {
  const auto p = plan_fragments(50 * 1024, 51);
  CHECK(p.nb_frag == 1004);
  CHECK(p.padding == 4);
  CHECK(p.total_fragments() == 1034);
  CHECK(plan_fragments(5 * 1024, 51).nb_frag == 101);
  CHECK(plan_fragments(5 * 1024, 51).padding == 31);
  CHECK(plan_fragments(510, 51).padding == 0);
  CHECK(plan_fragments(510, 51).nb_frag == 10);
  CHECK_THROWS_AS(plan_fragments(0, 51), std::domain_error);
  CHECK_THROWS_AS(plan_fragments(10, 0), std::domain_error);
}

TEST_CASE("fragments are verbatim slices with zero padding") {
  Rng rng = make_stream(1, 1);
  const Bytes image = random_image(rng, 1000);
  const auto f = fragment_image(image, 51);
  REQUIRE(f.originals.size() == 20);
  Bytes joined;
  for (std::size_t i = 0; i < f.originals.size(); ++i) {
    CHECK(f.originals[i].index == i + 1);
    CHECK(f.originals[i].payload.size() == 51);
    joined.insert(joined.end(), f.originals[i].payload.begin(), f.originals[i].payload.end());
  }
  CHECK(std::all_of(joined.begin() + 1000, joined.end(), [](std::uint8_t b) { return b == 0; }));
  joined.resize(1000);
  CHECK(joined == image);
  CHECK_THROWS_AS(fragment_image(Bytes{}, 51), std::domain_error);
}

// Lines frozen from a standalone implementation of the PRBS23 draw rule.
TEST_CASE("parity lines match the reference generator") {
  CHECK(parity_line(1, 10) == std::vector<std::uint32_t>{2, 3, 4, 6, 10});
  CHECK(parity_line(2, 16) == std::vector<std::uint32_t>{3, 4, 6, 8, 9, 12, 13, 16});
  const auto l = parity_line(3, 101);
  CHECK(l.size() == 50);
  CHECK(std::vector<std::uint32_t>(l.begin(), l.begin() + 10) ==
        std::vector<std::uint32_t>{3, 6, 7, 8, 9, 14, 17, 18, 19, 20});
  const auto big = parity_line(30, 1004);
  CHECK(std::vector<std::uint32_t>(big.begin(), big.begin() + 5) == std::vector<std::uint32_t>{3, 5, 8, 12, 16});
  CHECK(parity_line(1, 1) == std::vector<std::uint32_t>{1});
  CHECK_THROWS_AS(parity_line(0, 10), std::domain_error);
}

TEST_CASE("parity line properties") {
  CHECK(parity_line(7, 101) == parity_line(7, 101));
  std::set<std::vector<std::uint32_t>> seen;
  for (std::uint32_t n = 1; n <= 100; ++n) seen.insert(parity_line(n, 101));
  CHECK(seen.size() == 100);
  for (std::uint32_t m = 10; m <= 1000; m += 37) {
    for (std::uint32_t n = 1; n <= 5; ++n) {
      const auto l = parity_line(n, m);
      CHECK(l.size() >= 0.35 * m);
      CHECK(l.size() <= 0.65 * m);
      CHECK(std::is_sorted(l.begin(), l.end()));
      CHECK(l.front() >= 1);
      CHECK(l.back() <= m);
    }
  }
}

TEST_CASE("parity encoding") {
  Rng rng = make_stream(2, 2);
  const auto f = fragment_image(random_image(rng, 777), 13);
  CHECK(encode_redundancy(f.originals, 0).empty());

  const auto parity = encode_redundancy(f.originals, 5);
  REQUIRE(parity.size() == 5);
  for (std::size_t k = 0; k < parity.size(); ++k) {
    const auto n = static_cast<std::uint32_t>(k + 1);
    CHECK(parity[k].index == f.plan.nb_frag + n);
    // XOR of the parity with all members but the first leaves the first.
    const auto line = parity_line(n, static_cast<std::uint32_t>(f.plan.nb_frag));
    Bytes acc = parity[k].payload;
    for (std::size_t j = 1; j < line.size(); ++j) {
      const auto& member = f.originals[line[j] - 1].payload;
      for (std::size_t b = 0; b < acc.size(); ++b) acc[b] ^= member[b];
    }
    CHECK(acc == f.originals[line[0] - 1].payload);
  }

  const auto single = fragment_image(Bytes{1, 2, 3}, 8);
  for (const auto& p : encode_redundancy(single.originals, 4)) CHECK(p.payload == single.originals[0].payload);
}

TEST_CASE("lossless round trips") {
  Rng rng = make_stream(3, 3);
  for (std::size_t len : {std::size_t{5 * 1024}, std::size_t{5000}, std::size_t{1}, std::size_t{51 * 7}}) {
    const Bytes image = random_image(rng, len);
    const auto f = fragment_image(image, 51);
    Decoder dec(f.plan.nb_frag, 51);
    for (const auto& frag : encode_all(f)) {
      if (dec.ingest(frag) == DecodeStatus::Complete) break;
    }
    REQUIRE(dec.complete());
    CHECK(dec.finalize(f.plan) == image);
  }
}

TEST_CASE("decoder rank bookkeeping") {
  Rng rng = make_stream(4, 4);
  const auto f = fragment_image(random_image(rng, 510), 51);
  Decoder dec(10, 51);
  CHECK(dec.ingest(f.originals[3]) == DecodeStatus::Pending);
  CHECK(dec.rank() == 1);
  dec.ingest(f.originals[3]);
  CHECK(dec.rank() == 1);
  CHECK(dec.received() == 2);
  CHECK_THROWS_AS(dec.finalize(f.plan), StateError);

  Fragment wrong = f.originals[0];
  wrong.payload.pop_back();
  CHECK_THROWS_AS(dec.ingest(wrong), FormatError);
  CHECK_THROWS_AS(dec.ingest(Fragment{0, Bytes(51)}), FormatError);

  // Originals in any order complete the decoder.
  auto order = f.originals;
  std::shuffle(order.begin(), order.end(), rng);
  Decoder shuffled(10, 51);
  for (const auto& o : order) shuffled.ingest(o);
  CHECK(shuffled.complete());
}

TEST_CASE("recovery from parity, padding restored") {
  Rng rng = make_stream(5, 5);
  const Bytes image = random_image(rng, 5 * 1024);
  const auto f = fragment_image(image, 51);
  const auto parity = encode_redundancy(f.originals, 30);
  Decoder dec(f.plan.nb_frag, 51);
  for (std::size_t i = 10; i < f.originals.size(); ++i) dec.ingest(f.originals[i]);
  for (const auto& p : parity) dec.ingest(p);
  REQUIRE(dec.complete());
  const Bytes out = dec.finalize(f.plan);
  CHECK(out.size() == image.size());
  CHECK(out == image);
}

TEST_CASE("up to 30 lost originals are mostly recoverable with 30 parities") {
  Rng rng = make_stream(6, 6);
  const std::size_t m = 101;
  std::vector<Fragment> originals;
  for (std::size_t i = 0; i < m; ++i) originals.push_back({static_cast<std::uint32_t>(i + 1), {0}});
  const auto parity = encode_redundancy(originals, 30);
  int ok = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const std::size_t k = 1 + rng() % 30;
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    Decoder dec(m, 1);
    for (std::size_t i = k; i < m; ++i) dec.ingest(originals[idx[i]]);
    for (const auto& p : parity) dec.ingest(p);
    if (dec.complete()) ++ok;
  }
  CHECK(ok >= 950);
}

TEST_CASE("decode success depends only on the received set") {
  Rng rng = make_stream(7, 7);
  const auto f = fragment_image(random_image(rng, 40 * 9), 9);
  auto coded = encode_all({f.plan, f.originals});
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Fragment> subset;
    for (const auto& c : coded) {
      if (uniform(rng, 0.0, 1.0) < 0.7) subset.push_back(c);
    }
    Decoder a(f.plan.nb_frag, 9);
    for (const auto& s : subset) a.ingest(s);
    std::shuffle(subset.begin(), subset.end(), rng);
    Decoder b(f.plan.nb_frag, 9);
    std::size_t needed = 0;
    for (const auto& s : subset) {
      b.ingest(s);
      ++needed;
      // Completion never happens before nb_frag fragments arrived.
      if (b.complete()) CHECK(needed >= f.plan.nb_frag);
    }
    CHECK(a.complete() == b.complete());
    CHECK(a.rank() == b.rank());
    if (a.complete()) CHECK(a.finalize(f.plan) == b.finalize(f.plan));
  }
}

TEST_CASE("recovery per loss count tracks the random binary matrix bound") {
  Rng rng = make_stream(9, 9);
  const std::size_t m = 101;
  std::vector<Fragment> originals;
  for (std::size_t i = 0; i < m; ++i) originals.push_back({static_cast<std::uint32_t>(i + 1), {0}});
  const auto parity = encode_redundancy(originals, 30);
  for (std::size_t k : {10, 20, 25, 28, 30}) {
    double bound = 1.0;
    for (std::size_t i = 0; i < k; ++i) bound *= 1.0 - std::ldexp(1.0, static_cast<int>(i) - 30);
    const int trials = 400;
    int ok = 0;
    for (int t = 0; t < trials; ++t) {
      std::vector<std::size_t> idx(m);
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng);
      Decoder dec(m, 1);
      for (std::size_t i = k; i < m; ++i) dec.ingest(originals[idx[i]]);
      for (const auto& p : parity) dec.ingest(p);
      if (dec.complete()) ++ok;
    }
    const double rate = static_cast<double>(ok) / trials;
    const double sd = std::sqrt(bound * (1.0 - bound) / trials);
    CAPTURE(k);
    CHECK(std::abs(rate - bound) <= 4.0 * sd + 0.005);
  }
}
