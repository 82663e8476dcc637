#include "fuotasim/fec.hpp"

#include <algorithm>
#include <bit>
#include <string>

namespace fuotasim::fec {

namespace {

void xor_into(Bytes& dst, const Bytes& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] ^= src[i];
}

}  // namespace

FragmentPlan plan_fragments(std::size_t image_size, std::size_t frag_size, std::size_t nb_redundancy) {
  if (image_size == 0) throw std::domain_error("cannot fragment an empty image");
  if (frag_size == 0) throw std::domain_error("fragment size must be at least one byte");
  FragmentPlan plan;
  plan.frag_size = frag_size;
  plan.nb_frag = (image_size + frag_size - 1) / frag_size;
  plan.padding = plan.nb_frag * frag_size - image_size;
  plan.nb_redundancy = nb_redundancy;
  return plan;
}

FragmentedImage fragment_image(std::span<const std::uint8_t> image, std::size_t frag_size,
                               std::size_t nb_redundancy) {
  FragmentedImage out{plan_fragments(image.size(), frag_size, nb_redundancy), {}};
  out.originals.reserve(out.plan.nb_frag);
  for (std::size_t i = 0; i < out.plan.nb_frag; ++i) {
    Fragment f{static_cast<std::uint32_t>(i + 1), Bytes(frag_size, 0)};
    const std::size_t begin = i * frag_size;
    const std::size_t end = std::min(begin + frag_size, image.size());
    std::copy(image.begin() + static_cast<std::ptrdiff_t>(begin), image.begin() + static_cast<std::ptrdiff_t>(end),
              f.payload.begin());
    out.originals.push_back(std::move(f));
  }
  return out;
}

std::uint32_t prbs23(std::uint32_t x) {
  const std::uint32_t b0 = x & 1u;
  const std::uint32_t b1 = (x >> 5) & 1u;
  return (x >> 1) | ((b0 ^ b1) << 22);
}

std::vector<std::uint32_t> parity_line(std::uint32_t n, std::uint32_t m) {
  if (n < 1 || m < 1) throw std::domain_error("parity line needs n >= 1 and m >= 1");
  const std::uint32_t modulus = m + (std::has_single_bit(m) ? 1u : 0u);
  const std::uint32_t wanted = std::max<std::uint32_t>(1, m / 2);
  std::vector<bool> set(m, false);
  std::uint32_t x = 1 + 1001 * n;
  std::uint32_t count = 0;
  while (count < wanted) {
    std::uint32_t r = m;
    while (r >= m) {
      x = prbs23(x);
      r = x % modulus;
    }
    if (!set[r]) {
      set[r] = true;
      ++count;
    }
  }
  std::vector<std::uint32_t> line;
  line.reserve(wanted);
  for (std::uint32_t c = 0; c < m; ++c) {
    if (set[c]) line.push_back(c + 1);
  }
  return line;
}

std::vector<Fragment> encode_redundancy(std::span<const Fragment> originals, std::size_t nb_redundancy) {
  std::vector<Fragment> parity;
  if (originals.empty()) return parity;
  const auto m = static_cast<std::uint32_t>(originals.size());
  const std::size_t frag_size = originals.front().payload.size();
  parity.reserve(nb_redundancy);
  for (std::uint32_t n = 1; n <= nb_redundancy; ++n) {
    Fragment f{m + n, Bytes(frag_size, 0)};
    for (std::uint32_t col : parity_line(n, m)) xor_into(f.payload, originals[col - 1].payload);
    parity.push_back(std::move(f));
  }
  return parity;
}

std::vector<Fragment> encode_all(const FragmentedImage& image) {
  std::vector<Fragment> all = image.originals;
  auto parity = encode_redundancy(image.originals, image.plan.nb_redundancy);
  all.insert(all.end(), std::make_move_iterator(parity.begin()), std::make_move_iterator(parity.end()));
  return all;
}

Decoder::Decoder(std::size_t nb_frag, std::size_t frag_size)
    : nb_frag_(nb_frag),
      frag_size_(frag_size),
      words_((nb_frag + 63) / 64),
      pivot_(nb_frag),
      has_pivot_(nb_frag, false) {
  if (nb_frag == 0 || frag_size == 0) throw std::domain_error("decoder needs nb_frag >= 1 and frag_size >= 1");
}

std::vector<std::uint64_t> Decoder::coefficients(std::uint32_t index) const {
  std::vector<std::uint64_t> bits(words_, 0);
  const auto set = [&bits](std::uint32_t col) { bits[(col - 1) / 64] |= std::uint64_t{1} << ((col - 1) % 64); };
  if (index <= nb_frag_) {
    set(index);
  } else {
    for (std::uint32_t col : parity_line(index - static_cast<std::uint32_t>(nb_frag_),
                                         static_cast<std::uint32_t>(nb_frag_))) {
      set(col);
    }
  }
  return bits;
}

DecodeStatus Decoder::ingest(const Fragment& fragment) {
  if (fragment.payload.size() != frag_size_) {
    throw FormatError("fragment payload is " + std::to_string(fragment.payload.size()) + " bytes, expected " +
                      std::to_string(frag_size_));
  }
  if (fragment.index == 0) throw FormatError("fragment indices start at 1");
  ++received_;
  if (complete()) return DecodeStatus::Complete;

  Row row{coefficients(fragment.index), fragment.payload};
  std::size_t word = 0;
  while (word < words_) {
    if (row.bits[word] == 0) {
      ++word;
      continue;
    }
    const std::size_t col = word * 64 + static_cast<std::size_t>(std::countr_zero(row.bits[word]));
    if (!has_pivot_[col]) {
      pivot_[col] = std::move(row);
      has_pivot_[col] = true;
      ++rank_;
      return status();
    }
    const Row& p = pivot_[col];
    for (std::size_t w = word; w < words_; ++w) row.bits[w] ^= p.bits[w];
    xor_into(row.payload, p.payload);
  }
  return status();  // reduced to zero: linearly dependent
}

Bytes Decoder::finalize(const FragmentPlan& plan) const {
  if (!complete()) throw StateError("decoder is still pending");
  if (plan.nb_frag != nb_frag_ || plan.frag_size != frag_size_) {
    throw FormatError("fragment plan does not match the decoder session");
  }
  // Echelon rows have their pivot as lowest bit; clear higher bits from the last column down.
  std::vector<Bytes> solved(nb_frag_);
  for (std::size_t c = nb_frag_; c-- > 0;) {
    const Row& r = pivot_[c];
    Bytes value = r.payload;
    for (std::size_t w = c / 64; w < words_; ++w) {
      std::uint64_t bits = r.bits[w];
      if (w == c / 64) bits &= ~((std::uint64_t{2} << (c % 64)) - 1);
      while (bits != 0) {
        const std::size_t j = w * 64 + static_cast<std::size_t>(std::countr_zero(bits));
        bits &= bits - 1;
        xor_into(value, solved[j]);
      }
    }
    solved[c] = std::move(value);
  }
  Bytes image;
  image.reserve(nb_frag_ * frag_size_);
  for (const auto& s : solved) image.insert(image.end(), s.begin(), s.end());
  image.resize(plan.image_size());
  return image;
}

}  // namespace fuotasim::fec
