#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fuotasim/common.hpp"

// Fragmentation codec: equal-size chunks plus XOR parity fragments, decoded by
// incremental Gaussian elimination over GF(2).
namespace fuotasim::fec {

using Bytes = std::vector<std::uint8_t>;

struct FragmentPlan {
  std::size_t frag_size = 0;
  std::size_t nb_frag = 0;
  std::size_t padding = 0;
  std::size_t nb_redundancy = 30;

  std::size_t image_size() const { return nb_frag * frag_size - padding; }
  std::size_t total_fragments() const { return nb_frag + nb_redundancy; }

  friend bool operator==(const FragmentPlan&, const FragmentPlan&) = default;
};

struct Fragment {
  std::uint32_t index = 0;  // 1-based; indices above nb_frag are parity fragments
  Bytes payload;

  friend bool operator==(const Fragment&, const Fragment&) = default;
};

struct FragmentedImage {
  FragmentPlan plan;
  std::vector<Fragment> originals;
};

/// Plan for an image of `image_size` bytes without materializing fragments.
FragmentPlan plan_fragments(std::size_t image_size, std::size_t frag_size, std::size_t nb_redundancy = 30);

/// Splits an image into nb_frag = ceil(len / frag_size) fragments, zero-padding the last one.
FragmentedImage fragment_image(std::span<const std::uint8_t> image, std::size_t frag_size,
                               std::size_t nb_redundancy = 30);

/// Original fragment indices (1-based, ascending) XORed into parity fragment `n` of
/// an `m`-fragment block.
///
/// Columns are drawn from a PRBS23 sequence seeded with 1 + 1001 * n; a draw r is
/// x mod (m + [m is a power of two]), rejected while r >= m, and repeated until
/// max(1, m / 2) distinct columns are set.
std::vector<std::uint32_t> parity_line(std::uint32_t n, std::uint32_t m);

std::uint32_t prbs23(std::uint32_t x);

/// Parity fragments nb_frag + 1 .. nb_frag + nb_redundancy.
std::vector<Fragment> encode_redundancy(std::span<const Fragment> originals, std::size_t nb_redundancy);

/// Original fragments followed by parity fragments, ready for transmission.
std::vector<Fragment> encode_all(const FragmentedImage& image);

enum class DecodeStatus { Pending, Complete };

class Decoder {
 public:
  Decoder(std::size_t nb_frag, std::size_t frag_size);

  /// Adds one coded fragment. Duplicate and linearly dependent fragments leave the rank unchanged.
  DecodeStatus ingest(const Fragment& fragment);

  std::size_t rank() const { return rank_; }
  std::size_t nb_frag() const { return nb_frag_; }
  std::size_t frag_size() const { return frag_size_; }
  std::size_t received() const { return received_; }
  DecodeStatus status() const { return rank_ == nb_frag_ ? DecodeStatus::Complete : DecodeStatus::Pending; }
  bool complete() const { return status() == DecodeStatus::Complete; }

  /// Back-substitutes the originals and strips the padding. Throws StateError while pending.
  Bytes finalize(const FragmentPlan& plan) const;

 private:
  struct Row {
    std::vector<std::uint64_t> bits;
    Bytes payload;
  };

  std::vector<std::uint64_t> coefficients(std::uint32_t index) const;

  std::size_t nb_frag_;
  std::size_t frag_size_;
  std::size_t words_;
  std::size_t rank_ = 0;
  std::size_t received_ = 0;
  // pivot_[c] is the stored row whose lowest set column is c.
  std::vector<Row> pivot_;
  std::vector<bool> has_pivot_;
};

}  // namespace fuotasim::fec
