#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace synermix {

/// Seeded random stream. Every distribution is built here from raw engine
/// output so draws are identical across standard-library implementations.
///
/// Streams are never shared between consumers; use `derive` to obtain an
/// independent stream keyed by (seed, stream id).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  /// Independent stream for a sub-consumer. Depends only on this stream's
  /// seed/id and `child`, not on how many draws were already made.
  RngStream derive(std::uint64_t child) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t draws() const { return draws_; }

  std::uint64_t next_u64();

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double gamma(double shape);
  /// Beta(a, b) as X/(X+Y) with X~Gamma(a), Y~Gamma(b). Beta(1,1) consumes a
  /// single uniform draw.
  double beta(double a, double b);

  /// Uniform integer in [0, n). Consumes nothing when n == 1.
  std::size_t index(std::size_t n);
  /// Fisher-Yates shuffle of 0..n-1. Fixed points are allowed.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
};

}  // namespace synermix
