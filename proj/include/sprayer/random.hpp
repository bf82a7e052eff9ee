#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace sprayer {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The 64-bit key selects an independent stream; the 128-bit counter walks
/// it. Satisfies UniformRandomBitGenerator with 32-bit output.
class Philox4x32
{
public:
  using result_type = std::uint32_t;
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox4x32(std::uint64_t key = 0) noexcept;
  Philox4x32(Key key, Counter counter) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept
  {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  /// Ten-round block function.
  static Counter block(Counter ctr, Key key) noexcept;

  const Key& key() const noexcept { return key_; }

private:
  void increment_counter() noexcept;

  Key key_;
  Counter counter_{};
  Counter buffer_{};
  unsigned used_ = 4;
};

/// SplitMix64 finalizer (bijective 64-bit mixer).
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Stream key for one tire of one Monte Carlo realization.
std::uint64_t substream_key(std::uint64_t master_seed,
                            std::uint64_t realization_index,
                            std::uint32_t tire_index) noexcept;

/// Generator positioned at the start of the (seed, realization, tire) stream.
Philox4x32 make_substream(std::uint64_t master_seed,
                          std::uint64_t realization_index,
                          std::uint32_t tire_index) noexcept;

}  // namespace sprayer
