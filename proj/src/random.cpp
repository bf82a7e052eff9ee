#include "sprayer/random.hpp"

namespace sprayer {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) noexcept
{
  const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(prod >> 32);
  lo = static_cast<std::uint32_t>(prod);
}

}  // namespace

Philox4x32::Philox4x32(std::uint64_t key) noexcept
    : key_{static_cast<std::uint32_t>(key),
           static_cast<std::uint32_t>(key >> 32)}
{
}

Philox4x32::Philox4x32(Key key, Counter counter) noexcept
    : key_(key), counter_(counter)
{
}

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) noexcept
{
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

void Philox4x32::increment_counter() noexcept
{
  for (auto& word : counter_) {
    if (++word != 0) {
      return;
    }
  }
}

Philox4x32::result_type Philox4x32::operator()() noexcept
{
  if (used_ == 4) {
    buffer_ = block(counter_, key_);
    increment_counter();
    used_ = 0;
  }
  return buffer_[used_++];
}

std::uint64_t mix64(std::uint64_t x) noexcept
{
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t substream_key(std::uint64_t master_seed,
                            std::uint64_t realization_index,
                            std::uint32_t tire_index) noexcept
{
  std::uint64_t h = mix64(master_seed);
  h = mix64(h ^ realization_index);
  h = mix64(h ^ (static_cast<std::uint64_t>(tire_index) + 1));
  return h;
}

Philox4x32 make_substream(std::uint64_t master_seed,
                          std::uint64_t realization_index,
                          std::uint32_t tire_index) noexcept
{
  return Philox4x32(substream_key(master_seed, realization_index, tire_index));
}

}  // namespace sprayer
