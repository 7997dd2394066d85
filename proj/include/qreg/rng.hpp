#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace qreg::rng {

/// Philox4x32-10 block function (Salmon et al., SC'11): a keyed bijection on 128-bit counters.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// 64-bit stream key.
struct Key {
  std::uint64_t value = 0;
  friend bool operator==(Key, Key) = default;
};

/// Component tags used when deriving keys. Stable values: changing them changes results.
enum class Tag : std::uint64_t {
  sct = 1,
  dense_cauchy = 2,
  row_norm_projection = 3,
  cond_sample = 4,
  final_sample = 5,
  retry = 6,
  trial = 7,
  gen_xstar = 8,
  gen_noise = 9,
  gen_corrupt = 10,
  gen_design = 11,
  directions = 12,
  kappa_surrogate = 13,
};

/// Key derived from a parent key, a tag and up to two indices.
Key derive(Key parent, Tag tag, std::uint64_t a = 0, std::uint64_t b = 0);
inline Key seed_key(std::uint64_t seed) { return Key{seed}; }

/// Counter-based stream. Draw k of sequence q is philox((k, q), key): a row-indexed
/// consumer uses one sequence per row so results never depend on how rows are batched.
class Stream {
 public:
  explicit Stream(Key key, std::uint64_t sequence = 0) : key_(key), sequence_(sequence) {}
  explicit Stream(std::uint64_t seed) : Stream(Key{seed}) {}

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();
  /// Key for an independent child stream; advances this stream.
  Key fork();

  Key key() const { return key_; }
  std::uint64_t sequence() const { return sequence_; }

 private:
  Key key_;
  std::uint64_t sequence_ = 0;
  std::uint64_t counter_ = 0;
  std::uint64_t buffered_ = 0;
  bool has_buffered_ = false;
};

/// Maps 64 random bits to (0, 1): ((x >> 12) + 0.5) * 2^-52, exact in double.
inline double to_open_unit(std::uint64_t x) {
  return (static_cast<double>(x >> 12) + 0.5) * 0x1.0p-52;
}

}  // namespace qreg::rng
