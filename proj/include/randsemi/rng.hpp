#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <stdexcept>

namespace randsemi {

// Philox4x32-10 counter-based generator.  A generator is addressed by a
// (key, counter-prefix) pair and produces a deterministic stream that is
// independent of evaluation order across threads: every draw position maps
// to a fixed 128-bit counter value.
class philox4x32 {
 public:
  philox4x32(std::array<uint32_t, 2> key, std::array<uint32_t, 4> counter)
      : key_(key), counter_(counter) {}

  uint32_t next_u32() {
    if (have_ == 0) {
      block_ = round10(counter_, key_);
      advance();
      have_ = 4;
    }
    return block_[4 - have_--];
  }

  uint64_t next_u64() {
    uint64_t lo = next_u32(), hi = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform on [0,1) with 53 random bits.
  double next_u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on [-1,1).
  double next_symmetric() { return 2.0 * next_u01() - 1.0; }

  // Fair sign in {-1,+1}.
  int next_sign() { return (next_u32() & 1u) ? 1 : -1; }

  // Geometric law P{k} = 2^{-k}, k >= 1: one plus the number of trailing
  // zero bits of a uniform word.  (A zero word, probability 2^-64, reads
  // as 65; truncation clamping is handled by the caller.)
  int next_geometric_half() { return std::countr_zero(next_u64()) + 1; }

  // Uniform integer in [0, n).
  uint32_t next_below(uint32_t n) {
    if (n == 0) throw std::invalid_argument("next_below: n must be positive");
    // Rejection to avoid modulo bias.
    uint32_t lim = UINT32_MAX - UINT32_MAX % n;
    uint32_t v;
    do {
      v = next_u32();
    } while (v >= lim);
    return v % n;
  }

 private:
  static constexpr uint32_t kW32A = 0x9E3779B9u;
  static constexpr uint32_t kW32B = 0xBB67AE85u;
  static constexpr uint32_t kM4x32A = 0xD2511F53u;
  static constexpr uint32_t kM4x32B = 0xCD9E8D57u;

  static std::array<uint32_t, 4> round10(std::array<uint32_t, 4> ctr,
                                         std::array<uint32_t, 2> key) {
    for (int r = 0; r < 10; ++r) {
      uint64_t p0 = static_cast<uint64_t>(kM4x32A) * ctr[0];
      uint64_t p1 = static_cast<uint64_t>(kM4x32B) * ctr[2];
      std::array<uint32_t, 4> next = {
          static_cast<uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
          static_cast<uint32_t>(p1),
          static_cast<uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
          static_cast<uint32_t>(p0),
      };
      ctr = next;
      key[0] += kW32A;
      key[1] += kW32B;
    }
    return ctr;
  }

  // Draw positions occupy the low 64 counter bits only; the stream address
  // words above them are never touched.
  void advance() {
    if (++counter_[0] == 0) ++counter_[1];
  }

  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 4> counter_;
  std::array<uint32_t, 4> block_{};
  int have_ = 0;
};

// Stream address: (master seed, experiment, trial, generator).  The master
// seed forms the Philox key; the remaining coordinates are planted in the
// high counter words, leaving the low 64 bits for draw positions within
// the stream.  Any two distinct addresses yield independent streams.
struct rng_stream {
  uint64_t master_seed = 0;
  uint32_t experiment_id = 0;
  uint32_t trial_index = 0;
  uint32_t generator_index = 0;

  philox4x32 engine() const {
    std::array<uint32_t, 2> key = {static_cast<uint32_t>(master_seed),
                                   static_cast<uint32_t>(master_seed >> 32)};
    std::array<uint32_t, 4> counter = {0u, 0u, trial_index,
                                       (experiment_id << 20) | (generator_index & 0xFFFFFu)};
    return philox4x32(key, counter);
  }

  rng_stream with_trial(uint32_t t) const { return {master_seed, experiment_id, t, generator_index}; }
  rng_stream with_generator(uint32_t g) const {
    return {master_seed, experiment_id, trial_index, g};
  }
};

}  // namespace randsemi
