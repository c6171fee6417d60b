#pragma once

#include <array>
#include <cstdint>

namespace cara {

/// Philox4x32-10 counter-based generator. Stateless:
/// the output is a pure function of (counter, key).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      ctr = single_round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t prod0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t prod1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(prod0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(prod0);
    const auto hi1 = static_cast<std::uint32_t>(prod1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(prod1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// What a random draw is used for. Each purpose gets its own sub-stream so
/// that changing how one is consumed leaves the others untouched.
enum class StreamTag : std::uint32_t {
  Arrival = 1,
  Channel = 2,
  ChannelInit = 3,
  Estimate = 4,
  TransmitCoin = 5,
  Reception = 6,
  TieBreak = 7,
};

/// Uniform draws in (0,1) addressed by (seed, purpose, node, slot).
class StreamSource {
 public:
  explicit StreamSource(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  double uniform(StreamTag tag, std::uint32_t node, std::uint64_t slot) const {
    const auto out = Philox4x32::generate({static_cast<std::uint32_t>(slot),
                                           static_cast<std::uint32_t>(slot >> 32), node,
                                           static_cast<std::uint32_t>(tag)},
                                          key_);
    return (static_cast<double>(out[0]) + 0.5) * 0x1.0p-32;
  }

 private:
  Philox4x32::Key key_;
};

}  // namespace cara
