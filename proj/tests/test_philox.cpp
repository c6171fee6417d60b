#include <gtest/gtest.h>

#include <cmath>

#include "cara/philox.hpp"

using cara::Philox4x32;
using cara::StreamSource;
using cara::StreamTag;

TEST(Philox, KnownAnswerZero) {
  constexpr auto out = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
  const auto out = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                        {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
  const auto out = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                        {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out[0], 0xd16cfe09u);
  EXPECT_EQ(out[1], 0x94fdccebu);
  EXPECT_EQ(out[2], 0x5001e420u);
  EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(Streams, OpenUnitInterval) {
  StreamSource src(42);
  for (std::uint64_t t = 0; t < 10000; ++t) {
    const double u = src.uniform(StreamTag::Arrival, 0, t);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Streams, AddressedDraws) {
  StreamSource a(7), b(7), c(8);
  EXPECT_EQ(a.uniform(StreamTag::Channel, 1, 99), b.uniform(StreamTag::Channel, 1, 99));
  EXPECT_NE(a.uniform(StreamTag::Channel, 1, 99), c.uniform(StreamTag::Channel, 1, 99));
  EXPECT_NE(a.uniform(StreamTag::Channel, 1, 99), a.uniform(StreamTag::Estimate, 1, 99));
  EXPECT_NE(a.uniform(StreamTag::Channel, 1, 99), a.uniform(StreamTag::Channel, 0, 99));
  EXPECT_NE(a.uniform(StreamTag::Channel, 1, 99), a.uniform(StreamTag::Channel, 1, 1ull << 33 | 99));
}

TEST(Streams, RoughlyUniform) {
  StreamSource src(3);
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int t = 0; t < n; ++t) {
    const double u = src.uniform(StreamTag::Reception, 2, t);
    sum += u;
    sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12, 2e-3);
}
