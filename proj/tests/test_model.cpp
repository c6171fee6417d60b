#include <gtest/gtest.h>

#include <random>

#include "cara/model.hpp"
#include "fixtures.hpp"

using namespace cara;

TEST(Validate, ReferenceParametersAreValid) {
  EXPECT_TRUE(validate(test::fig1()).ok());
  EXPECT_TRUE(validate(test::fig2()).ok());
  EXPECT_TRUE(validate(test::fig3_setting1()).ok());
  EXPECT_TRUE(validate(test::fig3_setting2()).ok());
}

TEST(Validate, StrictOrderingRejectsEquality) {
  auto s = test::fig1();
  s.reception.q1_solo = 0.5;
  s.reception.q1_with_bad = 0.5;
  const auto r = validate(s);
  ASSERT_FALSE(r.ok());
  ASSERT_EQ(r.issues.size(), 1u);
  EXPECT_EQ(r.issues[0].field, "reception.q1_solo");

  EXPECT_TRUE(validate(s, {.allow_degenerate = true}).ok());
}

TEST(Validate, ReversedOrderingRejectedEvenWhenDegenerateAllowed) {
  auto s = test::fig1();
  s.reception.q2_with_good = 0.3;  // above q2_with_bad = 0.2
  EXPECT_FALSE(validate(s).ok());
  EXPECT_FALSE(validate(s, {.allow_degenerate = true}).ok());
}

TEST(Validate, RangeViolationNamesField) {
  auto s = test::fig1();
  s.node1.pi_good = 1.2;
  const auto r = validate(s);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.issues[0].field, "node1.pi_good");
  EXPECT_NE(r.to_string().find("outside [0,1]"), std::string::npos);
}

TEST(Validate, BoundsToleranceIsTiny) {
  auto s = test::fig1();
  s.node2.eps_bad = 1.0 + 1e-13;
  EXPECT_TRUE(validate(s).ok());
  s.node2.eps_bad = 1.0 + 1e-9;
  EXPECT_FALSE(validate(s).ok());
}

TEST(Validate, ZeroSoloProbabilityRejected) {
  auto s = test::fig1();
  s.reception.q2_solo = s.reception.q2_with_bad = s.reception.q2_with_good = 0.0;
  EXPECT_FALSE(validate(s, {.allow_degenerate = true}).ok());
}

TEST(Validate, IsPureAndDoesNotNormalize) {
  const auto s = test::fig2();
  const auto copy = s;
  EXPECT_EQ(validate(s).to_string(), validate(s).to_string());
  EXPECT_EQ(s, copy);
  EXPECT_DOUBLE_EQ(s.node1.eps_good_bar(), 0.9);
  EXPECT_DOUBLE_EQ(s.node2.pi_bad(), 1.0 - 0.7);
}

TEST(Validate, RequireValidThrowsWithReport) {
  auto s = test::fig1();
  s.node2.eps_good = -0.5;
  try {
    require_valid(s);
    FAIL() << "expected InvalidParams";
  } catch (const InvalidParams& e) {
    EXPECT_EQ(e.report().issues[0].field, "node2.eps_good");
  }
}

TEST(Validate, LcqParams) {
  EXPECT_FALSE(validate(LcqSystemParams{}).ok());
  EXPECT_TRUE(validate(to_lcq(test::fig1())).ok());
  LcqSystemParams bad{{{0.5, 0.1, 0.9}, {1.5, 0.1, 0.9}}};
  EXPECT_EQ(validate(bad).issues.at(0).field, "nodes[1].pi_good");
}

TEST(SwapNodes, IsAnInvolution) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 100; ++k) {
    const auto s = test::random_params(rng);
    EXPECT_EQ(swap_nodes(swap_nodes(s)), s);
    const auto t = swap_nodes(s);
    EXPECT_EQ(t.node1, s.node2);
    EXPECT_EQ(t.reception.q1_with_bad, s.reception.q2_with_bad);
    EXPECT_TRUE(validate(t).ok());
  }
}

TEST(Helpers, PerfectCsiAndLcqProjection) {
  const auto p = with_perfect_csi(test::fig1());
  EXPECT_EQ(p.node1.eps_good, 0.0);
  EXPECT_EQ(p.node2.eps_bad, 0.0);
  EXPECT_EQ(p.reception, test::fig1().reception);

  const auto l = to_lcq(test::fig1());
  ASSERT_EQ(l.size(), 2u);
  EXPECT_DOUBLE_EQ(l.nodes[0].detected_good(), 0.8 * 0.8);
  EXPECT_DOUBLE_EQ(l.nodes[1].q_solo, 0.9);
}
