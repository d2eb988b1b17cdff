#include <gtest/gtest.h>

#include "lorec/harness/oracle_check.hpp"

using namespace lorec::harness;

TEST(OracleCheck, ShippedSuitePasses) {
  const auto r = oracle_check(OracleOptions{});
  EXPECT_TRUE(r.passed()) << to_text(r);
  EXPECT_GE(r.scenarios, 20);
  EXPECT_GT(r.armed_steps, 0);
  EXPECT_GT(r.unarmed_steps, 0);
  EXPECT_GT(r.gate_open, 0);
  EXPECT_GT(r.gate_closed, 0);
  for (const auto& row : r.rows) EXPECT_LE(row.max_deviation, 1e-6) << row.name;
}

TEST(OracleCheck, OtherSeedsPass) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    OracleOptions o;
    o.seed = seed;
    EXPECT_TRUE(oracle_check(o).passed()) << seed;
  }
}

TEST(OracleCheck, MutationIsCaught) {
  OracleOptions o;
  o.eta_mutation = 0.05;
  const auto r = oracle_check(o);
  EXPECT_FALSE(r.passed());
  bool engine_failed = false, rectify_failed = false;
  for (const auto& row : r.rows) {
    engine_failed = engine_failed || (row.name == "engine_logits" && !row.passed());
    rectify_failed = rectify_failed || (row.name == "rectify" && !row.passed());
  }
  EXPECT_TRUE(engine_failed);
  EXPECT_TRUE(rectify_failed);
}

TEST(OracleCheck, EmptySelectionFails) {
  OracleOptions o;
  o.suites.clear();
  const auto r = oracle_check(o);
  EXPECT_FALSE(r.passed());
  EXPECT_EQ(r.failure, "no checks run");
  EXPECT_NE(to_text(r).find("no checks run"), std::string::npos);
  o.suites = {"engine"};
  o.scenarios = 0;
  EXPECT_FALSE(oracle_check(o).passed());
  o.suites = {"telepathy"};
  EXPECT_FALSE(oracle_check(o).passed());
}

TEST(OracleCheck, SingleSuite) {
  OracleOptions o;
  o.suites = {"contrast"};
  const auto r = oracle_check(o);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].name, "combine");
  EXPECT_TRUE(r.passed());
}
