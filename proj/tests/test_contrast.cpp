#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "lorec/contrast.hpp"

using namespace lorec;

namespace {

Vector logits_of(const Vector& probs) {
  Vector l;
  for (double p : probs) l.push_back(std::log(p));
  return l;
}

LogitTriple random_triple(Rng& rng, std::size_t v, bool gate) {
  LogitTriple t;
  t.gate = gate;
  for (std::size_t i = 0; i < v; ++i) {
    t.psi_orig.push_back(3.0 * rng.normal());
    t.psi_text.push_back(3.0 * rng.normal());
    t.psi_aug.push_back(3.0 * rng.normal());
  }
  return t;
}

}  // namespace

TEST(Combine, Examples) {
  LogitTriple t{{2.0, 1.0}, {2.0, 1.0}, {0.0, 0.0}, true};
  EXPECT_EQ(combine_logits(t, 0.5, 1.0), (Vector{4.0, 2.0}));
  EXPECT_EQ(combine_logits(t, 0.0, 0.0), t.psi_orig);
  t.gate = false;
  EXPECT_EQ(combine_logits(t, 7.0, 3.0), t.psi_orig);  // text term vanishes, gate closed
  EXPECT_THROW(combine_logits(t, -1.0, 0.0), ParameterError);
  EXPECT_THROW(combine_logits(t, 0.0, -1.0), ParameterError);
  t.psi_text.pop_back();
  EXPECT_THROW(combine_logits(t, 0.5, 1.0), ShapeError);
}

TEST(Combine, ClosedGateIgnoresAug) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    LogitTriple t = random_triple(rng, 17, false);
    const Vector a = combine_logits(t, 0.5, 1.0);
    for (double& v : t.psi_aug) v = 100.0 * rng.normal();
    ASSERT_EQ(combine_logits(t, 0.5, 1.0), a);
    t.psi_aug.clear();
    ASSERT_EQ(combine_logits(t, 0.5, 1.0), a);
  }
}

TEST(Combine, CommonShiftMovesFinalByTheShift) {
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    LogitTriple t = random_triple(rng, 9, true);
    const double omega = rng.uniform(), beta = 2.0 * rng.uniform(), c = 10.0 * rng.normal();
    const Vector a = combine_logits(t, omega, beta);
    for (auto* v : {&t.psi_orig, &t.psi_text, &t.psi_aug}) {
      for (double& x : *v) x += c;
    }
    const Vector b = combine_logits(t, omega, beta);
    for (std::size_t k = 0; k < a.size(); ++k) ASSERT_NEAR(b[k], a[k] + c, 1e-9);
    ASSERT_EQ(argmax(a), argmax(b));
  }
}

TEST(Plausibility, Examples) {
  const Vector p = logits_of({0.5, 0.3, 0.2});
  EXPECT_EQ(plausibility_set(p, 1.0), (std::vector<std::size_t>{0}));
  EXPECT_EQ(plausibility_set(p, 0.5), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(plausibility_set(logits_of({0.4, 0.4, 0.2}), 1.0), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(plausibility_set(Vector(6, 0.3), 1.0).size(), 6u);
  EXPECT_EQ(plausibility_set(Vector(6, 0.3), 0.01).size(), 6u);
  EXPECT_THROW(plausibility_set(p, 0.0), ParameterError);
  EXPECT_THROW(plausibility_set(p, 1.1), ParameterError);
}

TEST(Plausibility, MonotoneInKappa) {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    Vector l(static_cast<std::size_t>(rng.integer(1, 20)));
    for (double& v : l) v = (i % 5 == 0) ? double(rng.integer(0, 2)) : 2.0 * rng.normal();
    const auto z1 = plausibility_set(l, 1.0), z5 = plausibility_set(l, 0.5), z01 = plausibility_set(l, 0.1);
    ASSERT_TRUE(std::includes(z5.begin(), z5.end(), z1.begin(), z1.end()));
    ASSERT_TRUE(std::includes(z01.begin(), z01.end(), z5.begin(), z5.end()));
    const double top = *std::max_element(l.begin(), l.end());
    std::vector<std::size_t> argmaxes;
    for (std::size_t k = 0; k < l.size(); ++k) {
      if (l[k] == top) argmaxes.push_back(k);
    }
    ASSERT_EQ(z1, argmaxes);
  }
}

TEST(Select, Examples) {
  Rng rng(4);
  const std::vector<std::size_t> single = {3};
  EXPECT_EQ(select_token(Vector{9, 9, 9, 0}, single, DecodeMode::greedy, rng), 3);
  EXPECT_EQ(select_token(Vector{9, 9, 9, 0}, single, DecodeMode::sample, rng), 3);
  const std::vector<std::size_t> z = {0, 2};
  EXPECT_EQ(select_token(Vector{1, 5, 3}, z, DecodeMode::greedy, rng), 2);
  const std::vector<std::size_t> tie = {2, 1};
  EXPECT_EQ(select_token(Vector{0, 4, 4}, tie, DecodeMode::greedy, rng), 1);
  EXPECT_THROW(select_token(Vector{1, 2}, std::vector<std::size_t>{}, DecodeMode::greedy, rng), InternalError);
}

TEST(Select, SampleWithKappaOneAndUniqueArgmaxIsGreedy) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    Vector l(8);
    for (double& v : l) v = rng.normal();
    const auto z = plausibility_set(l, 1.0);
    ASSERT_EQ(z.size(), 1u);
    ASSERT_EQ(select_token(l, z, DecodeMode::sample, rng), select_token(l, z, DecodeMode::greedy, rng));
  }
}

TEST(Select, SampleFollowsRestrictedSoftmax) {
  Rng rng(6);
  const Vector l = {std::log(0.2), std::log(0.5), std::log(0.3)};
  const std::vector<std::size_t> z = {0, 1, 2};
  long counts[3] = {0, 0, 0};
  const long n = 100000;
  for (long i = 0; i < n; ++i) ++counts[select_token(l, z, DecodeMode::sample, rng)];
  EXPECT_NEAR(counts[0] / double(n), 0.2, 0.01);
  EXPECT_NEAR(counts[1] / double(n), 0.5, 0.01);
  EXPECT_NEAR(counts[2] / double(n), 0.3, 0.01);
}
