#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "anchorseg/attention.hpp"
#include "anchorseg/rope.hpp"
#include "support/oracles.hpp"

using namespace anchorseg;

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(Rope, ZeroPositionIsExactIdentity) {
  std::mt19937_64 rng(1);
  const Tensor x = oracle::random_tensor({3, 64}, rng);
  const RotationPlan plan = make_3d_plan({{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}, 64);
  EXPECT_EQ(apply_rope(x, plan), x);
}

TEST(Rope, PreservesNorm) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> pos(-40, 40);
  for (int rep = 0; rep < 100; ++rep) {
    const Tensor x = oracle::random_tensor({4, 48}, rng, -5, 5);
    std::vector<std::array<std::int64_t, 3>> thw;
    for (int i = 0; i < 4; ++i) thw.push_back({pos(rng), pos(rng), pos(rng)});
    const Tensor y = apply_rope(x, make_3d_plan(thw, 48));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(norm(y.row(i)), norm(x.row(i)), 1e-12);
  }
}

TEST(Rope, RelativeShiftInvariance) {
  std::mt19937_64 rng(3);
  for (std::int64_t s : {1, 5, 17}) {
    const Tensor q = oracle::random_tensor({1, 16}, rng), k = oracle::random_tensor({1, 16}, rng);
    for (std::int64_t p : {0, 3, 11})
      for (std::int64_t kp : {0, 2, 29}) {
        const double a = dot(apply_rope(q, make_temporal_plan({p}, 16)).row(0),
                             apply_rope(k, make_temporal_plan({kp}, 16)).row(0));
        const double b = dot(apply_rope(q, make_temporal_plan({p + s}, 16)).row(0),
                             apply_rope(k, make_temporal_plan({kp + s}, 16)).row(0));
        EXPECT_NEAR(a, b, 1e-9);
      }
  }
}

TEST(Rope, MatchesExplicitRotationMatrix) {
  std::mt19937_64 rng(4);
  const Tensor x = oracle::random_tensor({1, 20}, rng);
  const RotationPlan plan = make_3d_plan({{3, -2, 7}}, 20);
  const Tensor y = apply_rope(x, plan);
  // chunk = floor(20/3) -> 6, even; axes at [0,6), [6,12), [12,18); 18,19 pass through
  const auto r = oracle::rotation_matrix(20, {{0, 6, 3}, {6, 6, -2}, {12, 6, 7}}, 10000.0);
  const auto want = oracle::mat_vec(r, {x.row(0).begin(), x.row(0).end()});
  for (std::size_t c = 0; c < 20; ++c) EXPECT_NEAR(y(0, c), want[c], 1e-14);
  EXPECT_EQ(y(0, 18), x(0, 18));
  EXPECT_EQ(y(0, 19), x(0, 19));
}

TEST(TemporalPlan, ExpansionOrderPositions) {
  std::vector<std::int64_t> pos;
  for (int n = 0; n < 2; ++n)
    for (int t = 0; t < 3; ++t) pos.push_back(t);
  const RotationPlan plan = make_temporal_plan(pos, 8);
  ASSERT_EQ(plan.tokens(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(plan.positions[i][0], static_cast<std::int64_t>(i % 3));
}

TEST(TemporalPlan, ThetaValues) {
  const RotationPlan plan = make_temporal_plan({0}, 8, 10000.0);
  const auto th = plan.thetas(0);
  ASSERT_EQ(th.size(), 4u);
  EXPECT_DOUBLE_EQ(th[0], 1.0);
  EXPECT_NEAR(th[1], 1e-1, 1e-16);
  EXPECT_NEAR(th[2], 1e-2, 1e-17);
  EXPECT_NEAR(th[3], 1e-3, 1e-18);
}

TEST(TemporalPlan, SingleFrameIsIdentity) {
  std::mt19937_64 rng(5);
  const Tensor x = oracle::random_tensor({4, 8}, rng);
  EXPECT_EQ(apply_rope(x, make_temporal_plan({0, 0, 0, 0}, 8)), x);
}

TEST(Plan3d, ChunkLayoutForDefaultHeadDim) {
  EXPECT_EQ(axis_chunk_3d(64), 20u);
  const RotationPlan p = make_3d_plan({{1, 1, 1}}, 64);
  EXPECT_EQ(p.chunk_offset(0), 0u);
  EXPECT_EQ(p.chunk_offset(1), 20u);
  EXPECT_EQ(p.chunk_offset(2), 40u);
  EXPECT_THROW(axis_chunk_3d(4), ConfigError);
}

TEST(Plan3d, OriginTokenUnchanged) {
  std::mt19937_64 rng(6);
  const Tensor x = oracle::random_tensor({2, 64}, rng);
  const Tensor y = apply_rope(x, make_3d_plan({{0, 0, 0}, {1, 2, 3}}, 64));
  for (std::size_t c = 0; c < 64; ++c) EXPECT_EQ(y(0, c), x(0, c));
}

TEST(Plan3d, RejectsMismatchedInputs) {
  const RotationPlan p = make_3d_plan({{0, 0, 0}}, 12);
  EXPECT_THROW(apply_rope(Tensor({1, 14}), p), ConfigError);
  EXPECT_THROW(apply_rope(Tensor({2, 12}), p), ConfigError);
  EXPECT_THROW(make_temporal_plan({0}, 7), ConfigError);
}

TEST(Plan3d, QueryKeyLogitsDependOnTimeDifferenceOnly) {
  // temporal query plan aligned onto the time chunk, spatial positions 0
  std::mt19937_64 rng(7);
  const auto p = AttentionParams::seeded(24, 1, 3, "shift");
  const Tensor q = oracle::random_tensor({1, 24}, rng), kv = oracle::random_tensor({1, 24}, rng);
  auto logit = [&](std::int64_t tq, std::int64_t tk) {
    const RotationPlan qp = align_temporal_to_3d(make_temporal_plan({tq}, 24));
    const RotationPlan kp = make_3d_plan({{tk, 5, 2}}, 24);
    return attention_logits(q, kv, p, &qp, &kp)(0, 0, 0);
  };
  for (std::int64_t d : {-3, 0, 4})
    for (std::int64_t s : {1, 6, 20}) EXPECT_NEAR(logit(10 + d, 10), logit(10 + d + s, 10 + s), 1e-9);
}
