#include "stekit/rng.hpp"

#include <gtest/gtest.h>

namespace stekit {
namespace {

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, SameSeedBitwiseIdenticalTensors) {
  Rng a(7), b(7);
  const auto ta = a.uniform_tensor<float>({16, 16}, -1.0, 1.0);
  const auto tb = b.uniform_tensor<float>({16, 16}, -1.0, 1.0);
  EXPECT_EQ(ta, tb);
}

TEST(Rng, DifferentSeedsDiffer) {
  Rng a(1), b(2);
  bool any_diff = false;
  for (int i = 0; i < 16; ++i) any_diff |= (a.next_u64() != b.next_u64());
  EXPECT_TRUE(any_diff);
}

TEST(Rng, UniformStaysInRange) {
  Rng rng(99);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform(-0.25, 0.75);
    EXPECT_GE(u, -0.25);
    EXPECT_LT(u, 0.75);
  }
}

TEST(Rng, ForkIsPositionIndependent) {
  Rng a(5), b(5);
  b.next_u64();  // advance the parent
  b.next_u64();
  Rng fa = a.fork(3), fb = b.fork(3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(fa.next_u64(), fb.next_u64());
}

TEST(Rng, ForkStreamsDiffer) {
  Rng root(5);
  Rng s0 = root.fork(0), s1 = root.fork(1);
  bool any_diff = false;
  for (int i = 0; i < 16; ++i) any_diff |= (s0.next_u64() != s1.next_u64());
  EXPECT_TRUE(any_diff);
}

}  // namespace
}  // namespace stekit
