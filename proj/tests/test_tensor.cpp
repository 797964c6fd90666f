#include "stekit/tensor.hpp"

#include <gtest/gtest.h>

#include "stekit/rng.hpp"
#include "test_util.hpp"

namespace stekit {
namespace {

TEST(Tensor, MatmulIdentity) {
  Tensor<double> eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0;
  Rng rng(7);
  const auto b = test::random_tensor<double>(rng, {3, 5});
  EXPECT_EQ(matmul(eye, b), b);
}

TEST(Tensor, MatmulHandValues) {
  const Tensor<double> a({2, 2}, {1, 2, 3, 4});
  const Tensor<double> b({2, 1}, {1, 1});
  const Tensor<double> expected({2, 1}, {3, 7});
  EXPECT_EQ(matmul(a, b), expected);
}

TEST(Tensor, MatmulMatchesTripleLoopOracle) {
  Rng rng(11);
  const auto a = test::random_tensor<double>(rng, {5, 4});
  const auto b = test::random_tensor<double>(rng, {4, 3});
  EXPECT_LE(max_abs_diff(matmul(a, b), test::matmul_oracle(a, b)), 1e-12);
}

TEST(Tensor, MatmulShapeMismatchNamesBothShapes) {
  const Tensor<double> a({2, 3});
  const Tensor<double> b({2, 3});
  try {
    matmul(a, b);
    FAIL() << "expected dim_error";
  } catch (const dim_error& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("vs"), std::string::npos);
  }
}

TEST(Tensor, ConcatAlongLastAxisDoublesWidth) {
  Rng rng(3);
  const std::size_t p = 4, d = 6;
  const auto a = test::random_tensor<double>(rng, {1, p, d});
  const auto b = test::random_tensor<double>(rng, {1, p, d});
  const auto cat = concat<double>({a, b}, 2);
  EXPECT_EQ(cat.shape(), (Shape{1, p, 2 * d}));
  EXPECT_EQ(cat(0, 2, 1), a(0, 2, 1));
  EXPECT_EQ(cat(0, 2, d + 1), b(0, 2, 1));
}

TEST(Tensor, ConcatSingleOperandIsIdentity) {
  Rng rng(5);
  const auto x = test::random_tensor<double>(rng, {2, 3, 4});
  EXPECT_EQ(concat<double>({x}, 1), x);
}

TEST(Tensor, ConcatRejectsIncompatibleShapes) {
  const Tensor<double> a({2, 3});
  const Tensor<double> b({2, 4});
  EXPECT_THROW(concat<double>({a, b}, 0), dim_error);
}

TEST(Tensor, SplitThenConcatRoundTripsBitwise) {
  Rng rng(13);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const auto x = test::random_tensor<double>(rng, {4, 6, 2});
    std::vector<std::size_t> sizes;
    switch (axis) {
      case 0: sizes = {1, 2, 1}; break;
      case 1: sizes = {3, 1, 2}; break;
      default: sizes = {1, 1}; break;
    }
    const auto parts = split(x, axis, sizes);
    EXPECT_EQ(concat(parts, axis), x) << "axis " << axis;
  }
}

TEST(Tensor, ConcatCopiesInArgumentOrder) {
  const Tensor<double> a({1, 2}, {1, 2});
  const Tensor<double> b({2, 2}, {3, 4, 5, 6});
  const Tensor<double> expected({3, 2}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(concat<double>({a, b}, 0), expected);
}

TEST(Tensor, TransposesInvert) {
  Rng rng(17);
  const auto m = test::random_tensor<double>(rng, {3, 5});
  EXPECT_EQ(transpose(transpose(m)), m);
  const auto t3 = test::random_tensor<double>(rng, {2, 3, 4});
  EXPECT_EQ(transpose01(transpose01(t3)), t3);
}

TEST(Tensor, MeanRowsIsRowPermutationInvariant) {
  Rng rng(19);
  const auto x = test::random_tensor<double>(rng, {6, 4});
  // reverse the rows
  std::vector<Tensor<double>> rows;
  for (std::size_t i = 6; i-- > 0;) rows.push_back(slice(x, 0, i, 1));
  const auto reversed = concat(rows, 0);
  EXPECT_EQ(mean_rows(x), mean_rows(reversed));
}

TEST(Tensor, OpsOnFiniteInputsStayFinite) {
  Rng rng(23);
  const auto a = test::random_tensor<double>(rng, {4, 4}, -100.0, 100.0);
  const auto b = test::random_tensor<double>(rng, {4, 4}, -100.0, 100.0);
  EXPECT_TRUE(matmul(a, b).all_finite());
  EXPECT_TRUE(add(a, b).all_finite());
  EXPECT_TRUE(mul(a, b).all_finite());
  EXPECT_TRUE(tanh_elem(a).all_finite());
  EXPECT_TRUE(log_softmax(slice(a, 0, 0, 1)).all_finite());
  EXPECT_TRUE(mean_rows(a).all_finite());
}

TEST(Tensor, ZeroExtentRejected) {
  EXPECT_THROW(Tensor<double>({2, 0, 3}), dim_error);
}

TEST(Tensor, ReshapePreservesData) {
  Rng rng(29);
  const auto x = test::random_tensor<double>(rng, {2, 6});
  const auto r = reshape(x, {3, 4});
  EXPECT_EQ(r.values(), x.values());
  EXPECT_THROW(reshape(x, {5, 2}), dim_error);
}

TEST(Tensor, LogSoftmaxOfZerosIsUniform) {
  const Tensor<double> zeros({5});
  const auto ls = log_softmax(zeros);
  for (std::size_t i = 0; i < 5; ++i)
    EXPECT_NEAR(ls[i], -std::log(5.0), 1e-15);
}

}  // namespace
}  // namespace stekit
