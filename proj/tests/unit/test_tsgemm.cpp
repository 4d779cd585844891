#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "nnmd/tsgemm.hpp"

using namespace nnmd;

namespace {

template <typename T>
Matrix<T> random_matrix(std::size_t r, std::size_t c, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix<T> m(r, c);
  for (auto& v : m.values()) v = static_cast<T>(u(gen));
  return m;
}

template <typename T>
Matrix<T> naive(const Matrix<T>& a, const Matrix<T>& b) {
  Matrix<T> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      T s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

}  // namespace

TEST(Gemm, SkinnyAndBlockedPathsMatchNaiveExactly) {
  std::mt19937_64 gen(3);
  for (std::size_t m : {1u, 2u, 3u, 4u, 7u}) {
    const auto a = random_matrix<double>(m, 240, gen);
    const auto b = random_matrix<double>(240, 240, gen);
    const auto ref = naive(a, b);
    Matrix<double> c1(m, 240), c2(m, 240);
    gemm_nn(a, b, c1);
    gemm_nn_general(a, b, c2);
    EXPECT_EQ(c1, ref);
    EXPECT_EQ(c2, ref);
  }
}

TEST(Gemm, AccumulatesIntoOutput) {
  Matrix<double> a(1, 2, std::vector<double>{1, 2});
  Matrix<double> b(2, 2, std::vector<double>{1, 0, 0, 1});
  Matrix<double> c(1, 2, std::vector<double>{10, 20});
  gemm_nn(a, b, c);
  EXPECT_EQ(c, (Matrix<double>(1, 2, std::vector<double>{11, 22})));
}

TEST(Gemm, PrepackedTransposeEqualsNt) {
  std::mt19937_64 gen(4);
  const auto a = random_matrix<float>(2, 33, gen);
  const auto w = random_matrix<float>(17, 33, gen);  // used as A * W^T
  const auto out = gemm_nn(a, prepack_transpose(w));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 17; ++j) {
      float s = 0;
      for (std::size_t k = 0; k < 33; ++k) s += a(i, k) * w(j, k);
      EXPECT_EQ(out(i, j), s);
    }
}

TEST(Gemm, ShapeMismatchIsDimensionError) {
  Matrix<double> a(2, 3), b(4, 5), c(2, 5);
  try {
    gemm_nn(a, b, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Dimension);
  }
  Matrix<double> b2(3, 5), wrong(3, 5);
  EXPECT_THROW(gemm_nn(a, b2, wrong), Error);
  EXPECT_THROW(Matrix<double>(2, 2, std::vector<double>{1, 2, 3}), Error);
}

TEST(Fp16, QuantizationMatchesBinary16) {
  EXPECT_EQ(quantize_fp16(1.0), 1.0);
  EXPECT_EQ(quantize_fp16(0.1), 0.0999755859375);
  EXPECT_EQ(quantize_fp16(65504.0), 65504.0);
  EXPECT_EQ(quantize_fp16(1e6), 65504.0);
  EXPECT_EQ(quantize_fp16(-1e6), -65504.0);
  // Ties to even: 1 + 2^-11 sits halfway between 1 and 1 + 2^-10.
  EXPECT_EQ(quantize_fp16(1.0 + std::ldexp(1.0, -11)), 1.0);
  EXPECT_EQ(quantize_fp16(1.0 + 3 * std::ldexp(1.0, -11)), 1.0 + std::ldexp(1.0, -9));
  // Smallest subnormal and underflow.
  EXPECT_EQ(quantize_fp16(std::ldexp(1.0, -24)), std::ldexp(1.0, -24));
  EXPECT_EQ(quantize_fp16(std::ldexp(1.0, -26)), 0.0);
  EXPECT_TRUE(std::isnan(quantize_fp16(std::numeric_limits<double>::quiet_NaN())));
}

TEST(Fp16, HalfGemmErrorIsBoundedByFp16Precision) {
  std::mt19937_64 gen(9);
  const auto a = random_matrix<double>(1, 64, gen);
  const auto b = random_matrix<double>(64, 32, gen);
  const auto exact = naive(a, b);
  const auto half = gemm_fp16(a, b);
  for (std::size_t j = 0; j < 32; ++j) EXPECT_NEAR(half(0, j), exact(0, j), 64 * 2e-3);
}

TEST(Precision, NamesRoundTrip) {
  for (auto m : {PrecisionMode::Double, PrecisionMode::MixFp32, PrecisionMode::MixFp16})
    EXPECT_EQ(parse_precision(to_string(m)), m);
  EXPECT_THROW(parse_precision("quad"), Error);
}
