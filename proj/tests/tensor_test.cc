// Copyright 2026 The grape-dp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "grape/error.h"
#include "grape/matrix.h"
#include "grape/parallel.h"
#include "grape/rng.h"
#include "grape/svd.h"
#include "gtest/gtest.h"

namespace grape {
namespace {

// Textbook SplitMix64 generator: state += gamma, then finalize.
struct ReferenceSplitMix {
  std::uint64_t state;
  std::uint64_t Next() {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

Matrix RandomMatrix(std::size_t m, std::size_t n, std::uint64_t seed) {
  return GaussianMatrix(RngStream(seed), m, n, 1.0);
}

Matrix NaiveMatMul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  }
  return c;
}

// Eigenvalues of a symmetric matrix by cyclic two-sided Jacobi. Serves as
// an independent oracle: singular values of A are sqrt(eig(A A^T)).
std::vector<double> SymmetricEigenvalues(Matrix s) {
  const std::size_t n = s.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (s(p, q) == 0.0) continue;
        const double theta = (s(q, q) - s(p, p)) / (2.0 * s(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double skp = s(k, p);
          const double skq = s(k, q);
          s(k, p) = c * skp - sn * skq;
          s(k, q) = sn * skp + c * skq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double spk = s(p, k);
          const double sqk = s(q, k);
          s(p, k) = c * spk - sn * sqk;
          s(q, k) = sn * spk + c * sqk;
        }
      }
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = s(i, i);
  std::sort(out.rbegin(), out.rend());
  return out;
}

double OrthonormalityError(const Matrix& u) {
  const Matrix g = MatMulTN(u, u);
  return MaxAbsDiff(g, Matrix::Identity(u.cols()));
}

TEST(RngStreamTest, MatchesReferenceSplitMixForSeedZero) {
  RngStream rng(0);
  EXPECT_EQ(rng.NextU64(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng.NextU64(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(rng.NextU64(), 0x06C45D188009454FULL);
  EXPECT_EQ(rng.NextU64(), 0xF88BB8A8724C81ECULL);
}

TEST(RngStreamTest, MatchesSequentialGeneratorForArbitrarySeeds) {
  for (std::uint64_t seed : {1ULL, 42ULL, 0xDEADBEEFULL, ~0ULL}) {
    RngStream rng(seed);
    ReferenceSplitMix ref{seed};
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(rng.NextU64(), ref.Next());
  }
}

TEST(RngStreamTest, CopiesReplayAndSubstreamsDoNotAdvance) {
  RngStream a(9);
  a.NextU64();
  RngStream b = a;
  const RngStream sub = a.Substream(3);
  EXPECT_EQ(a, b);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.NextNormal(), b.NextNormal());
  EXPECT_NE(a.Substream(3).NextU64(), a.Substream(4).NextU64());
  EXPECT_EQ(sub.counter(), 0u);
}

TEST(RngStreamTest, UniformStaysInUnitInterval) {
  RngStream rng(5);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.NextUniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LE(u, 1.0);
  }
}

TEST(RngStreamTest, NextBelowIsInRangeAndRoughlyUniform) {
  RngStream rng(6);
  std::vector<int> counts(7, 0);
  const int draws = 70000;
  for (int i = 0; i < draws; ++i) {
    const std::uint64_t x = rng.NextBelow(7);
    ASSERT_LT(x, 7u);
    ++counts[x];
  }
  // Each count is Binomial(70000, 1/7): sd about 92.
  for (int c : counts) EXPECT_NEAR(c, draws / 7, 500);
}

TEST(RngStreamTest, NormalMomentsMatchStandardNormal) {
  RngStream rng(7);
  const int n = 400000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.NextNormal();
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
  EXPECT_NEAR(s4 / n, 3.0, 0.06);
}

TEST(RngStreamTest, NormalConsumesTwoDraws) {
  RngStream rng(8);
  rng.NextNormal();
  EXPECT_EQ(rng.counter(), 2u);
}

TEST(GaussianMatrixTest, VarianceAndDeterminism) {
  const Matrix a = GaussianMatrix(RngStream(3), 400, 50, 0.25);
  EXPECT_EQ(a, GaussianMatrix(RngStream(3), 400, 50, 0.25));
  double s2 = 0.0;
  for (double x : a.data()) s2 += x * x;
  EXPECT_NEAR(s2 / a.size(), 0.25, 0.01);
}

TEST(GaussianMatrixTest, RejectsDegenerateArguments) {
  EXPECT_THROW(GaussianMatrix(RngStream(1), 0, 3, 1.0), InvalidArgumentError);
  EXPECT_THROW(GaussianMatrix(RngStream(1), 3, 0, 1.0), InvalidArgumentError);
  EXPECT_THROW(GaussianMatrix(RngStream(1), 3, 3, 0.0), InvalidArgumentError);
}

TEST(MatrixTest, ProductsMatchNaiveOracle) {
  const Matrix a = RandomMatrix(7, 5, 1);
  const Matrix b = RandomMatrix(5, 4, 2);
  const Matrix c = RandomMatrix(7, 4, 3);
  EXPECT_LE(MaxAbsDiff(MatMul(a, b), NaiveMatMul(a, b)), 1e-12);
  EXPECT_LE(MaxAbsDiff(MatMulTN(a, c), NaiveMatMul(Transpose(a), c)), 1e-12);
  EXPECT_LE(MaxAbsDiff(MatMulNT(b, RandomMatrix(6, 4, 4)),
                       NaiveMatMul(b, Transpose(RandomMatrix(6, 4, 4)))),
            1e-12);
}

TEST(MatrixTest, ShapeMismatchesThrow) {
  EXPECT_THROW(MatMul(Matrix(2, 3), Matrix(2, 3)), InvalidArgumentError);
  EXPECT_THROW(Matrix(2, 2, std::vector<double>(3)), InvalidArgumentError);
  Matrix a(2, 2);
  EXPECT_THROW(a += Matrix(2, 3), InvalidArgumentError);
}

TEST(MatrixTest, NormsAndHelpers) {
  const std::vector<double> v = {3.0, 4.0};
  EXPECT_DOUBLE_EQ(Norm2(v), 5.0);
  const std::vector<double> big = {1e200, 1e200};
  EXPECT_DOUBLE_EQ(Norm2(big), std::sqrt(2.0) * 1e200);
  EXPECT_DOUBLE_EQ(FrobeniusNorm(Matrix::FromRows({{1, 2}, {2, 4}})), 5.0);
  EXPECT_FALSE(AllFinite(std::vector<double>{1.0, NAN}));
  EXPECT_EQ(Outer(v, v), Matrix::FromRows({{9, 12}, {12, 16}}));
}

TEST(TopKSvdTest, KnownTwoByTwo) {
  // A^T A = [[25, 20], [20, 25]] has eigenvalues 45 and 5.
  const Matrix a = Matrix::FromRows({{3, 0}, {4, 5}});
  const TruncatedSvd svd = TopKSvd(a, 2);
  EXPECT_NEAR(svd.s[0], std::sqrt(45.0), 1e-12);
  EXPECT_NEAR(svd.s[1], std::sqrt(5.0), 1e-12);
}

TEST(TopKSvdTest, RankOneMatrix) {
  const Matrix a = Matrix::FromRows({{1, 2}, {2, 4}});
  const TruncatedSvd svd = TopKSvd(a, 1);
  EXPECT_NEAR(svd.s[0], 5.0, 1e-12);
  EXPECT_NEAR(std::abs(svd.u(0, 0)), 1.0 / std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(std::abs(svd.u(1, 0)), 2.0 / std::sqrt(5.0), 1e-12);
}

TEST(TopKSvdTest, AgreesWithEigenvalueOracleOnRandomMatrices) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(seed);
    const std::size_t m = 2 + rng.NextBelow(12);
    const std::size_t n = 2 + rng.NextBelow(12);
    const Matrix a = RandomMatrix(m, n, seed + 100);
    const std::size_t k = std::min(m, n);
    const TruncatedSvd svd = TopKSvd(a, k);
    const std::vector<double> eig = SymmetricEigenvalues(MatMulNT(a, a));
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_NEAR(svd.s[i], std::sqrt(std::max(eig[i], 0.0)),
                  1e-9 * std::max(1.0, svd.s[0]))
          << "seed " << seed << " index " << i;
    }
    EXPECT_LE(OrthonormalityError(svd.u), 1e-10);
    Matrix recon(m, n);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t c = 0; c < k; ++c) {
          recon(i, j) += svd.u(i, c) * svd.s[c] * svd.v(j, c);
        }
      }
    }
    EXPECT_LE(MaxAbsDiff(recon, a), 1e-9);
  }
}

TEST(TopKSvdTest, TruncationKeepsLeadingTriplets) {
  const Matrix a = RandomMatrix(30, 20, 11);
  const TruncatedSvd full = TopKSvd(a, 20);
  const TruncatedSvd top = TopKSvd(a, 5);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(top.s[i], full.s[i], 1e-10);
  EXPECT_TRUE(std::is_sorted(full.s.rbegin(), full.s.rend()));
}

TEST(TopKSvdTest, RankDeficientInputKeepsOrthonormalU) {
  const Matrix low = MatMul(RandomMatrix(12, 2, 1), RandomMatrix(2, 9, 2));
  const TruncatedSvd svd = TopKSvd(low, 6);
  EXPECT_LE(OrthonormalityError(svd.u), 1e-10);
  for (std::size_t i = 2; i < 6; ++i) EXPECT_LE(svd.s[i], 1e-10 * svd.s[0]);
}

TEST(TopKSvdTest, ExtremeScalesNeitherOverflowNorUnderflow) {
  const Matrix a = RandomMatrix(9, 6, 41);
  const std::vector<double> base = SingularValues(a, 6);
  for (double scale : {1e300, 1e-300}) {
    const std::vector<double> s = SingularValues(scale * a, 6);
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_NEAR(s[i] / scale, base[i], 1e-12 * base[0]);
    }
  }
}

TEST(TopKSvdTest, ZeroMatrix) {
  const TruncatedSvd svd = TopKSvd(Matrix(4, 3), 2);
  EXPECT_EQ(svd.s, std::vector<double>(2, 0.0));
  EXPECT_LE(OrthonormalityError(svd.u), 1e-12);
}

TEST(TopKSvdTest, Errors) {
  EXPECT_THROW(TopKSvd(Matrix(3, 4, 1.0), 0), InvalidArgumentError);
  EXPECT_THROW(TopKSvd(Matrix(3, 4, 1.0), 4), InvalidArgumentError);
  Matrix bad(2, 2, 1.0);
  bad(0, 1) = NAN;
  EXPECT_THROW(TopKSvd(bad, 1), NumericFailureError);
  bad(0, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(TopKSvd(bad, 1), NumericFailureError);
}

TEST(ParallelForTest, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  ParallelFor(hits.size(), std::size_t{1} << 30,
              [&](std::size_t i) { hits[i].fetch_add(1); });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelForTest, PropagatesExceptions) {
  EXPECT_THROW(ParallelFor(100, std::size_t{1} << 30,
                           [](std::size_t i) {
                             if (i == 57) throw std::runtime_error("boom");
                           }),
               std::runtime_error);
}

}  // namespace
}  // namespace grape
