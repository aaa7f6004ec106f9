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
#include "grape/svd.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "grape/error.h"

namespace grape {
namespace {

// Rotates the pair (x, y) <- (c x - s y, s x + c y) element-wise.
void RotatePair(std::span<double> x, std::span<double> y, double c, double s) {
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xk = x[k];
    const double yk = y[k];
    x[k] = c * xk - s * yk;
    y[k] = s * xk + c * yk;
  }
}

// Orthogonalizes rows of `w` in place by one-sided Jacobi rotations,
// accumulating them in `rot` (w_out = rot * w_in).
void RowJacobi(Matrix& w, Matrix& rot, int max_sweeps) {
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();
  const double tol = static_cast<double>(std::max<std::size_t>(n, 4)) *
                     std::numeric_limits<double>::epsilon();
  // Pairs of rows that are both at round-off level relative to ||w|| carry
  // no information; rotating them only churns.
  const double noise_floor = std::pow(
      static_cast<double>(std::max(m, n)) * tol * FrobeniusNorm(w), 2);
  for (int sweep = 0;; ++sweep) {
    if (sweep >= max_sweeps) {
      throw NumericFailureError("TopKSvd: no convergence after " +
                                std::to_string(sweep) + " sweeps");
    }
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        auto wp = w.row(p);
        auto wq = w.row(q);
        const double alpha = Dot(wp, wp);
        const double beta = Dot(wq, wq);
        const double gamma = Dot(wp, wq);
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta) ||
            (alpha < noise_floor && beta < noise_floor)) {
          continue;
        }
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        RotatePair(wp, wq, c, s);
        RotatePair(rot.row(p), rot.row(q), c, s);
      }
    }
    if (!rotated) return;
  }
}

// Replaces column j of `u` (assumed zero) by a unit vector orthogonal to
// columns 0..j-1.
void CompleteColumn(Matrix& u, std::size_t j) {
  const std::size_t m = u.rows();
  for (std::size_t e = 0; e < m; ++e) {
    std::vector<double> x(m, 0.0);
    x[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t c = 0; c < j; ++c) {
        double d = 0.0;
        for (std::size_t i = 0; i < m; ++i) d += u(i, c) * x[i];
        for (std::size_t i = 0; i < m; ++i) x[i] -= d * u(i, c);
      }
    }
    const double norm = Norm2(x);
    if (norm > 0.5) {
      for (std::size_t i = 0; i < m; ++i) u(i, j) = x[i] / norm;
      return;
    }
  }
}

}  // namespace

TruncatedSvd TopKSvd(const Matrix& a, std::size_t k, int max_sweeps) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (k == 0 || k > std::min(m, n)) {
    throw InvalidArgumentError("TopKSvd: k=" + std::to_string(k) +
                               " outside [1, " +
                               std::to_string(std::min(m, n)) + "] for " +
                               a.ShapeString());
  }
  if (!AllFinite(a.data())) {
    throw NumericFailureError("TopKSvd: non-finite input");
  }

  // Rotate along the shorter side: rows of a when m <= n, rows of a^T
  // otherwise. The rotation product is then the exactly orthonormal factor
  // and the rotated rows carry singular value times the other factor.
  const bool wide = m <= n;
  // Work on a / max|a| so squared norms cannot overflow or underflow.
  const double scale = MaxAbs(a);
  Matrix w = wide ? a : Transpose(a);
  if (scale > 0.0) w *= 1.0 / scale;
  Matrix rot = Matrix::Identity(w.rows());
  RowJacobi(w, rot, max_sweeps);

  const std::size_t rows = w.rows();
  const std::size_t cols = w.cols();
  std::vector<double> norms(rows);
  for (std::size_t i = 0; i < rows; ++i) norms[i] = Norm2(w.row(i));
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return norms[x] > norms[y];
  });
  const double negligible = static_cast<double>(std::max(m, n)) *
                            std::numeric_limits<double>::epsilon() *
                            (rows ? norms[order[0]] : 0.0);

  TruncatedSvd out{Matrix(m, k), std::vector<double>(k), Matrix(n, k)};
  Matrix& rotated_side = wide ? out.u : out.v;
  Matrix& scaled_side = wide ? out.v : out.u;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t src = order[j];
    const double sj = norms[src];
    out.s[j] = sj * scale;
    auto rot_row = rot.row(src);
    for (std::size_t i = 0; i < rows; ++i) rotated_side(i, j) = rot_row[i];
    if (sj > negligible) {
      auto w_row = w.row(src);
      for (std::size_t i = 0; i < cols; ++i) scaled_side(i, j) = w_row[i] / sj;
    } else if (!wide) {
      CompleteColumn(out.u, j);
    }
  }
  return out;
}

std::vector<double> SingularValues(const Matrix& a, std::size_t k) {
  return TopKSvd(a, k).s;
}

}  // namespace grape
