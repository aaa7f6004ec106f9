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
#ifndef GRAPE_SVD_H_
#define GRAPE_SVD_H_

#include <cstddef>
#include <vector>

#include "grape/matrix.h"

namespace grape {

struct TruncatedSvd {
  Matrix u;               // m x k, orthonormal columns
  std::vector<double> s;  // k values, non-increasing
  Matrix v;               // n x k; columns for zero singular values are zero
};

// Leading k singular triplets of `a` by one-sided Jacobi rotations along
// its shorter side. The left factor always has orthonormal columns: for
// zero singular values of a tall matrix it is completed with unit vectors
// orthogonal to the preceding columns.
//
// Throws InvalidArgumentError if k == 0 or k > min(rows, cols), and
// NumericFailureError if the input is non-finite or the sweeps do not
// converge within `max_sweeps`.
TruncatedSvd TopKSvd(const Matrix& a, std::size_t k, int max_sweeps = 80);

// Top-k singular values of `a`, non-increasing.
std::vector<double> SingularValues(const Matrix& a, std::size_t k);

}  // namespace grape

#endif  // GRAPE_SVD_H_
