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
#include "grape/matrix.h"

#include <algorithm>
#include <cmath>

#include "grape/error.h"

namespace grape {
namespace {

void RequireSameShape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.SameShape(b)) {
    throw InvalidArgumentError(std::string(op) + ": shape mismatch " +
                               a.ShapeString() + " vs " + b.ShapeString());
  }
}

}  // namespace

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid-argument";
    case ErrorCode::kNumericFailure:
      return "numeric-failure";
    case ErrorCode::kCalibration:
      return "calibration-error";
    case ErrorCode::kConfiguration:
      return "configuration-error";
    case ErrorCode::kFormat:
      return "format-error";
  }
  return "unknown";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw InvalidArgumentError("Matrix: data length " +
                               std::to_string(data_.size()) + " != " +
                               std::to_string(rows_) + "x" +
                               std::to_string(cols_));
  }
}

Matrix Matrix::FromRows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix out(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) {
      throw InvalidArgumentError("Matrix::FromRows: ragged rows");
    }
    std::copy(row.begin(), row.end(), out.row(i++).begin());
  }
  return out;
}

Matrix Matrix::Identity(std::size_t n) {
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

Matrix Matrix::Diagonal(std::span<const double> values) {
  Matrix out(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out(i, i) = values[i];
  return out;
}

Matrix Matrix::Column(std::span<const double> values) {
  return Matrix(values.size(), 1,
                std::vector<double>(values.begin(), values.end()));
}

std::string Matrix::ShapeString() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix& Matrix::operator+=(const Matrix& other) {
  RequireSameShape(*this, other, "operator+=");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  RequireSameShape(*this, other, "operator-=");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

Matrix& Matrix::operator*=(double scale) {
  for (double& x : data_) x *= scale;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double scale, Matrix a) { return a *= scale; }

Matrix MatMul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw InvalidArgumentError("MatMul: inner dimensions differ " +
                               a.ShapeString() + " * " + b.ShapeString());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix MatMulTN(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw InvalidArgumentError("MatMulTN: row counts differ " +
                               a.ShapeString() + " vs " + b.ShapeString());
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto a_row = a.row(k);
    auto b_row = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a_row[i];
      if (aki == 0.0) continue;
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Matrix MatMulNT(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw InvalidArgumentError("MatMulNT: column counts differ " +
                               a.ShapeString() + " vs " + b.ShapeString());
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      out(i, j) = Dot(a.row(i), b.row(j));
    }
  }
  return out;
}

Matrix Transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

Matrix Outer(std::span<const double> u, std::span<const double> v) {
  Matrix out(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < v.size(); ++j) row[j] = u[i] * v[j];
  }
  return out;
}

Matrix SelectColumns(const Matrix& a, std::span<const std::size_t> columns) {
  Matrix out(a.rows(), columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j] >= a.cols()) {
      throw InvalidArgumentError("SelectColumns: column out of range");
    }
    for (std::size_t i = 0; i < a.rows(); ++i) out(i, j) = a(i, columns[j]);
  }
  return out;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgumentError("Dot: length mismatch");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double Norm2(std::span<const double> v) {
  // Scaled accumulation avoids overflow for huge entries.
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double s = 0.0;
  for (double x : v) {
    const double y = x / scale;
    s += y * y;
  }
  return scale * std::sqrt(s);
}

double FrobeniusNorm(const Matrix& a) { return Norm2(a.data()); }

double MaxAbs(const Matrix& a) {
  double m = 0.0;
  for (double x : a.data()) m = std::max(m, std::abs(x));
  return m;
}

double MaxAbsDiff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgumentError("MaxAbsDiff: length mismatch");
  }
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    m = std::max(m, std::abs(a[k] - b[k]));
  }
  return m;
}

double MaxAbsDiff(const Matrix& a, const Matrix& b) {
  RequireSameShape(a, b, "MaxAbsDiff");
  return MaxAbsDiff(a.data(), b.data());
}

bool AllFinite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

void Axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) {
    throw InvalidArgumentError("Axpy: length mismatch");
  }
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

void Scale(double alpha, std::span<double> x) {
  for (double& v : x) v *= alpha;
}

std::vector<double> Concatenate(
    std::initializer_list<std::span<const double>> parts) {
  std::size_t total = 0;
  for (auto p : parts) total += p.size();
  std::vector<double> out;
  out.reserve(total);
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

Matrix GaussianMatrix(RngStream stream, std::size_t m, std::size_t r,
                      double variance) {
  if (m == 0 || r == 0) {
    throw InvalidArgumentError("GaussianMatrix: zero dimension " +
                               std::to_string(m) + "x" + std::to_string(r));
  }
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw InvalidArgumentError("GaussianMatrix: variance must be positive");
  }
  const double sd = std::sqrt(variance);
  Matrix out(m, r);
  for (double& x : out.data()) x = sd * stream.NextNormal();
  return out;
}

}  // namespace grape
