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
#include "grape/dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "grape/error.h"
#include "grape/rng.h"

namespace grape {
namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::uint32_t ReadBigEndian32(std::span<const std::uint8_t> bytes,
                              std::size_t offset, const std::string& what) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(what + ": truncated header", offset);
  }
  return (std::uint32_t{bytes[offset]} << 24) |
         (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) |
         std::uint32_t{bytes[offset + 3]};
}

std::vector<std::uint8_t> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigurationError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset Empty(std::size_t n, std::size_t d, std::size_t classes) {
  Dataset out;
  out.features = Matrix(n, d);
  out.labels.assign(n, 0);
  out.num_classes = classes;
  return out;
}

}  // namespace

void MinMaxScale(Matrix& x) {
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double lo = x(0, j);
    double hi = x(0, j);
    for (std::size_t i = 1; i < x.rows(); ++i) {
      lo = std::min(lo, x(i, j));
      hi = std::max(hi, x(i, j));
    }
    const double range = hi - lo;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      x(i, j) = range > 0.0 ? (x(i, j) - lo) / range : 0.0;
    }
  }
}

Dataset SyntheticGaussian(std::size_t n, std::size_t d,
                          std::size_t num_classes, std::uint64_t seed) {
  if (n == 0 || d == 0 || num_classes < 2) {
    throw InvalidArgumentError(
        "synthetic-gaussian needs n >= 1, d >= 1 and at least 2 classes");
  }
  RngStream rng(seed);
  RngStream teacher_rng = rng.Substream(0);
  RngStream data_rng = rng.Substream(1);
  const Matrix teacher = GaussianMatrix(teacher_rng, d, num_classes, 1.0);
  Dataset out = Empty(n, d, num_classes);
  for (double& v : out.features.data()) v = data_rng.NextNormal();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_score = -INFINITY;
    for (std::size_t c = 0; c < num_classes; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += out.features(i, k) * teacher(k, c);
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    out.labels[i] = best;
  }
  MinMaxScale(out.features);
  return out;
}

Dataset TwoClassMargin(std::size_t n, std::size_t d, double margin,
                       std::uint64_t seed) {
  if (n == 0 || d == 0) {
    throw InvalidArgumentError("two-class-margin needs n >= 1 and d >= 1");
  }
  if (!(margin >= 0.0)) {
    throw InvalidArgumentError("two-class-margin: margin must be >= 0");
  }
  RngStream rng(seed);
  RngStream dir_rng = rng.Substream(0);
  RngStream data_rng = rng.Substream(1);
  std::vector<double> w(d);
  for (double& v : w) v = dir_rng.NextNormal();
  const double norm = Norm2(w);
  for (double& v : w) v /= norm;

  Dataset out = Empty(n, d, 2);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.features.row(i);
    for (double& v : row) v = data_rng.NextNormal();
    const std::size_t label = data_rng.NextBelow(2);
    const double sign = label == 1 ? 1.0 : -1.0;
    const double along =
        sign * (0.5 * margin + std::abs(data_rng.NextNormal()));
    const double current = Dot(row, w);
    for (std::size_t k = 0; k < d; ++k) row[k] += (along - current) * w[k];
    out.labels[i] = label;
  }
  MinMaxScale(out.features);
  return out;
}

Dataset ParseIdx(std::span<const std::uint8_t> images,
                 std::span<const std::uint8_t> labels) {
  const std::uint32_t image_magic = ReadBigEndian32(images, 0, "IDX images");
  if (image_magic != kIdxImagesMagic) {
    throw FormatError("IDX images: bad magic number " +
                          std::to_string(image_magic),
                      0);
  }
  const std::uint32_t count = ReadBigEndian32(images, 4, "IDX images");
  const std::uint32_t rows = ReadBigEndian32(images, 8, "IDX images");
  const std::uint32_t cols = ReadBigEndian32(images, 12, "IDX images");
  const std::size_t pixels = std::size_t{rows} * cols;
  const std::size_t need = 16 + std::size_t{count} * pixels;
  if (images.size() < need) {
    throw FormatError("IDX images: truncated pixel data, expected " +
                          std::to_string(need) + " bytes",
                      images.size());
  }

  const std::uint32_t label_magic = ReadBigEndian32(labels, 0, "IDX labels");
  if (label_magic != kIdxLabelsMagic) {
    throw FormatError("IDX labels: bad magic number " +
                          std::to_string(label_magic),
                      0);
  }
  const std::uint32_t label_count = ReadBigEndian32(labels, 4, "IDX labels");
  if (label_count != count) {
    throw FormatError("IDX labels: count " + std::to_string(label_count) +
                          " does not match " + std::to_string(count) +
                          " images",
                      4);
  }
  if (labels.size() < 8 + std::size_t{count}) {
    throw FormatError("IDX labels: truncated label data", labels.size());
  }

  Dataset out = Empty(count, pixels, 0);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < pixels; ++k) {
      out.features(i, k) = images[16 + i * pixels + k] / 255.0;
    }
    out.labels[i] = labels[8 + i];
    out.num_classes = std::max(out.num_classes, out.labels[i] + 1);
  }
  return out;
}

Dataset LoadIdx(const std::string& images_path,
                const std::string& labels_path) {
  const std::vector<std::uint8_t> images = ReadFile(images_path);
  const std::vector<std::uint8_t> labels = ReadFile(labels_path);
  return ParseIdx(images, labels);
}

std::vector<std::size_t> Permutation(std::size_t n, RngStream& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::swap(p[i - 1], p[rng.NextBelow(i)]);
  }
  return p;
}

Dataset Subset(const Dataset& data, std::span<const std::size_t> rows) {
  Dataset out = Empty(rows.size(), data.dim(), data.num_classes);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= data.size()) {
      throw InvalidArgumentError("Subset: row out of range");
    }
    std::ranges::copy(data.features.row(rows[i]), out.features.row(i).begin());
    out.labels[i] = data.labels[rows[i]];
  }
  return out;
}

std::pair<Dataset, Dataset> SplitDataset(const Dataset& data, double fraction,
                                         std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw InvalidArgumentError("split fraction must lie in [0, 1)");
  }
  RngStream rng(seed);
  const std::vector<std::size_t> p = Permutation(data.size(), rng);
  const auto held = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(data.size())));
  const std::span<const std::size_t> all(p);
  return {Subset(data, all.first(data.size() - held)),
          Subset(data, all.last(held))};
}

Batch ToBatch(const Dataset& data, const ModelSpec& spec,
              std::span<const std::size_t> rows) {
  Batch b;
  b.inputs = Matrix(rows.size(), data.dim());
  const bool one_hot = spec.loss == Loss::kSquaredError;
  b.targets = Matrix(rows.size(), one_hot ? spec.output_dim() : 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::ranges::copy(data.features.row(rows[i]), b.inputs.row(i).begin());
    const std::size_t y = data.labels[rows[i]];
    if (one_hot) {
      if (y >= spec.output_dim()) {
        throw ConfigurationError("label " + std::to_string(y) +
                                 " does not fit " +
                                 std::to_string(spec.output_dim()) +
                                 " outputs");
      }
      b.targets(i, y) = 1.0;
    } else {
      b.targets(i, 0) = static_cast<double>(y);
    }
  }
  return b;
}

Batch ToBatch(const Dataset& data, const ModelSpec& spec) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return ToBatch(data, spec, rows);
}

}  // namespace grape
