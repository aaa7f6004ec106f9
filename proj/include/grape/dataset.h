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
#ifndef GRAPE_DATASET_H_
#define GRAPE_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "grape/matrix.h"
#include "grape/model.h"

namespace grape {

// Labelled examples with features in [0, 1] and labels 0..num_classes-1.
struct Dataset {
  Matrix features;  // n x d
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
};

// Rescales every feature column to [0, 1]; constant columns become 0.
void MinMaxScale(Matrix& features);

// Standard normal features labelled by the argmax of a random linear
// teacher, then min-max scaled.
Dataset SyntheticGaussian(std::size_t n, std::size_t d,
                          std::size_t num_classes, std::uint64_t seed);

// Two classes separated by a hyperplane with unit normal w*. The component
// of x along w* is replaced by s (margin / 2 + |g|) with s = +-1 the class
// sign and g ~ N(0, 1), so every pair of classes is at least `margin`
// apart along w* before scaling. Min-max scaling keeps the sets linearly
// separable.
Dataset TwoClassMargin(std::size_t n, std::size_t d, double margin,
                       std::uint64_t seed);

// Big-endian IDX pair: images with magic 0x00000803 (count, rows, cols,
// unsigned bytes) and labels with magic 0x00000801. Pixels are divided by
// 255. Throws FormatError with the byte offset of the first bad field.
Dataset ParseIdx(std::span<const std::uint8_t> images,
                 std::span<const std::uint8_t> labels);
Dataset LoadIdx(const std::string& images_path,
                const std::string& labels_path);

// Deterministic shuffled split; the second part holds round(n * fraction)
// examples.
std::pair<Dataset, Dataset> SplitDataset(const Dataset& data, double fraction,
                                         std::uint64_t seed);

Dataset Subset(const Dataset& data, std::span<const std::size_t> rows);

// Batch for `spec`: class-index targets for cross-entropy, one-hot targets
// for squared error.
Batch ToBatch(const Dataset& data, const ModelSpec& spec);
Batch ToBatch(const Dataset& data, const ModelSpec& spec,
              std::span<const std::size_t> rows);

// Fisher-Yates permutation of [0, n) driven by `rng`.
std::vector<std::size_t> Permutation(std::size_t n, RngStream& rng);

}  // namespace grape

#endif  // GRAPE_DATASET_H_
