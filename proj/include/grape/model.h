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
#ifndef GRAPE_MODEL_H_
#define GRAPE_MODEL_H_

// Fully connected models with manual, layer-by-layer backpropagation.
//
// Layer l holds W_l of shape m_l x n_l with m_l = fan-in and n_l = fan-out;
// the forward map is z = W_l^T a + b_l, so a per-sample weight gradient is
// the outer product a delta^T and projections act on the fan-in side.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "grape/matrix.h"
#include "grape/rng.h"

namespace grape {

enum class Activation { kIdentity, kRelu, kTanh };
enum class Loss { kSquaredError, kCrossEntropy };

Activation ParseActivation(const std::string& name);
Loss ParseLoss(const std::string& name);
std::string ToString(Activation a);
std::string ToString(Loss l);

struct LayerDims {
  std::size_t fan_in = 0;   // m
  std::size_t fan_out = 0;  // n
};

struct ModelSpec {
  std::vector<LayerDims> layers;
  // Applied after every layer except the last, which emits logits.
  Activation activation = Activation::kTanh;
  // Cross-entropy is sigmoid/binary for one output, softmax otherwise.
  Loss loss = Loss::kCrossEntropy;
  bool include_bias = true;

  // Throws InvalidArgumentError unless layers compose and L >= 1.
  void Validate() const;
  std::size_t num_layers() const { return layers.size(); }
  std::size_t input_dim() const { return layers.front().fan_in; }
  std::size_t output_dim() const { return layers.back().fan_out; }
  // d = sum m_l n_l (weights only).
  std::size_t NumWeights() const;
  std::size_t NumBiases() const;
  std::size_t NumParams() const { return NumWeights() + NumBiases(); }

  // Builds a spec from widths, e.g. {20, 64, 2} -> two layers.
  static ModelSpec FromWidths(const std::vector<std::size_t>& widths,
                              Activation activation, Loss loss,
                              bool include_bias);
};

struct Params {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;  // empty vectors when disabled
};

// Gradient (or any same-shaped quantity) of one layer.
struct LayerGrads {
  Matrix weight;
  std::vector<double> bias;

  friend bool operator==(const LayerGrads&, const LayerGrads&) = default;
};

// One entry per layer.
using GradSet = std::vector<LayerGrads>;
// [sample][layer].
using PerSampleGrads = std::vector<GradSet>;

// A set of labelled examples. Row i of `inputs` is sample i. For
// squared-error models `targets` is B x n_out; for cross-entropy it is B x 1
// holding the 0-indexed class label.
struct Batch {
  Matrix inputs;
  Matrix targets;

  std::size_t size() const { return inputs.rows(); }
};

// Random initialization: W ~ N(0, 1/fan_in), biases zero.
Params InitParams(const ModelSpec& spec, RngStream rng);

// Throws InvalidArgumentError if `params` or `batch` do not fit `spec`.
void CheckShapes(const ModelSpec& spec, const Params& params);
void CheckBatch(const ModelSpec& spec, const Batch& batch);

struct Evaluation {
  double mean_loss = 0.0;
  Matrix outputs;                   // B x n_out logits
  std::vector<double> predictions;  // class index, or first output value
};

Evaluation Evaluate(const ModelSpec& spec, const Params& params,
                    const Batch& batch);

// Classification: fraction of argmax hits. Squared error: fraction of
// samples whose every output is within 0.5 of the target.
double Accuracy(const ModelSpec& spec, const Evaluation& eval,
                const Batch& batch);

// Loss of sample `i` alone (not averaged).
double SampleLoss(const ModelSpec& spec, const Params& params,
                  const Batch& batch, std::size_t i);

// Receives the per-sample gradients of one layer: block[i] is sample i's
// gradient for layer `layer`. Called for layers L-1 down to 0; the block is
// released once the callback returns, and callers may move out of it.
using LayerVisitor =
    std::function<void(std::size_t layer, std::span<LayerGrads> block)>;

// Streams per-sample gradients of the per-sample loss, one layer at a time.
// At most one layer's full per-sample block exists during the call.
// Throws NumericFailureError on a non-finite loss.
void VisitPerSampleGrads(const ModelSpec& spec, const Params& params,
                         const Batch& batch, const LayerVisitor& visitor);

// Materialized form of VisitPerSampleGrads.
PerSampleGrads ComputePerSampleGrads(const ModelSpec& spec,
                                     const Params& params, const Batch& batch);

// Gradient of the mean loss. Reductions run in ascending sample order,
// matching a sum over ComputePerSampleGrads divided by B bit for bit.
GradSet BatchGrad(const ModelSpec& spec, const Params& params,
                  const Batch& batch);

// Central differences of SampleLoss(i) with step h. Throws
// InvalidArgumentError unless h > 0.
GradSet FiniteDiffGrad(const ModelSpec& spec, const Params& params,
                       const Batch& batch, std::size_t i, double h);

// Flat layout: for each layer in order, its weight row-major then its bias.
std::size_t FlatSize(const GradSet& g);
std::vector<double> Flatten(const GradSet& g);
// Writes `flat` back into `g`, whose shapes define the layout.
void Unflatten(std::span<const double> flat, GradSet& g);
double SquaredNorm(const GradSet& g);
GradSet ZerosLike(const GradSet& g);
GradSet ZerosLike(const Params& p);
// acc += scale * x.
void AddScaled(GradSet& acc, const GradSet& x, double scale);

// Params viewed as a GradSet and back.
GradSet AsGradSet(const Params& p);
Params FromGradSet(const GradSet& g);

// Rows [begin, end) or the listed rows of `batch`.
Batch SliceBatch(const Batch& batch, std::size_t begin, std::size_t end);
Batch GatherBatch(const Batch& batch, std::span<const std::size_t> indices);

}  // namespace grape

#endif  // GRAPE_MODEL_H_
