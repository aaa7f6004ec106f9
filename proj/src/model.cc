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
#include "grape/model.h"

#include <algorithm>
#include <cmath>

#include "grape/error.h"
#include "grape/memory_tracker.h"
#include "grape/parallel.h"

namespace grape {
namespace {

struct ForwardCache {
  // acts[0] is the input; acts[l + 1] is the output of layer l (logits for
  // the last layer). pre[l] is layer l's pre-activation.
  std::vector<Matrix> acts;
  std::vector<Matrix> pre;
};

double Activate(Activation a, double z) {
  switch (a) {
    case Activation::kIdentity:
      return z;
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kTanh:
      return std::tanh(z);
  }
  return z;
}

double ActivationDerivative(Activation a, double z, double out) {
  switch (a) {
    case Activation::kIdentity:
      return 1.0;
    case Activation::kRelu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh:
      return 1.0 - out * out;
  }
  return 1.0;
}

// log(1 + exp(x)) without overflow.
double Softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

std::size_t ClassLabel(const ModelSpec& spec, const Batch& batch,
                       std::size_t i) {
  const double y = batch.targets(i, 0);
  const std::size_t classes = std::max<std::size_t>(spec.output_dim(), 2);
  if (!(y >= 0.0) || y != std::floor(y) ||
      y >= static_cast<double>(classes)) {
    throw InvalidArgumentError("label " + std::to_string(y) +
                               " of sample " + std::to_string(i) +
                               " is not a class index below " +
                               std::to_string(classes));
  }
  return static_cast<std::size_t>(y);
}

ForwardCache Forward(const ModelSpec& spec, const Params& params,
                     const Matrix& inputs) {
  ForwardCache cache;
  const std::size_t num_layers = spec.num_layers();
  cache.acts.reserve(num_layers + 1);
  cache.pre.reserve(num_layers);
  cache.acts.push_back(inputs);
  for (std::size_t l = 0; l < num_layers; ++l) {
    Matrix z = MatMul(cache.acts.back(), params.weights[l]);
    if (spec.include_bias) {
      for (std::size_t i = 0; i < z.rows(); ++i) {
        Axpy(1.0, params.biases[l], z.row(i));
      }
    }
    Matrix a = z;
    if (l + 1 < num_layers) {
      for (double& x : a.data()) x = Activate(spec.activation, x);
    }
    cache.pre.push_back(std::move(z));
    cache.acts.push_back(std::move(a));
  }
  return cache;
}

double LossOfRow(const ModelSpec& spec, std::span<const double> logits,
                 const Batch& batch, std::size_t i) {
  if (spec.loss == Loss::kSquaredError) {
    double s = 0.0;
    auto y = batch.targets.row(i);
    for (std::size_t k = 0; k < logits.size(); ++k) {
      const double r = logits[k] - y[k];
      s += r * r;
    }
    return 0.5 * s;
  }
  const std::size_t label = ClassLabel(spec, batch, i);
  if (logits.size() == 1) {
    const double z = logits[0];
    return Softplus(z) - (label == 1 ? z : 0.0);
  }
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - zmax);
  return zmax + std::log(s) - logits[label];
}

// d loss_i / d logits for every sample.
Matrix OutputDelta(const ModelSpec& spec, const Matrix& logits,
                   const Batch& batch) {
  Matrix delta(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto z = logits.row(i);
    auto d = delta.row(i);
    if (spec.loss == Loss::kSquaredError) {
      auto y = batch.targets.row(i);
      for (std::size_t k = 0; k < z.size(); ++k) d[k] = z[k] - y[k];
      continue;
    }
    const std::size_t label = ClassLabel(spec, batch, i);
    if (z.size() == 1) {
      d[0] = 1.0 / (1.0 + std::exp(-z[0])) - (label == 1 ? 1.0 : 0.0);
      continue;
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      d[k] = std::exp(z[k] - zmax);
      s += d[k];
    }
    for (std::size_t k = 0; k < z.size(); ++k) d[k] /= s;
    d[label] -= 1.0;
  }
  return delta;
}

}  // namespace

Activation ParseActivation(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw InvalidArgumentError("unknown activation '" + name + "'");
}

Loss ParseLoss(const std::string& name) {
  if (name == "squared-error") return Loss::kSquaredError;
  if (name == "cross-entropy") return Loss::kCrossEntropy;
  throw InvalidArgumentError("unknown loss '" + name + "'");
}

std::string ToString(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
  }
  return "?";
}

std::string ToString(Loss l) {
  return l == Loss::kSquaredError ? "squared-error" : "cross-entropy";
}

void ModelSpec::Validate() const {
  if (layers.empty()) {
    throw InvalidArgumentError("model: at least one layer is required");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].fan_in == 0 || layers[l].fan_out == 0) {
      throw InvalidArgumentError("model: layer " + std::to_string(l) +
                                 " has a zero dimension");
    }
    if (l > 0 && layers[l].fan_in != layers[l - 1].fan_out) {
      throw InvalidArgumentError(
          "model: layer " + std::to_string(l) + " fan-in " +
          std::to_string(layers[l].fan_in) + " != previous fan-out " +
          std::to_string(layers[l - 1].fan_out));
    }
  }
}

std::size_t ModelSpec::NumWeights() const {
  std::size_t d = 0;
  for (const auto& l : layers) d += l.fan_in * l.fan_out;
  return d;
}

std::size_t ModelSpec::NumBiases() const {
  if (!include_bias) return 0;
  std::size_t d = 0;
  for (const auto& l : layers) d += l.fan_out;
  return d;
}

ModelSpec ModelSpec::FromWidths(const std::vector<std::size_t>& widths,
                                Activation activation, Loss loss,
                                bool include_bias) {
  if (widths.size() < 2) {
    throw InvalidArgumentError("model: need at least two widths");
  }
  ModelSpec spec;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    spec.layers.push_back({widths[l], widths[l + 1]});
  }
  spec.activation = activation;
  spec.loss = loss;
  spec.include_bias = include_bias;
  spec.Validate();
  return spec;
}

Params InitParams(const ModelSpec& spec, RngStream rng) {
  spec.Validate();
  Params p;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto& d = spec.layers[l];
    p.weights.push_back(GaussianMatrix(rng.Substream(l), d.fan_in, d.fan_out,
                                       1.0 / static_cast<double>(d.fan_in)));
    p.biases.emplace_back(spec.include_bias ? d.fan_out : 0, 0.0);
  }
  return p;
}

void CheckShapes(const ModelSpec& spec, const Params& params) {
  spec.Validate();
  if (params.weights.size() != spec.num_layers() ||
      params.biases.size() != spec.num_layers()) {
    throw InvalidArgumentError("params: layer count does not match model");
  }
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto& d = spec.layers[l];
    if (params.weights[l].rows() != d.fan_in ||
        params.weights[l].cols() != d.fan_out) {
      throw InvalidArgumentError("params: layer " + std::to_string(l) +
                                 " weight is " +
                                 params.weights[l].ShapeString());
    }
    const std::size_t nb = spec.include_bias ? d.fan_out : 0;
    if (params.biases[l].size() != nb) {
      throw InvalidArgumentError("params: layer " + std::to_string(l) +
                                 " bias length mismatch");
    }
  }
}

void CheckBatch(const ModelSpec& spec, const Batch& batch) {
  if (batch.inputs.cols() != spec.input_dim()) {
    throw InvalidArgumentError(
        "batch: " + std::to_string(batch.inputs.cols()) +
        " features, model expects " + std::to_string(spec.input_dim()));
  }
  if (batch.targets.rows() != batch.inputs.rows()) {
    throw InvalidArgumentError("batch: target count != input count");
  }
  const std::size_t want =
      spec.loss == Loss::kSquaredError ? spec.output_dim() : 1;
  if (batch.targets.cols() != want) {
    throw InvalidArgumentError("batch: targets have " +
                               std::to_string(batch.targets.cols()) +
                               " columns, expected " + std::to_string(want));
  }
}

Evaluation Evaluate(const ModelSpec& spec, const Params& params,
                    const Batch& batch) {
  CheckShapes(spec, params);
  CheckBatch(spec, batch);
  ForwardCache cache = Forward(spec, params, batch.inputs);
  Evaluation eval;
  eval.outputs = std::move(cache.acts.back());
  const std::size_t b = batch.size();
  eval.predictions.resize(b);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    auto z = eval.outputs.row(i);
    total += LossOfRow(spec, z, batch, i);
    if (spec.loss == Loss::kCrossEntropy) {
      eval.predictions[i] =
          z.size() == 1
              ? (z[0] > 0.0 ? 1.0 : 0.0)
              : static_cast<double>(std::max_element(z.begin(), z.end()) -
                                    z.begin());
    } else {
      eval.predictions[i] = z[0];
    }
  }
  eval.mean_loss = b == 0 ? 0.0 : total / static_cast<double>(b);
  return eval;
}

double Accuracy(const ModelSpec& spec, const Evaluation& eval,
                const Batch& batch) {
  const std::size_t b = batch.size();
  if (b == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < b; ++i) {
    if (spec.loss == Loss::kCrossEntropy) {
      hits += eval.predictions[i] == batch.targets(i, 0);
    } else {
      bool ok = true;
      for (std::size_t k = 0; k < batch.targets.cols(); ++k) {
        ok = ok && std::abs(eval.outputs(i, k) - batch.targets(i, k)) < 0.5;
      }
      hits += ok;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(b);
}

double SampleLoss(const ModelSpec& spec, const Params& params,
                  const Batch& batch, std::size_t i) {
  Batch one = SliceBatch(batch, i, i + 1);
  CheckShapes(spec, params);
  CheckBatch(spec, one);
  ForwardCache cache = Forward(spec, params, one.inputs);
  return LossOfRow(spec, cache.acts.back().row(0), one, 0);
}

void VisitPerSampleGrads(const ModelSpec& spec, const Params& params,
                         const Batch& batch, const LayerVisitor& visitor) {
  CheckShapes(spec, params);
  CheckBatch(spec, batch);
  const std::size_t b = batch.size();
  ForwardCache cache = Forward(spec, params, batch.inputs);
  for (std::size_t i = 0; i < b; ++i) {
    const double loss = LossOfRow(spec, cache.acts.back().row(i), batch, i);
    if (!std::isfinite(loss)) {
      throw NumericFailureError("non-finite loss at sample " +
                                std::to_string(i));
    }
  }

  Matrix delta = OutputDelta(spec, cache.acts.back(), batch);
  for (std::size_t l = spec.num_layers(); l-- > 0;) {
    const Matrix& a_prev = cache.acts[l];
    const std::size_t m = spec.layers[l].fan_in;
    const std::size_t n = spec.layers[l].fan_out;
    std::vector<LayerGrads> block(b);
    Charge charge(MemoryCategory::kSampleGradTransient,
                  b * (m * n + (spec.include_bias ? n : 0)));
    ParallelFor(b, b * m * n, [&](std::size_t i) {
      block[i].weight = Outer(a_prev.row(i), delta.row(i));
      if (spec.include_bias) {
        auto d = delta.row(i);
        block[i].bias.assign(d.begin(), d.end());
      }
    });

    Matrix next;
    if (l > 0) {
      next = MatMulNT(delta, params.weights[l]);
      const Matrix& z = cache.pre[l - 1];
      const Matrix& a = cache.acts[l];
      for (std::size_t k = 0; k < next.size(); ++k) {
        next.data()[k] *=
            ActivationDerivative(spec.activation, z.data()[k], a.data()[k]);
      }
    }
    visitor(l, block);
    delta = std::move(next);
  }
}

PerSampleGrads ComputePerSampleGrads(const ModelSpec& spec,
                                     const Params& params,
                                     const Batch& batch) {
  PerSampleGrads out(batch.size(), GradSet(spec.num_layers()));
  VisitPerSampleGrads(spec, params, batch,
                      [&](std::size_t l, std::span<LayerGrads> block) {
                        for (std::size_t i = 0; i < block.size(); ++i) {
                          out[i][l] = std::move(block[i]);
                        }
                      });
  return out;
}

GradSet BatchGrad(const ModelSpec& spec, const Params& params,
                  const Batch& batch) {
  CheckShapes(spec, params);
  CheckBatch(spec, batch);
  const std::size_t b = batch.size();
  if (b == 0) throw InvalidArgumentError("BatchGrad: empty batch");
  ForwardCache cache = Forward(spec, params, batch.inputs);
  Matrix delta = OutputDelta(spec, cache.acts.back(), batch);
  const double denom = static_cast<double>(b);

  GradSet grads(spec.num_layers());
  for (std::size_t l = spec.num_layers(); l-- > 0;) {
    const Matrix& a_prev = cache.acts[l];
    const std::size_t m = spec.layers[l].fan_in;
    const std::size_t n = spec.layers[l].fan_out;
    Matrix g(m, n);
    std::vector<double> gb(spec.include_bias ? n : 0, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
      auto a = a_prev.row(i);
      auto d = delta.row(i);
      for (std::size_t r = 0; r < m; ++r) {
        auto g_row = g.row(r);
        for (std::size_t c = 0; c < n; ++c) g_row[c] += a[r] * d[c];
      }
      for (std::size_t c = 0; c < gb.size(); ++c) gb[c] += d[c];
    }
    for (double& x : g.data()) x /= denom;
    for (double& x : gb) x /= denom;
    grads[l] = {std::move(g), std::move(gb)};

    if (l > 0) {
      Matrix next = MatMulNT(delta, params.weights[l]);
      const Matrix& z = cache.pre[l - 1];
      const Matrix& a = cache.acts[l];
      for (std::size_t k = 0; k < next.size(); ++k) {
        next.data()[k] *=
            ActivationDerivative(spec.activation, z.data()[k], a.data()[k]);
      }
      delta = std::move(next);
    }
  }
  return grads;
}

GradSet FiniteDiffGrad(const ModelSpec& spec, const Params& params,
                       const Batch& batch, std::size_t i, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw InvalidArgumentError("FiniteDiffGrad: step h must be positive");
  }
  if (i >= batch.size()) {
    throw InvalidArgumentError("FiniteDiffGrad: sample index out of range");
  }
  Params p = params;
  const auto central = [&](double& x) {
    const double saved = x;
    x = saved + h;
    const double up = SampleLoss(spec, p, batch, i);
    x = saved - h;
    const double down = SampleLoss(spec, p, batch, i);
    x = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericFailureError("FiniteDiffGrad: non-finite loss");
    }
    return (up - down) / (2.0 * h);
  };
  GradSet out = ZerosLike(params);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    auto w = p.weights[l].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      out[l].weight.data()[k] = central(w[k]);
    }
    for (std::size_t k = 0; k < p.biases[l].size(); ++k) {
      out[l].bias[k] = central(p.biases[l][k]);
    }
  }
  return out;
}

std::size_t FlatSize(const GradSet& g) {
  std::size_t n = 0;
  for (const auto& l : g) n += l.weight.size() + l.bias.size();
  return n;
}

std::vector<double> Flatten(const GradSet& g) {
  std::vector<double> out;
  out.reserve(FlatSize(g));
  for (const auto& l : g) {
    out.insert(out.end(), l.weight.data().begin(), l.weight.data().end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

void Unflatten(std::span<const double> flat, GradSet& g) {
  if (flat.size() != FlatSize(g)) {
    throw InvalidArgumentError("Unflatten: length " +
                               std::to_string(flat.size()) + " != " +
                               std::to_string(FlatSize(g)));
  }
  std::size_t pos = 0;
  for (auto& l : g) {
    auto w = l.weight.data();
    std::copy_n(flat.begin() + pos, w.size(), w.begin());
    pos += w.size();
    std::copy_n(flat.begin() + pos, l.bias.size(), l.bias.begin());
    pos += l.bias.size();
  }
}

double SquaredNorm(const GradSet& g) {
  double s = 0.0;
  for (const auto& l : g) {
    for (double x : l.weight.data()) s += x * x;
    for (double x : l.bias) s += x * x;
  }
  return s;
}

GradSet ZerosLike(const GradSet& g) {
  GradSet out;
  out.reserve(g.size());
  for (const auto& l : g) {
    out.push_back({Matrix(l.weight.rows(), l.weight.cols()),
                   std::vector<double>(l.bias.size(), 0.0)});
  }
  return out;
}

GradSet ZerosLike(const Params& p) {
  GradSet out;
  out.reserve(p.weights.size());
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    out.push_back({Matrix(p.weights[l].rows(), p.weights[l].cols()),
                   std::vector<double>(p.biases[l].size(), 0.0)});
  }
  return out;
}

void AddScaled(GradSet& acc, const GradSet& x, double scale) {
  if (acc.size() != x.size()) {
    throw InvalidArgumentError("AddScaled: layer count mismatch");
  }
  for (std::size_t l = 0; l < acc.size(); ++l) {
    if (!acc[l].weight.SameShape(x[l].weight)) {
      throw InvalidArgumentError("AddScaled: shape mismatch at layer " +
                                 std::to_string(l));
    }
    Axpy(scale, x[l].weight.data(), acc[l].weight.data());
    Axpy(scale, x[l].bias, acc[l].bias);
  }
}

GradSet AsGradSet(const Params& p) {
  GradSet out;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    out.push_back({p.weights[l], p.biases[l]});
  }
  return out;
}

Params FromGradSet(const GradSet& g) {
  Params p;
  for (const auto& l : g) {
    p.weights.push_back(l.weight);
    p.biases.push_back(l.bias);
  }
  return p;
}

Batch SliceBatch(const Batch& batch, std::size_t begin, std::size_t end) {
  if (begin > end || end > batch.size()) {
    throw InvalidArgumentError("SliceBatch: range out of bounds");
  }
  const std::size_t fi = batch.inputs.cols();
  const std::size_t ft = batch.targets.cols();
  auto in = batch.inputs.data().subspan(begin * fi, (end - begin) * fi);
  auto tg = batch.targets.data().subspan(begin * ft, (end - begin) * ft);
  return {Matrix(end - begin, fi, std::vector<double>(in.begin(), in.end())),
          Matrix(end - begin, ft, std::vector<double>(tg.begin(), tg.end()))};
}

Batch GatherBatch(const Batch& batch, std::span<const std::size_t> indices) {
  Batch out{Matrix(indices.size(), batch.inputs.cols()),
            Matrix(indices.size(), batch.targets.cols())};
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= batch.size()) {
      throw InvalidArgumentError("GatherBatch: index out of range");
    }
    std::ranges::copy(batch.inputs.row(indices[k]), out.inputs.row(k).begin());
    std::ranges::copy(batch.targets.row(indices[k]),
                      out.targets.row(k).begin());
  }
  return out;
}

}  // namespace grape
