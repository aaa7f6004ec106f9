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
#include "grape/optimizers.h"

#include <algorithm>
#include <cmath>

#include "grape/error.h"
#include "grape/svd.h"

namespace grape {
namespace {

std::size_t StateFloats(const AdamState& s) {
  return FlatSize(s.first) + FlatSize(s.second);
}

// Makes the moments of layer l match the update's shape.
void ShapeMoments(AdamState& state, const GradSet& update) {
  if (state.first.size() != update.size()) {
    state.first = ZerosLike(update);
    state.second = ZerosLike(update);
    return;
  }
  for (std::size_t l = 0; l < update.size(); ++l) {
    if (!state.first[l].weight.SameShape(update[l].weight) ||
        state.first[l].bias.size() != update[l].bias.size()) {
      state.first[l] = {Matrix(update[l].weight.rows(), update[l].weight.cols()),
                        std::vector<double>(update[l].bias.size(), 0.0)};
      state.second[l] = state.first[l];
    }
  }
}

// d = m / (sqrt(v) + phi) after the moment updates, in place of `m`'s copy.
void UpdateMoments(std::span<const double> grad, std::span<double> m,
                   std::span<double> v, std::span<double> direction,
                   const AdamHyper& h) {
  for (std::size_t k = 0; k < grad.size(); ++k) {
    m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * grad[k];
    v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * grad[k] * grad[k];
    direction[k] = m[k] / (std::sqrt(v[k]) + h.phi);
  }
}

std::size_t ChunkSize(const DpOptions& dp, std::size_t b) {
  return dp.micro_batch == 0 ? b : std::min(dp.micro_batch, b);
}

ProjectorFactory FactoryOf(const DpGrapeOptions& grape) {
  return grape.factory ? grape.factory : GaussianProjectors(grape.schedule);
}

ProjectorSource FactorySource(const ModelSpec& spec,
                              const ProjectorFactory& factory,
                              std::size_t step) {
  return [&spec, factory, step](std::size_t l) {
    std::optional<Matrix> p = factory(step, l, spec.layers[l].fan_in);
    return p ? LentProjector::Generated(std::move(*p)) : LentProjector::None();
  };
}

bool GaloreProjects(const ModelSpec& spec, std::size_t l, std::size_t rank) {
  return rank >= 1 &&
         rank <= std::min(spec.layers[l].fan_in, spec.layers[l].fan_out);
}

std::vector<std::vector<double>> FlatPerSampleGrads(const ModelSpec& spec,
                                                    const Params& params,
                                                    const Batch& batch) {
  PerSampleGrads g = ComputePerSampleGrads(spec, params, batch);
  std::vector<std::vector<double>> out;
  out.reserve(g.size());
  for (const auto& s : g) out.push_back(Flatten(s));
  return out;
}

}  // namespace

void AdamHyper::Validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidArgumentError("Adam: decay rates must lie in [0, 1)");
  }
  if (!(phi > 0.0)) throw InvalidArgumentError("Adam: phi must be > 0");
  if (!(lr > 0.0)) throw InvalidArgumentError("Adam: learning rate must be > 0");
}

double AdamStepSize(const AdamHyper& hyper, std::size_t t) {
  const double td = static_cast<double>(t);
  return hyper.lr * std::sqrt(1.0 - std::pow(hyper.beta2, td)) /
         (1.0 - std::pow(hyper.beta1, td));
}

void AdamState::Reset() {
  first = ZerosLike(first);
  second = ZerosLike(second);
  moment_steps = 0;
}

void AdamUpdateProjected(Params& params, const GradSet& update,
                         const ProjectorSource& source, AdamState& state,
                         const AdamHyper& hyper) {
  hyper.Validate();
  if (update.size() != params.weights.size()) {
    throw InvalidArgumentError("AdamUpdateProjected: layer count mismatch");
  }
  ShapeMoments(state, update);
  const double alpha = AdamStepSize(hyper, state.moment_steps + 1);

  for (std::size_t l = 0; l < update.size(); ++l) {
    const LayerGrads& r = update[l];
    Matrix direction(r.weight.rows(), r.weight.cols());
    UpdateMoments(r.weight.data(), state.first[l].weight.data(),
                  state.second[l].weight.data(), direction.data(), hyper);

    Matrix& w = params.weights[l];
    LentProjector p = source(l);
    if (p) {
      if (p.get()->rows() != w.rows() || p.get()->cols() != r.weight.rows()) {
        throw InvalidArgumentError(
            "AdamUpdateProjected: layer " + std::to_string(l) +
            " projector " + p.get()->ShapeString() + " does not map " +
            r.weight.ShapeString() + " onto " + w.ShapeString());
      }
      direction = BackProject(*p.get(), direction);
    } else if (!direction.SameShape(w)) {
      throw InvalidArgumentError("AdamUpdateProjected: layer " +
                                 std::to_string(l) + " update " +
                                 r.weight.ShapeString() + " vs weight " +
                                 w.ShapeString());
    }
    for (std::size_t k = 0; k < w.size(); ++k) {
      w.data()[k] -= alpha * direction.data()[k];
    }

    auto& b = params.biases[l];
    if (r.bias.size() != b.size()) {
      throw InvalidArgumentError("AdamUpdateProjected: bias length mismatch");
    }
    std::vector<double> bias_dir(b.size());
    UpdateMoments(r.bias, state.first[l].bias, state.second[l].bias, bias_dir,
                  hyper);
    for (std::size_t k = 0; k < b.size(); ++k) b[k] -= alpha * bias_dir[k];
  }
  ++state.step;
  ++state.moment_steps;
  state.charge.Resize(StateFloats(state));
}

double ResolveSigma(const PrivacySpec& privacy) {
  if (privacy.sigma.has_value()) {
    if (*privacy.sigma < 0.0) {
      throw ConfigurationError("sigma must be >= 0");
    }
    return *privacy.sigma;
  }
  if (!privacy.clip.has_value()) return 0.0;
  throw ConfigurationError(
      "noise multiplier sigma is missing; set sigma or epsilon/delta");
}

RngStream NoiseStream(std::uint64_t noise_seed, std::size_t step) {
  return RngStream(HashWords({noise_seed, 0x6e6f697365ULL, step}));
}

void AdamStep(const ModelSpec& spec, Params& params, const Batch& batch,
              AdamState& state, const AdamHyper& hyper) {
  GradSet grad = BatchGrad(spec, params, batch);
  Charge charge(MemoryCategory::kGradient, FlatSize(grad));
  AdamUpdateProjected(params, grad,
                      [](std::size_t) { return LentProjector::None(); }, state,
                      hyper);
}

ClippedSum DpAdamPreNoiseSum(const ModelSpec& spec, const Params& params,
                             const Batch& batch, const DpOptions& dp) {
  const std::size_t b = batch.size();
  if (b == 0) throw InvalidArgumentError("DP step: empty batch");
  ClippedSum sum(ZerosLike(params), dp.privacy.clip);
  const std::size_t chunk = ChunkSize(dp, b);
  for (std::size_t begin = 0; begin < b; begin += chunk) {
    const Batch sub = SliceBatch(batch, begin, std::min(b, begin + chunk));
    PerSampleGrads stored(sub.size(), GradSet(spec.num_layers()));
    Charge charge(MemoryCategory::kGradient, 0);
    VisitPerSampleGrads(spec, params, sub,
                        [&](std::size_t l, std::span<LayerGrads> block) {
                          std::size_t floats = 0;
                          for (std::size_t i = 0; i < block.size(); ++i) {
                            floats += block[i].weight.size() +
                                      block[i].bias.size();
                            stored[i][l] = std::move(block[i]);
                          }
                          charge.Resize(charge.floats() + floats);
                        });
    for (const auto& g : stored) sum.Add(g);
  }
  return sum;
}

GradSet PrivatizeFullGradient(const ModelSpec& spec, const Params& params,
                              const Batch& batch, std::size_t step,
                              const DpOptions& dp) {
  const double sigma = ResolveSigma(dp.privacy);
  ClippedSum sum = DpAdamPreNoiseSum(spec, params, batch, dp);
  return sum.Privatize(sigma, NoiseStream(dp.noise_seed, step));
}

void DpAdamStep(const ModelSpec& spec, Params& params, const Batch& batch,
                const DpOptions& dp, AdamState& state, const AdamHyper& hyper) {
  GradSet noisy =
      PrivatizeFullGradient(spec, params, batch, state.step + 1, dp);
  Charge charge(MemoryCategory::kWorkspace, FlatSize(noisy));
  AdamUpdateProjected(params, noisy,
                      [](std::size_t) { return LentProjector::None(); }, state,
                      hyper);
}

ClippedSum DpGrapePreNoiseSum(const ModelSpec& spec, const Params& params,
                              const Batch& batch, std::size_t step,
                              const DpGrapeOptions& grape,
                              const DpOptions& dp) {
  const std::size_t b = batch.size();
  if (b == 0) throw InvalidArgumentError("DP step: empty batch");
  const ProjectorFactory factory = FactoryOf(grape);
  const std::size_t chunk = ChunkSize(dp, b);
  std::optional<ClippedSum> sum;
  for (std::size_t begin = 0; begin < b; begin += chunk) {
    const Batch sub = SliceBatch(batch, begin, std::min(b, begin + chunk));
    PerSampleGrads projected(sub.size(), GradSet(spec.num_layers()));
    Charge charge(MemoryCategory::kGradient, 0);
    VisitPerSampleGrads(
        spec, params, sub, [&](std::size_t l, std::span<LayerGrads> block) {
          std::optional<Matrix> generated =
              factory(step, l, spec.layers[l].fan_in);
          const LentProjector p =
              generated ? LentProjector::Generated(std::move(*generated))
                        : LentProjector::None();
          std::size_t floats = 0;
          for (std::size_t i = 0; i < block.size(); ++i) {
            LayerGrads& out = projected[i][l];
            out.weight = p ? Project(*p.get(), block[i].weight)
                           : std::move(block[i].weight);
            out.bias = std::move(block[i].bias);
            floats += out.weight.size() + out.bias.size();
          }
          charge.Resize(charge.floats() + floats);
        });
    if (!sum) sum.emplace(projected.front(), dp.privacy.clip);
    for (const auto& g : projected) sum->Add(g);
  }
  return std::move(*sum);
}

GradSet DpGrapePrivatize(const ModelSpec& spec, const Params& params,
                         const Batch& batch, std::size_t step,
                         const DpGrapeOptions& grape, const DpOptions& dp) {
  const double sigma = ResolveSigma(dp.privacy);
  ClippedSum sum = DpGrapePreNoiseSum(spec, params, batch, step, grape, dp);
  return sum.Privatize(sigma, NoiseStream(dp.noise_seed, step));
}

void DpGrapeStep(const ModelSpec& spec, Params& params, const Batch& batch,
                 const DpGrapeOptions& grape, const DpOptions& dp,
                 AdamState& state, const AdamHyper& hyper) {
  const std::size_t step = state.step + 1;
  if (grape.reset_moments_on_refresh && state.step > 0 &&
      grape.schedule.RefreshesAt(step)) {
    state.Reset();
  }
  GradSet noisy = DpGrapePrivatize(spec, params, batch, step, grape, dp);
  Charge charge(MemoryCategory::kWorkspace, FlatSize(noisy));
  AdamUpdateProjected(params, noisy,
                      FactorySource(spec, FactoryOf(grape), step), state,
                      hyper);
}

void GaloreApply(const ModelSpec& spec, Params& params, const GradSet& grad,
                 GaloreState& state, const GaloreOptions& galore,
                 const AdamHyper& hyper) {
  const std::size_t step = state.adam.step + 1;
  const std::size_t num_layers = spec.num_layers();
  if (grad.size() != num_layers) {
    throw InvalidArgumentError("GaloreApply: layer count mismatch");
  }
  state.projectors.resize(num_layers);
  const bool refresh =
      galore.refresh_every != 0 && step % galore.refresh_every == 0;

  GradSet projected(num_layers);
  std::size_t projector_floats = 0;
  for (std::size_t l = 0; l < num_layers; ++l) {
    auto& p = state.projectors[l];
    if (GaloreProjects(spec, l, galore.rank) && (!p || refresh)) {
      p = TopKSvd(grad[l].weight, galore.rank).u;
    }
    projected[l].weight = p ? Project(*p, grad[l].weight) : grad[l].weight;
    projected[l].bias = grad[l].bias;
    if (p) projector_floats += p->size();
  }
  state.charge.Resize(projector_floats);
  Charge charge(MemoryCategory::kWorkspace, FlatSize(projected));
  AdamUpdateProjected(
      params, projected,
      [&state](std::size_t l) {
        const auto& p = state.projectors[l];
        return p ? LentProjector::Borrowed(*p) : LentProjector::None();
      },
      state.adam, hyper);
}

void GaloreStep(const ModelSpec& spec, Params& params, const Batch& batch,
                GaloreState& state, const GaloreOptions& galore,
                const AdamHyper& hyper) {
  GradSet grad = BatchGrad(spec, params, batch);
  Charge charge(MemoryCategory::kGradient, FlatSize(grad));
  GaloreApply(spec, params, grad, state, galore, hyper);
}

void NaiveDpGaloreStep(const ModelSpec& spec, Params& params,
                       const Batch& batch, const DpOptions& dp,
                       GaloreState& state, const GaloreOptions& galore,
                       const AdamHyper& hyper) {
  GradSet noisy =
      PrivatizeFullGradient(spec, params, batch, state.adam.step + 1, dp);
  Charge charge(MemoryCategory::kWorkspace, FlatSize(noisy));
  GaloreApply(spec, params, noisy, state, galore, hyper);
}

void ValidatePartition(const Partition& blocks, std::size_t d) {
  std::vector<char> seen(d, 0);
  std::size_t total = 0;
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    if (blocks[l].empty()) {
      throw InvalidArgumentError("partition: block " + std::to_string(l) +
                                 " is empty");
    }
    for (std::size_t idx : blocks[l]) {
      if (idx >= d) {
        throw InvalidArgumentError("partition: index " + std::to_string(idx) +
                                   " outside [0, " + std::to_string(d) + ")");
      }
      if (seen[idx]) {
        throw InvalidArgumentError("partition: index " + std::to_string(idx) +
                                   " appears twice");
      }
      seen[idx] = 1;
      ++total;
    }
  }
  if (total != d) {
    throw InvalidArgumentError("partition covers " + std::to_string(total) +
                               " of " + std::to_string(d) + " coordinates");
  }
}

Partition LayerPartition(const ModelSpec& spec) {
  Partition blocks;
  std::size_t pos = 0;
  for (const auto& l : spec.layers) {
    const std::size_t size =
        l.fan_in * l.fan_out + (spec.include_bias ? l.fan_out : 0);
    std::vector<std::size_t> block(size);
    for (std::size_t k = 0; k < size; ++k) block[k] = pos + k;
    pos += size;
    blocks.push_back(std::move(block));
  }
  return blocks;
}

double BlockSgdNoiseStd(const PrivacySpec& privacy) {
  const double sigma = ResolveSigma(privacy);
  if (sigma == 0.0) return 0.0;
  if (!privacy.clip.has_value()) {
    throw ConfigurationError("noise requires a finite clip threshold");
  }
  return *privacy.clip * sigma;
}

namespace {

std::vector<Matrix> BlockProjectors(const Partition& blocks, std::size_t r,
                                    RngStream rng) {
  std::vector<Matrix> projectors;
  projectors.reserve(blocks.size());
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    projectors.push_back(GaussianMatrix(rng.Substream(l), blocks[l].size(), r,
                                        1.0 / static_cast<double>(r)));
  }
  return projectors;
}

std::vector<double> ClippedBlockSum(
    const Partition& blocks, const std::vector<Matrix>& projectors,
    const std::vector<std::vector<double>>& grads, std::size_t r,
    std::optional<double> clip) {
  if (grads.empty()) throw InvalidArgumentError("block SGD: empty batch");
  std::vector<double> sum(r * blocks.size(), 0.0);
  std::vector<double> projected(sum.size());
  for (const auto& g : grads) {
    for (std::size_t l = 0; l < blocks.size(); ++l) {
      const Matrix& p = projectors[l];
      for (std::size_t j = 0; j < r; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < blocks[l].size(); ++k) {
          const std::size_t idx = blocks[l][k];
          if (idx >= g.size()) {
            throw InvalidArgumentError("block SGD: gradient length mismatch");
          }
          s += p(k, j) * g[idx];
        }
        projected[l * r + j] = s;
      }
    }
    ClipInPlace(projected, clip);
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += projected[k];
  }
  return sum;
}

}  // namespace

std::vector<double> BlockSgdPreNoiseSum(
    const Partition& blocks, const std::vector<std::vector<double>>& grads,
    std::size_t rank, std::optional<double> clip, RngStream projection_rng) {
  if (rank == 0) throw InvalidArgumentError("block SGD: rank 0");
  return ClippedBlockSum(blocks, BlockProjectors(blocks, rank, projection_rng),
                         grads, rank, clip);
}

std::vector<double> BlockSgdStep(std::span<const double> w,
                                 const Partition& blocks,
                                 const std::vector<std::vector<double>>& grads,
                                 const BlockSgdOptions& options,
                                 RngStream projection_rng,
                                 RngStream noise_rng) {
  ValidatePartition(blocks, w.size());
  if (options.rank == 0) throw InvalidArgumentError("block SGD: rank 0");
  if (options.noise_std < 0.0) {
    throw InvalidArgumentError("block SGD: negative noise");
  }
  for (const auto& g : grads) {
    if (g.size() != w.size()) {
      throw InvalidArgumentError("block SGD: gradient length mismatch");
    }
  }
  const std::size_t r = options.rank;
  const std::vector<Matrix> projectors =
      BlockProjectors(blocks, r, projection_rng);
  const std::vector<double> sum =
      ClippedBlockSum(blocks, projectors, grads, r, options.clip);

  const double denom = static_cast<double>(grads.size());
  std::vector<double> out(w.begin(), w.end());
  std::vector<double> block_update(r);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    for (std::size_t j = 0; j < r; ++j) {
      block_update[j] = sum[l * r + j] / denom;
      if (options.noise_std > 0.0) {
        block_update[j] += options.noise_std * noise_rng.NextNormal();
      }
    }
    const Matrix& p = projectors[l];
    for (std::size_t k = 0; k < blocks[l].size(); ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < r; ++j) s += p(k, j) * block_update[j];
      out[blocks[l][k]] -= options.lr * s;
    }
  }
  return out;
}

std::size_t ReturnedIterate(std::size_t steps, bool uniform, RngStream rng) {
  if (steps == 0) return 0;
  return uniform ? 1 + rng.NextBelow(steps) : steps;
}

Method ParseMethod(const std::string& name) {
  if (name == "adam") return Method::kAdam;
  if (name == "galore") return Method::kGalore;
  if (name == "dp-adam") return Method::kDpAdam;
  if (name == "naive-dp-galore") return Method::kNaiveDpGalore;
  if (name == "dp-grape") return Method::kDpGrape;
  if (name == "block-sgd") return Method::kBlockSgd;
  throw InvalidArgumentError("unknown method '" + name + "'");
}

std::string ToString(Method m) {
  switch (m) {
    case Method::kAdam:
      return "adam";
    case Method::kGalore:
      return "galore";
    case Method::kDpAdam:
      return "dp-adam";
    case Method::kNaiveDpGalore:
      return "naive-dp-galore";
    case Method::kDpGrape:
      return "dp-grape";
    case Method::kBlockSgd:
      return "block-sgd";
  }
  return "?";
}

bool IsPrivate(Method m) {
  return m == Method::kDpAdam || m == Method::kNaiveDpGalore ||
         m == Method::kDpGrape || m == Method::kBlockSgd;
}

std::vector<double> Optimizer::PreNoiseSum(const Params&, const Batch&) const {
  throw InvalidArgumentError(ToString(config_.method) +
                             " is not a private method");
}

namespace {

class AdamOptimizer final : public Optimizer {
 public:
  AdamOptimizer(const ModelSpec& spec, const OptimizerConfig& config)
      : Optimizer(spec, config) {}
  void Step(Params& params, const Batch& batch) override {
    AdamStep(spec_, params, batch, state_, config_.hyper);
  }
  std::size_t steps_taken() const override { return state_.step; }

 private:
  AdamState state_;
};

class DpAdamOptimizer final : public Optimizer {
 public:
  DpAdamOptimizer(const ModelSpec& spec, const OptimizerConfig& config)
      : Optimizer(spec, config) {}
  void Step(Params& params, const Batch& batch) override {
    DpAdamStep(spec_, params, batch, config_.dp, state_, config_.hyper);
  }
  std::vector<double> PreNoiseSum(const Params& params,
                                  const Batch& batch) const override {
    return DpAdamPreNoiseSum(spec_, params, batch, config_.dp).sum();
  }
  std::size_t steps_taken() const override { return state_.step; }

 private:
  AdamState state_;
};

class GaloreOptimizer final : public Optimizer {
 public:
  GaloreOptimizer(const ModelSpec& spec, const OptimizerConfig& config)
      : Optimizer(spec, config),
        galore_{config.rank, config.refresh_every} {}
  void Step(Params& params, const Batch& batch) override {
    if (config_.method == Method::kGalore) {
      GaloreStep(spec_, params, batch, state_, galore_, config_.hyper);
    } else {
      NaiveDpGaloreStep(spec_, params, batch, config_.dp, state_, galore_,
                        config_.hyper);
    }
  }
  std::vector<double> PreNoiseSum(const Params& params,
                                  const Batch& batch) const override {
    if (config_.method == Method::kGalore) {
      return Optimizer::PreNoiseSum(params, batch);
    }
    return DpAdamPreNoiseSum(spec_, params, batch, config_.dp).sum();
  }
  std::size_t steps_taken() const override { return state_.adam.step; }

 private:
  GaloreOptions galore_;
  GaloreState state_;
};

class DpGrapeOptimizer final : public Optimizer {
 public:
  DpGrapeOptimizer(const ModelSpec& spec, const OptimizerConfig& config)
      : Optimizer(spec, config) {
    grape_.schedule = {config.rank, config.refresh_every,
                       config.projector_seed};
    grape_.reset_moments_on_refresh = config.reset_moments_on_refresh;
  }
  void Step(Params& params, const Batch& batch) override {
    DpGrapeStep(spec_, params, batch, grape_, config_.dp, state_,
                config_.hyper);
  }
  std::vector<double> PreNoiseSum(const Params& params,
                                  const Batch& batch) const override {
    return DpGrapePreNoiseSum(spec_, params, batch, state_.step + 1, grape_,
                              config_.dp)
        .sum();
  }
  std::size_t steps_taken() const override { return state_.step; }

 private:
  DpGrapeOptions grape_;
  AdamState state_;
};

class BlockSgdOptimizer final : public Optimizer {
 public:
  BlockSgdOptimizer(const ModelSpec& spec, const OptimizerConfig& config)
      : Optimizer(spec, config), blocks_(LayerPartition(spec)) {
    options_.rank = config.rank;
    options_.lr = config.hyper.lr;
    options_.clip = config.dp.privacy.clip;
    options_.noise_std = BlockSgdNoiseStd(config.dp.privacy);
  }
  void Step(Params& params, const Batch& batch) override {
    const std::size_t step = steps_ + 1;
    GradSet flat_params = AsGradSet(params);
    const std::vector<double> w = Flatten(flat_params);
    const std::vector<double> next =
        BlockSgdStep(w, blocks_, FlatPerSampleGrads(spec_, params, batch),
                     options_, ProjectionStream(step),
                     NoiseStream(config_.dp.noise_seed, step));
    Unflatten(next, flat_params);
    params = FromGradSet(flat_params);
    steps_ = step;
  }
  std::vector<double> PreNoiseSum(const Params& params,
                                  const Batch& batch) const override {
    return BlockSgdPreNoiseSum(blocks_,
                               FlatPerSampleGrads(spec_, params, batch),
                               options_.rank, options_.clip,
                               ProjectionStream(steps_ + 1));
  }
  std::size_t steps_taken() const override { return steps_; }

 private:
  RngStream ProjectionStream(std::size_t step) const {
    return RngStream(HashWords({config_.projector_seed, 0x626c6fULL, step}));
  }

  Partition blocks_;
  BlockSgdOptions options_;
  std::size_t steps_ = 0;
};

}  // namespace

std::unique_ptr<Optimizer> MakeOptimizer(const ModelSpec& spec,
                                         const OptimizerConfig& config) {
  spec.Validate();
  config.hyper.Validate();
  if (IsPrivate(config.method)) ResolveSigma(config.dp.privacy);
  if ((config.method == Method::kGalore ||
       config.method == Method::kNaiveDpGalore ||
       config.method == Method::kDpGrape ||
       config.method == Method::kBlockSgd) &&
      config.rank == 0) {
    throw ConfigurationError("rank r must be >= 1");
  }
  switch (config.method) {
    case Method::kAdam:
      return std::make_unique<AdamOptimizer>(spec, config);
    case Method::kDpAdam:
      return std::make_unique<DpAdamOptimizer>(spec, config);
    case Method::kGalore:
    case Method::kNaiveDpGalore:
      return std::make_unique<GaloreOptimizer>(spec, config);
    case Method::kDpGrape:
      return std::make_unique<DpGrapeOptimizer>(spec, config);
    case Method::kBlockSgd:
      return std::make_unique<BlockSgdOptimizer>(spec, config);
  }
  throw InvalidArgumentError("unknown method");
}

}  // namespace grape
