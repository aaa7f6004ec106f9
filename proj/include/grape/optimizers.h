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
#ifndef GRAPE_OPTIMIZERS_H_
#define GRAPE_OPTIMIZERS_H_

// Training steps for private and non-private, projected and full-space
// Adam variants, plus block-projected DP-SGD.
//
// Every Adam variant shares AdamUpdateProjected, which applies
//   M <- b1 M + (1 - b1) R,  V <- b2 V + (1 - b2) R^2,
//   W <- W - a_t P (M / (sqrt(V) + phi)),  a_t = lr sqrt(1 - b2^t) / (1 - b1^t)
// with P = I for layers that are not projected.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grape/dp.h"
#include "grape/matrix.h"
#include "grape/memory_tracker.h"
#include "grape/model.h"
#include "grape/projection.h"
#include "grape/rng.h"

namespace grape {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double phi = 1e-8;

  // Throws InvalidArgumentError unless 0 <= beta < 1 and phi > 0.
  void Validate() const;
};

// lr sqrt(1 - beta2^t) / (1 - beta1^t) for step t >= 1. The bias
// correction counts updates since the moments were last zeroed.
double AdamStepSize(const AdamHyper& hyper, std::size_t t);

// Moments with the shape of whatever is fed to the update: r x n for a
// projected layer, m x n otherwise, full length for biases.
struct AdamState {
  std::size_t step = 0;          // number of completed updates
  std::size_t moment_steps = 0;  // updates since the moments were zeroed
  GradSet first;
  GradSet second;
  Charge charge{MemoryCategory::kOptimizerState, 0};

  void Reset();
};

// Lends the projector of a layer to the update; None() for full space.
using ProjectorSource = std::function<LentProjector(std::size_t layer)>;

// One Adam step on projected moments. `update[l].weight` has shape r x n_l
// when source(l) yields an m_l x r projector, m_l x n_l otherwise. Moments
// are (re)created as zeros when their shape differs from the update's.
void AdamUpdateProjected(Params& params, const GradSet& update,
                         const ProjectorSource& source, AdamState& state,
                         const AdamHyper& hyper);

// Privatization settings shared by the DP optimizers. The step-t noise is
// drawn from RngStream(HashWords({noise_seed, t})), independent of every
// projector seed.
struct DpOptions {
  PrivacySpec privacy;
  std::uint64_t noise_seed = 0;
  // Split the logical batch into chunks of this many samples; 0 means one
  // chunk. Clipped contributions are summed across chunks before the single
  // noise draw.
  std::size_t micro_batch = 0;
};

// The noise multiplier to use: privacy.sigma when set, zero when clipping
// is disabled, otherwise ConfigurationError.
double ResolveSigma(const PrivacySpec& privacy);
RngStream NoiseStream(std::uint64_t noise_seed, std::size_t step);

// Plain (non-private) Adam on the batch gradient.
void AdamStep(const ModelSpec& spec, Params& params, const Batch& batch,
              AdamState& state, const AdamHyper& hyper);

// DP-Adam: per-sample full gradients, flat clipping, one Gaussian draw on
// the sum, averaging, full-shape Adam.
void DpAdamStep(const ModelSpec& spec, Params& params, const Batch& batch,
                const DpOptions& dp, AdamState& state, const AdamHyper& hyper);
ClippedSum DpAdamPreNoiseSum(const ModelSpec& spec, const Params& params,
                             const Batch& batch, const DpOptions& dp);

struct DpGrapeOptions {
  SubspaceSchedule schedule;
  // Overrides the Gaussian projectors of `schedule` when set.
  ProjectorFactory factory;
  // Zero the moments whenever the subspace changes. Off by default: moments
  // carry across refreshes.
  bool reset_moments_on_refresh = false;
};

// Projected per-sample gradients for step t (state.step + 1), clipped and
// summed. Per-sample full gradients of one layer at a time are projected as
// the backward pass produces them.
ClippedSum DpGrapePreNoiseSum(const ModelSpec& spec, const Params& params,
                              const Batch& batch, std::size_t step,
                              const DpGrapeOptions& grape, const DpOptions& dp);

// The privatized projected gradient of step t: (sum + noise) / B.
GradSet DpGrapePrivatize(const ModelSpec& spec, const Params& params,
                         const Batch& batch, std::size_t step,
                         const DpGrapeOptions& grape, const DpOptions& dp);

// Full DP-GRAPE step: privatize in the projected space, then Adam on
// projected moments with projectors regenerated from their seeds.
void DpGrapeStep(const ModelSpec& spec, Params& params, const Batch& batch,
                 const DpGrapeOptions& grape, const DpOptions& dp,
                 AdamState& state, const AdamHyper& hyper);

// GaLore-style projectors held in optimizer state.
struct GaloreState {
  AdamState adam;
  std::vector<std::optional<Matrix>> projectors;
  Charge charge{MemoryCategory::kProjector, 0};
};

struct GaloreOptions {
  std::size_t rank = 1;
  // Recompute projectors when t mod F == 0; 0 never recomputes after the
  // first step.
  std::size_t refresh_every = 1;
};

// Projected Adam update from a full-space gradient. On refresh steps (and
// the first step) each layer with rank <= min(m, n) gets P = top-r left
// singular vectors of its gradient; other layers stay full-space.
void GaloreApply(const ModelSpec& spec, Params& params, const GradSet& grad,
                 GaloreState& state, const GaloreOptions& galore,
                 const AdamHyper& hyper);

// Non-private GaLore on the batch gradient.
void GaloreStep(const ModelSpec& spec, Params& params, const Batch& batch,
                GaloreState& state, const GaloreOptions& galore,
                const AdamHyper& hyper);

// Privatized full-space gradient (as in DP-Adam) used by naive DP-GaLore.
GradSet PrivatizeFullGradient(const ModelSpec& spec, const Params& params,
                              const Batch& batch, std::size_t step,
                              const DpOptions& dp);

// Naive DP-GaLore: privatize the full gradient, then derive subspaces from
// the privatized gradient only.
void NaiveDpGaloreStep(const ModelSpec& spec, Params& params,
                       const Batch& batch, const DpOptions& dp,
                       GaloreState& state, const GaloreOptions& galore,
                       const AdamHyper& hyper);

// Index sets partitioning [0, d) into blocks.
using Partition = std::vector<std::vector<std::size_t>>;

// Throws InvalidArgumentError unless the blocks cover [0, d) disjointly.
void ValidatePartition(const Partition& blocks, std::size_t d);

// One block per layer over the flat parameter layout (weight then bias).
Partition LayerPartition(const ModelSpec& spec);

struct BlockSgdOptions {
  std::size_t rank = 1;
  double lr = 0.1;
  std::optional<double> clip = 1.0;
  // Standard deviation of the noise added to each block's averaged
  // projected gradient. In terms of the noise multiplier, clip * sigma.
  double noise_std = 0.0;
};

// Noise standard deviation for BlockSgdOptions from a privacy spec, using
// its sigma or calibrating one.
double BlockSgdNoiseStd(const PrivacySpec& privacy);

// One block-projected DP-SGD step on flat parameters.
//
// Block l draws P_l (|U_l| x r, N(0, 1/r) entries) from
// projection_rng.Substream(l). Sample j's r x L matrix of block
// projections is flat-clipped at C, the clipped matrices are averaged, and
// N(0, noise_std^2) noise is added per block coordinate. Then
// w[U_l] -= lr P_l R[l].
std::vector<double> BlockSgdStep(std::span<const double> w,
                                 const Partition& blocks,
                                 const std::vector<std::vector<double>>& grads,
                                 const BlockSgdOptions& options,
                                 RngStream projection_rng, RngStream noise_rng);

// Sum of the clipped r x L block projections (block-major) that
// BlockSgdStep would average and perturb.
std::vector<double> BlockSgdPreNoiseSum(
    const Partition& blocks, const std::vector<std::vector<double>>& grads,
    std::size_t rank, std::optional<double> clip, RngStream projection_rng);

// Index (1-based, in [1, steps]) of the iterate a run returns: uniform when
// `uniform` is set, the last one otherwise.
std::size_t ReturnedIterate(std::size_t steps, bool uniform, RngStream rng);

enum class Method {
  kAdam,
  kGalore,
  kDpAdam,
  kNaiveDpGalore,
  kDpGrape,
  kBlockSgd,
};

Method ParseMethod(const std::string& name);
std::string ToString(Method m);
bool IsPrivate(Method m);

struct OptimizerConfig {
  Method method = Method::kDpGrape;
  AdamHyper hyper;
  std::size_t rank = 4;
  std::size_t refresh_every = 100;
  std::uint64_t projector_seed = 0;
  bool reset_moments_on_refresh = false;
  DpOptions dp;
};

// Uniform wrapper over the step functions, owning the optimizer state.
class Optimizer {
 public:
  virtual ~Optimizer() = default;

  virtual void Step(Params& params, const Batch& batch) = 0;
  // Pre-noise clipped sum the next Step would privatize; private methods
  // only.
  virtual std::vector<double> PreNoiseSum(const Params& params,
                                          const Batch& batch) const;
  virtual std::size_t steps_taken() const = 0;

  Method method() const { return config_.method; }
  const OptimizerConfig& config() const { return config_; }

 protected:
  Optimizer(const ModelSpec& spec, const OptimizerConfig& config)
      : spec_(spec), config_(config) {}

  ModelSpec spec_;
  OptimizerConfig config_;
};

std::unique_ptr<Optimizer> MakeOptimizer(const ModelSpec& spec,
                                         const OptimizerConfig& config);

}  // namespace grape

#endif  // GRAPE_OPTIMIZERS_H_
