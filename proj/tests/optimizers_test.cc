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
#include <cmath>
#include <vector>

#include "grape/dp.h"
#include "grape/error.h"
#include "grape/matrix.h"
#include "grape/memory_tracker.h"
#include "grape/optimizers.h"
#include "grape/svd.h"
#include "gtest/gtest.h"

namespace grape {
namespace {

ModelSpec Mlp() {
  return ModelSpec::FromWidths({6, 5, 3}, Activation::kTanh,
                               Loss::kCrossEntropy, true);
}

Batch RandomBatch(const ModelSpec& spec, std::size_t b, std::uint64_t seed) {
  RngStream rng(seed);
  Batch batch;
  batch.inputs = Matrix(b, spec.input_dim());
  for (double& x : batch.inputs.data()) x = 2.0 * rng.NextNormal();
  if (spec.loss == Loss::kCrossEntropy) {
    batch.targets = Matrix(b, 1);
    const std::size_t classes = spec.output_dim() == 1 ? 2 : spec.output_dim();
    for (double& y : batch.targets.data()) {
      y = static_cast<double>(rng.NextBelow(classes));
    }
  } else {
    batch.targets = Matrix(b, spec.output_dim());
    for (double& y : batch.targets.data()) y = rng.NextNormal();
  }
  return batch;
}

std::vector<double> Flat(const Params& p) { return Flatten(AsGradSet(p)); }

DpOptions Private(double sigma, std::optional<double> clip = 1.0) {
  DpOptions dp;
  dp.privacy.clip = clip;
  dp.privacy.sigma = sigma;
  dp.noise_seed = 77;
  return dp;
}

TEST(AdamTest, StepSizeAtFirstStep) {
  AdamHyper h;
  h.lr = 0.01;
  EXPECT_NEAR(AdamStepSize(h, 1), 0.316228 * h.lr, 1e-6 * h.lr);
  EXPECT_NEAR(AdamStepSize(h, 1), h.lr * std::sqrt(0.001) / 0.1, 1e-15);
}

TEST(AdamTest, HyperValidation) {
  AdamHyper h;
  h.beta1 = 1.0;
  EXPECT_THROW(h.Validate(), InvalidArgumentError);
  h = AdamHyper();
  h.phi = 0.0;
  EXPECT_THROW(h.Validate(), InvalidArgumentError);
}

TEST(AdamTest, ZeroBeta1KeepsLastUpdateAsFirstMoment) {
  const ModelSpec spec = Mlp();
  Params p = InitParams(spec, RngStream(1));
  AdamHyper h;
  h.beta1 = 0.0;
  AdamState state;
  const auto none = [](std::size_t) { return LentProjector::None(); };
  for (std::uint64_t s = 0; s < 3; ++s) {
    const GradSet g = BatchGrad(spec, p, RandomBatch(spec, 4, s));
    AdamUpdateProjected(p, g, none, state, h);
    EXPECT_EQ(state.first, g);
  }
}

TEST(AdamTest, FirstStepMovesEveryCoordinateByLearningRate) {
  const ModelSpec spec = Mlp();
  for (double scale : {1e-3, 1.0, 1e3}) {
    Params p = InitParams(spec, RngStream(2));
    const Params before = p;
    GradSet g = BatchGrad(spec, p, RandomBatch(spec, 8, 3));
    for (auto& l : g) {
      l.weight *= scale;
      for (double& b : l.bias) b *= scale;
    }
    AdamState state;
    AdamHyper h;
    h.lr = 0.05;
    AdamUpdateProjected(p, g, [](std::size_t) { return LentProjector::None(); },
                        state, h);
    const std::vector<double> a = Flat(before);
    const std::vector<double> b = Flat(p);
    const std::vector<double> gf = Flatten(g);
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (gf[k] == 0.0) continue;
      // Bias-corrected first step: -lr g / (|g| + phi / sqrt(1 - beta2)).
      const double expected =
          -h.lr * gf[k] /
          (std::abs(gf[k]) + h.phi / std::sqrt(1.0 - h.beta2));
      EXPECT_NEAR((b[k] - a[k]) / expected, 1.0, 1e-9);
    }
  }
}

TEST(AdamTest, ProjectorShapeMismatchThrows) {
  const ModelSpec spec = Mlp();
  Params p = InitParams(spec, RngStream(2));
  GradSet g = BatchGrad(spec, p, RandomBatch(spec, 8, 3));
  AdamState state;
  const Matrix wrong(4, 2);
  EXPECT_THROW(AdamUpdateProjected(
                   p, g, [&](std::size_t) { return LentProjector::Borrowed(wrong); },
                   state, AdamHyper()),
               InvalidArgumentError);
}

TEST(DpAdamTest, InactivePrivatizationEqualsAdam) {
  const ModelSpec spec = Mlp();
  const Batch batch = RandomBatch(spec, 10, 4);
  Params a = InitParams(spec, RngStream(5));
  Params d = a;
  AdamState sa, sd;
  AdamStep(spec, a, batch, sa, AdamHyper());
  DpAdamStep(spec, d, batch, Private(0.0, 1e6), sd, AdamHyper());
  EXPECT_LE(MaxAbsDiff(Flat(a), Flat(d)), 1e-12);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    EXPECT_TRUE(sd.first[l].weight.SameShape(a.weights[l]));
  }
}

TEST(DpAdamTest, NoisyStepsAreReproducible) {
  const ModelSpec spec = Mlp();
  const Batch batch = RandomBatch(spec, 10, 4);
  Params a = InitParams(spec, RngStream(5));
  Params b = a;
  AdamState sa, sb;
  DpAdamStep(spec, a, batch, Private(1.0), sa, AdamHyper());
  DpAdamStep(spec, b, batch, Private(1.0), sb, AdamHyper());
  EXPECT_EQ(Flat(a), Flat(b));
}

TEST(DpGrapeTest, IdentityProjectorsReproduceDpAdam) {
  const ModelSpec spec = Mlp();
  DpGrapeOptions grape;
  grape.factory = IdentityProjectors();
  const DpOptions dp = Private(0.7);
  Params g = InitParams(spec, RngStream(6));
  Params d = g;
  AdamState sg, sd;
  for (std::uint64_t t = 0; t < 50; ++t) {
    const Batch batch = RandomBatch(spec, 8, 100 + t);
    DpGrapeStep(spec, g, batch, grape, dp, sg, AdamHyper());
    DpAdamStep(spec, d, batch, dp, sd, AdamHyper());
  }
  EXPECT_LE(MaxAbsDiff(Flat(g), Flat(d)), 1e-9);
}

TEST(DpGrapeTest, MomentShapesAreProjected) {
  const ModelSpec spec = ModelSpec::FromWidths({6, 5, 3}, Activation::kTanh,
                                               Loss::kCrossEntropy, true);
  DpGrapeOptions grape;
  grape.schedule = {4, 2, 3};
  Params p = InitParams(spec, RngStream(7));
  AdamState state;
  for (std::uint64_t t = 0; t < 3; ++t) {
    DpGrapeStep(spec, p, RandomBatch(spec, 5, t), grape, Private(1.0), state,
                AdamHyper());
    // Both layers have fan-in >= 4, so both are projected.
    EXPECT_EQ(state.first[0].weight.rows(), 4u);
    EXPECT_EQ(state.first[0].weight.cols(), 5u);
    EXPECT_EQ(state.first[1].weight.rows(), 4u);
    EXPECT_EQ(state.first[1].weight.cols(), 3u);
    EXPECT_EQ(state.second[1].bias.size(), 3u);
  }
}

TEST(DpGrapeTest, DescendsWithoutNoiseDespiteSubspaceChurn) {
  const ModelSpec spec = ModelSpec::FromWidths({8, 3}, Activation::kIdentity,
                                               Loss::kSquaredError, true);
  const Batch batch = RandomBatch(spec, 32, 8);
  DpGrapeOptions grape;
  grape.schedule = {2, 1, 9};
  Params p = InitParams(spec, RngStream(9));
  const double before = Evaluate(spec, p, batch).mean_loss;
  AdamState state;
  AdamHyper h;
  h.lr = 0.01;
  for (int t = 0; t < 200; ++t) {
    DpGrapeStep(spec, p, batch, grape, Private(0.0, std::nullopt), state, h);
  }
  EXPECT_LT(Evaluate(spec, p, batch).mean_loss, before);
}

TEST(DpGrapeTest, MicroBatchingDoesNotChangeTheStep) {
  const ModelSpec spec = Mlp();
  const Batch batch = RandomBatch(spec, 12, 10);
  DpGrapeOptions grape;
  grape.schedule = {3, 5, 1};
  DpOptions whole = Private(1.0);
  DpOptions split = whole;
  split.micro_batch = 5;
  Params a = InitParams(spec, RngStream(11));
  Params b = a;
  AdamState sa, sb;
  DpGrapeStep(spec, a, batch, grape, whole, sa, AdamHyper());
  DpGrapeStep(spec, b, batch, grape, split, sb, AdamHyper());
  EXPECT_EQ(Flat(a), Flat(b));
}

TEST(DpGrapeTest, MissingSigmaWithClippingIsAConfigurationError) {
  const ModelSpec spec = Mlp();
  Params p = InitParams(spec, RngStream(1));
  AdamState state;
  DpOptions dp;
  dp.privacy.clip = 1.0;
  EXPECT_THROW(DpGrapeStep(spec, p, RandomBatch(spec, 3, 1), DpGrapeOptions(),
                           dp, state, AdamHyper()),
               ConfigurationError);
  OptimizerConfig c;
  c.method = Method::kDpGrape;
  EXPECT_THROW(MakeOptimizer(spec, c), ConfigurationError);
}

TEST(DpGrapeTest, MomentResetFlagZeroesMomentsAtRefresh) {
  const ModelSpec spec = Mlp();
  DpGrapeOptions grape;
  grape.schedule = {3, 2, 1};
  grape.reset_moments_on_refresh = true;
  Params p = InitParams(spec, RngStream(1));
  AdamState state;
  const DpOptions dp = Private(0.5);
  DpGrapeStep(spec, p, RandomBatch(spec, 4, 1), grape, dp, state, AdamHyper());
  EXPECT_EQ(state.moment_steps, 1u);  // step 1
  DpGrapeStep(spec, p, RandomBatch(spec, 4, 2), grape, dp, state, AdamHyper());
  EXPECT_EQ(state.moment_steps, 1u);  // step 2 starts a new window
  DpGrapeStep(spec, p, RandomBatch(spec, 4, 3), grape, dp, state, AdamHyper());
  EXPECT_EQ(state.moment_steps, 2u);
  EXPECT_EQ(state.step, 3u);
}

TEST(DpGrapeTest, OnlyOneLayersFullGradientsAndOneProjectorAreAlive) {
  const ModelSpec spec = ModelSpec::FromWidths(
      {12, 30, 8, 4}, Activation::kTanh, Loss::kCrossEntropy, false);
  DpGrapeOptions grape;
  grape.schedule = {3, 1, 5};
  Params p = InitParams(spec, RngStream(1));
  AdamState state;
  MemoryTracker tracker;
  {
    ScopedTracking scope(tracker);
    DpGrapeStep(spec, p, RandomBatch(spec, 6, 2), grape, Private(1.0), state,
                AdamHyper());
  }
  EXPECT_EQ(tracker.peak(MemoryCategory::kSampleGradTransient), 6 * 12 * 30);
  EXPECT_EQ(tracker.peak(MemoryCategory::kProjector), 3 * 30);
  EXPECT_EQ(tracker.peak(MemoryCategory::kGradient), 6 * 3 * (30 + 8 + 4));
}

// Straightforward GaLore written directly from the update rule.
class ReferenceGalore {
 public:
  ReferenceGalore(const ModelSpec& spec, std::size_t rank, std::size_t every)
      : spec_(spec), rank_(rank), every_(every) {}

  void Step(Params& p, const Batch& batch, const AdamHyper& h) {
    ++t_;
    const GradSet g = BatchGrad(spec_, p, batch);
    const std::size_t layers = spec_.num_layers();
    if (u_.empty()) {
      u_.resize(layers);
      m_.resize(layers);
      v_.resize(layers);
      mb_.resize(layers);
      vb_.resize(layers);
    }
    const double alpha = h.lr * std::sqrt(1 - std::pow(h.beta2, t_)) /
                         (1 - std::pow(h.beta1, t_));
    for (std::size_t l = 0; l < layers; ++l) {
      const Matrix& gw = g[l].weight;
      const bool projected =
          rank_ <= std::min(gw.rows(), gw.cols());
      if (projected && (t_ == 1 || (every_ > 0 && t_ % every_ == 0))) {
        u_[l] = TopKSvd(gw, rank_).u;
      }
      const Matrix r = projected ? MatMulTN(u_[l], gw) : gw;
      if (m_[l].empty()) {
        m_[l] = Matrix(r.rows(), r.cols());
        v_[l] = m_[l];
        mb_[l].assign(g[l].bias.size(), 0.0);
        vb_[l] = mb_[l];
      }
      Matrix d(r.rows(), r.cols());
      for (std::size_t k = 0; k < r.size(); ++k) {
        m_[l].data()[k] = h.beta1 * m_[l].data()[k] + (1 - h.beta1) * r.data()[k];
        v_[l].data()[k] = h.beta2 * v_[l].data()[k] +
                          (1 - h.beta2) * r.data()[k] * r.data()[k];
        d.data()[k] = m_[l].data()[k] / (std::sqrt(v_[l].data()[k]) + h.phi);
      }
      const Matrix full = projected ? MatMul(u_[l], d) : d;
      for (std::size_t k = 0; k < full.size(); ++k) {
        p.weights[l].data()[k] -= alpha * full.data()[k];
      }
      for (std::size_t k = 0; k < g[l].bias.size(); ++k) {
        const double gb = g[l].bias[k];
        mb_[l][k] = h.beta1 * mb_[l][k] + (1 - h.beta1) * gb;
        vb_[l][k] = h.beta2 * vb_[l][k] + (1 - h.beta2) * gb * gb;
        p.biases[l][k] -= alpha * mb_[l][k] / (std::sqrt(vb_[l][k]) + h.phi);
      }
    }
  }

 private:
  ModelSpec spec_;
  std::size_t rank_;
  std::size_t every_;
  std::size_t t_ = 0;
  std::vector<Matrix> u_, m_, v_;
  std::vector<std::vector<double>> mb_, vb_;
};

TEST(GaloreTest, MatchesReferenceImplementation) {
  const ModelSpec spec = ModelSpec::FromWidths({7, 6, 2}, Activation::kTanh,
                                               Loss::kCrossEntropy, true);
  Params a = InitParams(spec, RngStream(12));
  Params b = a;
  GaloreState state;
  const GaloreOptions options{3, 4};
  ReferenceGalore ref(spec, 3, 4);
  AdamHyper h;
  h.lr = 0.02;
  for (std::uint64_t t = 0; t < 10; ++t) {
    const Batch batch = RandomBatch(spec, 9, 200 + t);
    GaloreStep(spec, a, batch, state, options, h);
    ref.Step(b, batch, h);
  }
  EXPECT_LE(MaxAbsDiff(Flat(a), Flat(b)), 1e-10);
  // The 6 x 2 output layer cannot hold rank 3 and stays full-space.
  EXPECT_TRUE(state.projectors[0].has_value());
  EXPECT_FALSE(state.projectors[1].has_value());
}

TEST(GaloreTest, NeverRefreshesWhenFrequencyIsZero) {
  const ModelSpec spec = Mlp();
  Params p = InitParams(spec, RngStream(13));
  GaloreState state;
  GaloreStep(spec, p, RandomBatch(spec, 6, 1), state, {2, 0}, AdamHyper());
  const Matrix first = *state.projectors[0];
  for (std::uint64_t t = 2; t < 12; ++t) {
    GaloreStep(spec, p, RandomBatch(spec, 6, t), state, {2, 0}, AdamHyper());
  }
  EXPECT_EQ(*state.projectors[0], first);
}

TEST(GaloreTest, ExactRankRGradientKeepsItsColumnSpace) {
  const ModelSpec spec = ModelSpec::FromWidths({6, 5}, Activation::kIdentity,
                                               Loss::kSquaredError, false);
  Params p = InitParams(spec, RngStream(1));
  const Params before = p;
  const Matrix basis = TopKSvd(GaussianMatrix(RngStream(2), 6, 2, 1.0), 2).u;
  GradSet g(1);
  g[0].weight = MatMul(basis, GaussianMatrix(RngStream(3), 2, 5, 1.0));
  GaloreState state;
  GaloreApply(spec, p, g, state, {2, 1}, AdamHyper());
  Matrix delta = p.weights[0];
  delta -= before.weights[0];
  // The update lies in span(basis): removing that component leaves zero.
  const Matrix residual = delta - MatMul(basis, MatMulTN(basis, delta));
  EXPECT_LE(MaxAbs(residual), 1e-12);
}

TEST(NaiveDpGaloreTest, InactivePrivatizationEqualsGalore) {
  const ModelSpec spec = Mlp();
  Params a = InitParams(spec, RngStream(14));
  Params b = a;
  GaloreState sa, sb;
  const GaloreOptions options{2, 3};
  for (std::uint64_t t = 0; t < 50; ++t) {
    const Batch batch = RandomBatch(spec, 7, 300 + t);
    GaloreStep(spec, a, batch, sa, options, AdamHyper());
    NaiveDpGaloreStep(spec, b, batch, Private(0.0, std::nullopt), sb, options,
                      AdamHyper());
  }
  EXPECT_LE(MaxAbsDiff(Flat(a), Flat(b)), 1e-9);
}

TEST(NaiveDpGaloreTest, SubspaceDependsOnlyOnPrivatizedGradient) {
  const ModelSpec spec = Mlp();
  const Params p = InitParams(spec, RngStream(15));
  const GradSet noisy = PrivatizeFullGradient(spec, p, RandomBatch(spec, 6, 1),
                                              1, Private(1.0));
  // Different parameters (hence different raw gradients) with the same
  // privatized gradient pick the same subspace.
  Params p1 = p;
  Params p2 = InitParams(spec, RngStream(16));
  GaloreState s1, s2;
  GaloreApply(spec, p1, noisy, s1, {2, 1}, AdamHyper());
  GaloreApply(spec, p2, noisy, s2, {2, 1}, AdamHyper());
  EXPECT_EQ(*s1.projectors[0], *s2.projectors[0]);
  EXPECT_EQ(*s1.projectors[0], TopKSvd(noisy[0].weight, 2).u);
}

TEST(NaiveDpGaloreTest, StoresFullPerSampleGradients) {
  const ModelSpec spec = ModelSpec::FromWidths({9, 7, 4}, Activation::kTanh,
                                               Loss::kCrossEntropy, false);
  Params p = InitParams(spec, RngStream(1));
  GaloreState state;
  MemoryTracker tracker;
  {
    ScopedTracking scope(tracker);
    NaiveDpGaloreStep(spec, p, RandomBatch(spec, 5, 2), Private(1.0), state,
                      {2, 1}, AdamHyper());
  }
  EXPECT_EQ(tracker.peak(MemoryCategory::kGradient), 5 * (9 * 7 + 7 * 4));
}

TEST(SensitivityTest, EveryPrivateOptimizerStaysWithinTwoC) {
  const ModelSpec spec = Mlp();
  const Params p = InitParams(spec, RngStream(17));
  const Batch batch = RandomBatch(spec, 10, 18);
  for (Method m : {Method::kDpAdam, Method::kNaiveDpGalore, Method::kDpGrape,
                   Method::kBlockSgd}) {
    for (double c : {0.05, 1.0}) {
      OptimizerConfig config;
      config.method = m;
      config.rank = 2;
      config.dp = Private(1.0, c);
      const auto opt = MakeOptimizer(spec, config);
      const double worst = SensitivityProbe(
          [&](const Batch& x) { return opt->PreNoiseSum(p, x); }, batch, 200,
          RngStream(19), c);
      EXPECT_LE(worst, 2 * c + 1e-9) << ToString(m);
      EXPECT_GT(worst, 0.0) << ToString(m);
    }
  }
}

TEST(BlockSgdTest, SingleBlockRankOneIsAProjectedSgdStep) {
  const std::vector<double> w = {0.5, -1.0, 2.0};
  const std::vector<std::vector<double>> grads = {{1.0, 2.0, 3.0},
                                                  {-1.0, 0.0, 1.0}};
  const Partition blocks = {{0, 1, 2}};
  BlockSgdOptions o;
  o.rank = 1;
  o.lr = 0.1;
  o.clip = std::nullopt;
  RngStream proj(5);
  const std::vector<double> out =
      BlockSgdStep(w, blocks, grads, o, proj, RngStream(6));
  const Matrix pm = GaussianMatrix(proj.Substream(0), 3, 1, 1.0);
  const std::vector<double> g = {0.0, 1.0, 2.0};  // mean gradient
  double pg = 0.0;
  for (std::size_t k = 0; k < 3; ++k) pg += pm(k, 0) * g[k];
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(out[k], w[k] - o.lr * pm(k, 0) * pg, 1e-14);
  }
}

TEST(BlockSgdTest, FlatClipBoundsTheWholeBlockMatrix) {
  const Partition blocks = {{0, 2}, {1, 3, 4}};
  const std::vector<std::vector<double>> one = {{10, -20, 30, 5, 7}};
  for (double c : {0.1, 1.0, 3.0}) {
    const std::vector<double> s =
        BlockSgdPreNoiseSum(blocks, one, 2, c, RngStream(1));
    EXPECT_EQ(s.size(), 4u);
    EXPECT_LE(Norm2(s), c);
    EXPECT_NEAR(Norm2(s), c, 1e-12);
  }
}

TEST(BlockSgdTest, PartitionValidation) {
  EXPECT_THROW(ValidatePartition({{0, 1}, {1, 2}}, 3), InvalidArgumentError);
  EXPECT_THROW(ValidatePartition({{0, 1}}, 3), InvalidArgumentError);
  EXPECT_THROW(ValidatePartition({{0, 5}}, 2), InvalidArgumentError);
  EXPECT_THROW(ValidatePartition({{0, 1}, {}}, 2), InvalidArgumentError);
  EXPECT_NO_THROW(ValidatePartition({{2, 0}, {1}}, 3));
  const ModelSpec spec = Mlp();
  EXPECT_NO_THROW(ValidatePartition(LayerPartition(spec), spec.NumParams()));
}

TEST(BlockSgdTest, NoiseConventionConvertsMultiplier) {
  PrivacySpec p;
  p.clip = 2.0;
  p.sigma = 0.25;
  EXPECT_DOUBLE_EQ(BlockSgdNoiseStd(p), 0.5);
}

// One-layer, one-output, batch-of-one problem: the block-SGD direction and
// DP-GRAPE's privatized direction (with SGD instead of Adam) share a
// distribution. Compares mean and covariance over independent draws.
TEST(BlockSgdTest, MatchesDpGrapeDirectionInDistribution) {
  const ModelSpec spec = ModelSpec::FromWidths({5, 1}, Activation::kIdentity,
                                               Loss::kSquaredError, false);
  const Params p = InitParams(spec, RngStream(20));
  Batch batch;
  batch.inputs = Matrix::FromRows({{1.0, -2.0, 0.5, 1.5, -1.0}});
  batch.targets = Matrix::FromRows({{3.0}});
  const std::size_t r = 2;
  const double c = 1.0;
  const double sigma = 0.3;
  const std::size_t draws = 100000;
  const std::size_t d = 5;

  const std::vector<double> g = Flatten(ComputePerSampleGrads(spec, p, batch)[0]);
  DpGrapeOptions grape;
  grape.schedule = {r, 1, 21};
  const DpOptions dp = Private(sigma, c);
  BlockSgdOptions o;
  o.rank = r;
  o.lr = 1.0;
  o.clip = c;
  o.noise_std = BlockSgdNoiseStd(dp.privacy);
  const std::vector<double> zero(d, 0.0);

  std::vector<double> mean_a(d, 0.0), mean_b(d, 0.0);
  Matrix cov_a(d, d), cov_b(d, d);
  for (std::size_t t = 1; t <= draws; ++t) {
    const GradSet noisy = DpGrapePrivatize(spec, p, batch, t, grape, dp);
    const Matrix dir_a = BackProject(Projector(grape.schedule, t, 0, d),
                                     noisy[0].weight);
    const std::vector<double> out =
        BlockSgdStep(zero, {{0, 1, 2, 3, 4}}, {g}, o,
                     RngStream(HashWords({1, t})), RngStream(HashWords({2, t})));
    for (std::size_t i = 0; i < d; ++i) {
      const double a = dir_a(i, 0);
      const double b = -out[i];
      mean_a[i] += a;
      mean_b[i] += b;
      for (std::size_t j = 0; j < d; ++j) {
        cov_a(i, j) += a * dir_a(j, 0);
        cov_b(i, j) += b * -out[j];
      }
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    mean_a[i] /= draws;
    mean_b[i] /= draws;
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      cov_a(i, j) = cov_a(i, j) / draws - mean_a[i] * mean_a[j];
      cov_b(i, j) = cov_b(i, j) / draws - mean_b[i] * mean_b[j];
    }
  }
  std::vector<double> mean_diff(d);
  for (std::size_t i = 0; i < d; ++i) mean_diff[i] = mean_a[i] - mean_b[i];
  EXPECT_LE(Norm2(mean_diff) / Norm2(mean_b), 0.05);
  EXPECT_LE(FrobeniusNorm(cov_a - cov_b) / FrobeniusNorm(cov_b), 0.05);
}

TEST(ReturnedIterateTest, LastOrUniform) {
  EXPECT_EQ(ReturnedIterate(17, false, RngStream(1)), 17u);
  std::vector<int> seen(6, 0);
  for (std::uint64_t s = 0; s < 600; ++s) {
    const std::size_t t = ReturnedIterate(5, true, RngStream(s));
    ASSERT_GE(t, 1u);
    ASSERT_LE(t, 5u);
    ++seen[t];
  }
  for (std::size_t t = 1; t <= 5; ++t) EXPECT_GT(seen[t], 80);
}

TEST(MethodTest, NamesRoundTrip) {
  for (Method m : {Method::kAdam, Method::kGalore, Method::kDpAdam,
                   Method::kNaiveDpGalore, Method::kDpGrape,
                   Method::kBlockSgd}) {
    EXPECT_EQ(ParseMethod(ToString(m)), m);
  }
  EXPECT_THROW(ParseMethod("sgd"), InvalidArgumentError);
  EXPECT_FALSE(IsPrivate(Method::kGalore));
  EXPECT_TRUE(IsPrivate(Method::kNaiveDpGalore));
}

TEST(OptimizerTest, NonPrivateMethodsHaveNoPreNoiseSum) {
  const ModelSpec spec = Mlp();
  OptimizerConfig c;
  c.method = Method::kAdam;
  const auto opt = MakeOptimizer(spec, c);
  EXPECT_THROW(opt->PreNoiseSum(InitParams(spec, RngStream(1)),
                                RandomBatch(spec, 2, 1)),
               InvalidArgumentError);
}

}  // namespace
}  // namespace grape
