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
#ifndef GRAPE_DP_H_
#define GRAPE_DP_H_

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grape/memory_tracker.h"
#include "grape/model.h"
#include "grape/rng.h"

namespace grape {

// Privacy parameters of a training run.
//
// `sigma` is a noise multiplier: the Gaussian mechanism adds noise with
// standard deviation clip * sigma to the sum of clipped per-sample
// gradients. `clip` is std::nullopt when clipping is disabled.
struct PrivacySpec {
  double epsilon = 0.0;
  double delta = 0.0;
  std::optional<double> clip = 1.0;
  std::optional<double> sigma;
  std::size_t steps = 0;         // T
  std::size_t dataset_size = 0;  // n
  std::size_t batch_size = 0;    // B
};

// min(1, C / ||v||) v. The result has norm <= C and equals `v` bit for bit
// when ||v|| <= C, so clipping is idempotent. `clip` == nullopt is the
// identity. Throws InvalidArgumentError if clip <= 0.
std::vector<double> Clip(std::span<const double> v, std::optional<double> clip);
// Same, in place. Returns the scale that was applied.
double ClipInPlace(std::span<double> v, std::optional<double> clip);

// v + z with z_k ~ N(0, (clip * sigma)^2) drawn in order from a copy of
// `rng`.
std::vector<double> GaussianMechanism(std::span<const double> v, double clip,
                                      double sigma, RngStream rng);

// Upper end of the epsilon range the closed-form calibration covers:
// 2 ln(2 / delta).
double MaxCalibratedEpsilon(double delta);

struct Calibration {
  double sigma = 0.0;  // noise multiplier, see PrivacySpec
  std::vector<std::string> warnings;
};

// sigma = 2 sqrt(T log(1/delta)) / (n epsilon). Requires 0 < epsilon <=
// 2 ln(2/delta), delta in (0, 1), T >= 1 and n >= 1, otherwise throws
// CalibrationError naming the violated bound. Warns when epsilon exceeds
// 2 B^2 T / n^2, the regime the underlying bound was derived for.
Calibration CalibrateSigma(const PrivacySpec& spec);

// Inverse of CalibrateSigma: epsilon guaranteed after `steps` steps at
// noise multiplier `sigma`. Infinite when sigma == 0.
double EpsilonForSigma(double sigma, std::size_t steps,
                       std::size_t dataset_size, double delta);

// Running sum of flat-clipped per-sample gradient sets. All sets must share
// the layout of `like`. Samples are added in order, so splitting a batch
// into micro-batches does not change the sum.
class ClippedSum {
 public:
  ClippedSum(const GradSet& like, std::optional<double> clip);

  void Add(const GradSet& sample);
  std::size_t count() const { return count_; }
  const std::vector<double>& sum() const { return sum_; }

  // (sum + N(0, C^2 sigma^2 I)) / count in the layout of `like`. A zero
  // sigma adds nothing. Throws ConfigurationError if sigma > 0 while
  // clipping is disabled.
  GradSet Privatize(double sigma, RngStream noise) const;

 private:
  GradSet layout_;
  std::optional<double> clip_;
  std::vector<double> sum_;
  std::size_t count_ = 0;
  Charge charge_;
};

// Pre-noise clipped sum of a batch, as computed by a privatized optimizer.
using PreNoiseSumFn = std::function<std::vector<double>(const Batch&)>;
// Overwrites sample `index` of `batch` with a fresh sample.
using ReplacementFn =
    std::function<void(Batch& batch, std::size_t index, RngStream& rng)>;

// Replacement drawing features from N(0, scale^2) and copying the target of
// another row, so labels stay valid.
ReplacementFn GaussianReplacement(double scale = 10.0);

// Largest ||sum(X) - sum(X')||_2 over `swaps` random replace-one neighbours
// X' of `batch`. For a sum of C-clipped vectors this is at most 2C. Throws
// InvalidArgumentError when clipping is disabled, since the sensitivity is
// then unbounded.
double SensitivityProbe(const PreNoiseSumFn& pre_noise_sum, const Batch& batch,
                        std::size_t swaps, RngStream rng,
                        std::optional<double> clip,
                        const ReplacementFn& replace = GaussianReplacement());

}  // namespace grape

#endif  // GRAPE_DP_H_
