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
#include "grape/dp.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "grape/error.h"
#include "grape/matrix.h"

namespace grape {
namespace {

void CheckClip(std::optional<double> clip) {
  if (clip.has_value() && !(*clip > 0.0)) {
    throw InvalidArgumentError("clip threshold C must be positive, got " +
                               std::to_string(*clip));
  }
}

}  // namespace

double ClipInPlace(std::span<double> v, std::optional<double> clip) {
  CheckClip(clip);
  if (!clip.has_value()) return 1.0;
  const double c = *clip;
  const double norm = Norm2(v);
  if (norm <= c) return 1.0;
  if (!std::isfinite(norm)) {
    throw NumericFailureError("Clip: non-finite gradient norm");
  }
  const std::vector<double> original(v.begin(), v.end());
  double scale = c / norm;
  // Round-off can leave the scaled norm a few ulps above C; step the scale
  // down until it is not, which makes a second clip a no-op.
  for (;;) {
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = scale * original[k];
    if (Norm2(v) <= c) break;
    scale = std::nextafter(scale, 0.0);
  }
  return scale;
}

std::vector<double> Clip(std::span<const double> v,
                         std::optional<double> clip) {
  std::vector<double> out(v.begin(), v.end());
  ClipInPlace(out, clip);
  return out;
}

std::vector<double> GaussianMechanism(std::span<const double> v, double clip,
                                      double sigma, RngStream rng) {
  if (sigma < 0.0) {
    throw InvalidArgumentError("GaussianMechanism: sigma must be >= 0");
  }
  std::vector<double> out(v.begin(), v.end());
  if (sigma == 0.0) return out;
  const double sd = clip * sigma;
  for (double& x : out) x += sd * rng.NextNormal();
  return out;
}

double MaxCalibratedEpsilon(double delta) { return 2.0 * std::log(2.0 / delta); }

Calibration CalibrateSigma(const PrivacySpec& spec) {
  if (!(spec.delta > 0.0 && spec.delta < 1.0)) {
    throw CalibrationError("delta must lie in (0, 1), got " +
                           std::to_string(spec.delta));
  }
  if (!(spec.epsilon > 0.0)) {
    throw CalibrationError("epsilon must be > 0, got " +
                           std::to_string(spec.epsilon));
  }
  const double eps_max = MaxCalibratedEpsilon(spec.delta);
  if (spec.epsilon > eps_max) {
    std::ostringstream os;
    os << "epsilon " << spec.epsilon << " exceeds bound 2 ln(2/delta) = "
       << eps_max;
    throw CalibrationError(os.str());
  }
  if (spec.steps == 0) throw CalibrationError("steps T must be >= 1");
  if (spec.dataset_size == 0) {
    throw CalibrationError("dataset size n must be >= 1");
  }
  const double t = static_cast<double>(spec.steps);
  const double n = static_cast<double>(spec.dataset_size);
  Calibration out;
  out.sigma = 2.0 * std::sqrt(t * std::log(1.0 / spec.delta)) /
              (n * spec.epsilon);
  if (spec.batch_size > 0) {
    const double b = static_cast<double>(spec.batch_size);
    const double regime = 2.0 * b * b * t / (n * n);
    if (spec.epsilon > regime) {
      std::ostringstream os;
      os << "epsilon " << spec.epsilon << " > 2 B^2 T / n^2 = " << regime
         << "; the closed-form calibration is outside its derived regime";
      out.warnings.push_back(os.str());
    }
  }
  return out;
}

double EpsilonForSigma(double sigma, std::size_t steps,
                       std::size_t dataset_size, double delta) {
  if (sigma <= 0.0) return std::numeric_limits<double>::infinity();
  return 2.0 * std::sqrt(static_cast<double>(steps) * std::log(1.0 / delta)) /
         (static_cast<double>(dataset_size) * sigma);
}

ClippedSum::ClippedSum(const GradSet& like, std::optional<double> clip)
    : layout_(ZerosLike(like)),
      clip_(clip),
      sum_(FlatSize(like), 0.0),
      charge_(MemoryCategory::kWorkspace, FlatSize(like)) {
  CheckClip(clip);
}

void ClippedSum::Add(const GradSet& sample) {
  std::vector<double> flat = Flatten(sample);
  if (flat.size() != sum_.size()) {
    throw InvalidArgumentError("ClippedSum: sample layout mismatch");
  }
  ClipInPlace(flat, clip_);
  for (std::size_t k = 0; k < flat.size(); ++k) sum_[k] += flat[k];
  ++count_;
}

GradSet ClippedSum::Privatize(double sigma, RngStream noise) const {
  if (count_ == 0) throw InvalidArgumentError("ClippedSum: no samples");
  if (sigma > 0.0 && !clip_.has_value()) {
    throw ConfigurationError(
        "noise multiplier sigma > 0 requires a finite clip threshold");
  }
  std::vector<double> noisy =
      GaussianMechanism(sum_, clip_.value_or(0.0), sigma, noise);
  const double denom = static_cast<double>(count_);
  for (double& x : noisy) x /= denom;
  GradSet out = layout_;
  Unflatten(noisy, out);
  return out;
}

ReplacementFn GaussianReplacement(double scale) {
  return [scale](Batch& batch, std::size_t index, RngStream& rng) {
    for (double& x : batch.inputs.row(index)) x = scale * rng.NextNormal();
    const std::size_t donor = rng.NextBelow(batch.size());
    const std::vector<double> target(batch.targets.row(donor).begin(),
                                     batch.targets.row(donor).end());
    std::ranges::copy(target, batch.targets.row(index).begin());
  };
}

double SensitivityProbe(const PreNoiseSumFn& pre_noise_sum, const Batch& batch,
                        std::size_t swaps, RngStream rng,
                        std::optional<double> clip,
                        const ReplacementFn& replace) {
  if (!clip.has_value()) {
    throw InvalidArgumentError(
        "SensitivityProbe: clipping disabled, sensitivity is unbounded");
  }
  CheckClip(clip);
  if (batch.size() == 0) {
    throw InvalidArgumentError("SensitivityProbe: empty batch");
  }
  const std::vector<double> base = pre_noise_sum(batch);
  double worst = 0.0;
  for (std::size_t s = 0; s < swaps; ++s) {
    Batch neighbour = batch;
    const std::size_t index = rng.NextBelow(batch.size());
    replace(neighbour, index, rng);
    const std::vector<double> other = pre_noise_sum(neighbour);
    if (other.size() != base.size()) {
      throw InvalidArgumentError("SensitivityProbe: sum length changed");
    }
    double d2 = 0.0;
    for (std::size_t k = 0; k < base.size(); ++k) {
      const double d = base[k] - other[k];
      d2 += d * d;
    }
    worst = std::max(worst, std::sqrt(d2));
  }
  return worst;
}

}  // namespace grape
