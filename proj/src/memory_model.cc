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
#include "grape/memory_model.h"

#include <algorithm>

#include "grape/error.h"
#include "grape/memory_tracker.h"
#include "grape/optimizers.h"

namespace grape {
namespace {

void Finish(MemoryReport& r) {
  r.total_floats = r.gradient_floats + r.optimizer_state_floats +
                   r.projector_floats;
  r.bytes = 8 * r.total_floats;
}

}  // namespace

MemoryReport PredictMemory(const std::string& method, const ModelSpec& spec,
                           std::size_t batch_size, std::size_t rank) {
  const Method m = ParseMethod(method);
  if (m == Method::kBlockSgd) {
    throw InvalidArgumentError("no memory model for method '" + method + "'");
  }
  if (rank == 0) throw InvalidArgumentError("rank r must be >= 1");
  spec.Validate();

  std::size_t full = 0;       // sum m n
  std::size_t biases = 0;     // sum n, when biases exist
  std::size_t galore = 0;     // sum r_l n, r_l = r or m
  std::size_t galore_p = 0;   // sum r m over projected layers
  std::size_t grape = 0;      // sum r_l n, r_l = r or m
  std::size_t grape_p = 0;    // r max m over projected layers
  for (const auto& l : spec.layers) {
    full += l.fan_in * l.fan_out;
    if (spec.include_bias) biases += l.fan_out;
    if (rank <= std::min(l.fan_in, l.fan_out)) {
      galore += rank * l.fan_out;
      galore_p += rank * l.fan_in;
    } else {
      galore += l.fan_in * l.fan_out;
    }
    if (rank <= l.fan_in) {
      grape += rank * l.fan_out;
      grape_p = std::max(grape_p, rank * l.fan_in);
    } else {
      grape += l.fan_in * l.fan_out;
    }
  }

  MemoryReport r;
  r.method = ToString(m);
  const std::size_t b = batch_size;
  switch (m) {
    case Method::kAdam:
      r.gradient_floats = full + biases;
      r.optimizer_state_floats = 2 * (full + biases);
      break;
    case Method::kGalore:
      r.gradient_floats = full + biases;
      r.optimizer_state_floats = 2 * (galore + biases);
      r.projector_floats = galore_p;
      break;
    case Method::kDpAdam:
      r.gradient_floats = b * (full + biases);
      r.optimizer_state_floats = 2 * (full + biases);
      break;
    case Method::kNaiveDpGalore:
      r.gradient_floats = b * (full + biases);
      r.optimizer_state_floats = 2 * (galore + biases);
      r.projector_floats = galore_p;
      break;
    case Method::kDpGrape:
      r.gradient_floats = b * (grape + biases);
      r.optimizer_state_floats = 2 * (grape + biases);
      r.projector_floats = grape_p;
      break;
    case Method::kBlockSgd:
      break;
  }
  Finish(r);
  return r;
}

TrackedMeasurement TrackedRun(const std::string& method, const ModelSpec& spec,
                              std::size_t batch_size, std::size_t rank,
                              std::size_t steps, std::uint64_t seed) {
  spec.Validate();
  if (batch_size == 0) throw InvalidArgumentError("batch size must be >= 1");
  OptimizerConfig config;
  config.method = ParseMethod(method);
  config.rank = rank;
  config.refresh_every = 2;
  config.projector_seed = seed;
  config.dp.noise_seed = seed + 1;
  config.dp.privacy.clip = 1.0;
  config.dp.privacy.sigma = 1.0;

  RngStream rng(seed);
  const Params initial = InitParams(spec, rng.Substream(1));
  Batch batch;
  batch.inputs = Matrix(batch_size, spec.input_dim());
  RngStream data = rng.Substream(2);
  for (double& x : batch.inputs.data()) x = data.NextNormal();
  const std::size_t classes = spec.output_dim();
  if (spec.loss == Loss::kCrossEntropy) {
    batch.targets = Matrix(batch_size, 1);
    const std::size_t labels = classes == 1 ? 2 : classes;
    for (double& y : batch.targets.data()) {
      y = static_cast<double>(data.NextBelow(labels));
    }
  } else {
    batch.targets = Matrix(batch_size, classes);
    for (double& y : batch.targets.data()) y = data.NextNormal();
  }

  Params params = initial;
  std::unique_ptr<Optimizer> opt;
  std::size_t taken = 0;
  return TrackedRun(
      ToString(config.method),
      [&] {
        // The optimizer lives only inside the tracked scope, so its state
        // charges attach to and are released from the run's tracker.
        if (!opt) opt = MakeOptimizer(spec, config);
        opt->Step(params, batch);
        if (++taken == steps) opt.reset();
      },
      steps);
}

TrackedMeasurement TrackedRun(const std::string& method,
                              const std::function<void()>& step,
                              std::size_t steps) {
  MemoryTracker tracker;
  {
    ScopedTracking scope(tracker);
    for (std::size_t s = 0; s < steps; ++s) step();
  }
  if (tracker.events() == 0) {
    throw ConfigurationError(
        "memory tracking recorded no buffers; the step function is not "
        "instrumented");
  }

  auto peak = [&tracker](MemoryCategory c) {
    return static_cast<std::size_t>(tracker.peak(c));
  };
  TrackedMeasurement out;
  out.measured.method = method;
  out.measured.gradient_floats = peak(MemoryCategory::kGradient);
  out.measured.optimizer_state_floats = peak(MemoryCategory::kOptimizerState);
  out.measured.projector_floats = peak(MemoryCategory::kProjector);
  Finish(out.measured);
  out.sample_grad_transient_floats =
      peak(MemoryCategory::kSampleGradTransient);
  out.workspace_floats = peak(MemoryCategory::kWorkspace);
  return out;
}

void WriteMemoryCsv(std::ostream& out, const MemoryReport& predicted,
                    const MemoryReport& measured, bool header) {
  if (header) out << "method,category,predicted,measured\n";
  const std::string& m = predicted.method;
  out << m << ",gradient," << predicted.gradient_floats << ','
      << measured.gradient_floats << '\n';
  out << m << ",optimizer_state," << predicted.optimizer_state_floats << ','
      << measured.optimizer_state_floats << '\n';
  out << m << ",projector," << predicted.projector_floats << ','
      << measured.projector_floats << '\n';
  out << m << ",total," << predicted.total_floats << ','
      << measured.total_floats << '\n';
}

}  // namespace grape
