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
#ifndef GRAPE_MEMORY_MODEL_H_
#define GRAPE_MEMORY_MODEL_H_

// Closed-form float counts for gradients, optimizer states and projectors,
// and instrumented runs that measure the same quantities.
//
// With L layers of shape m_l x n_l (fan-in x fan-out), batch B and rank r:
//
//   method            gradient       optimizer state   projector
//   adam              sum m n        2 sum m n         0
//   galore            sum m n        2 r sum n         r sum m
//   dp-adam           B sum m n      2 sum m n         0
//   naive-dp-galore   B sum m n      2 r sum n         r sum m
//   dp-grape          B r sum n      2 r sum n         r max m
//
// Layers the method leaves unprojected (r > min(m, n) for galore, r > m for
// dp-grape) count with their full m. Bias vectors, when present, are never
// projected and add n_l floats per copy.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "grape/model.h"

namespace grape {

struct MemoryReport {
  std::string method;
  std::size_t gradient_floats = 0;
  std::size_t optimizer_state_floats = 0;
  std::size_t projector_floats = 0;
  std::size_t total_floats = 0;
  std::size_t bytes = 0;  // 8 bytes per float
};

// Throws InvalidArgumentError for an unknown method or r == 0.
MemoryReport PredictMemory(const std::string& method, const ModelSpec& spec,
                           std::size_t batch_size, std::size_t rank);

struct TrackedMeasurement {
  MemoryReport measured;  // peaks of the three predicted categories
  // Peak of full-size per-sample gradient blocks alive during backward.
  std::size_t sample_grad_transient_floats = 0;
  std::size_t workspace_floats = 0;
};

// Runs `step` `steps` times with a fresh tracker installed and returns the
// per-category peaks under the name `method`. Throws ConfigurationError if
// nothing was charged, i.e. the step does not route its buffers through the
// tracker.
TrackedMeasurement TrackedRun(const std::string& method,
                              const std::function<void()>& step,
                              std::size_t steps);

// Peak floats per category over `steps` training steps of `method` on a
// synthetic batch of size `batch_size`. Private methods run with C = 1 and
// sigma = 1. Throws ConfigurationError if the run registered no buffers.
TrackedMeasurement TrackedRun(const std::string& method, const ModelSpec& spec,
                              std::size_t batch_size, std::size_t rank,
                              std::size_t steps, std::uint64_t seed = 0);

// Rows method,category,predicted,measured for gradient, optimizer_state,
// projector and total.
void WriteMemoryCsv(std::ostream& out, const MemoryReport& predicted,
                    const MemoryReport& measured, bool header = true);

}  // namespace grape

#endif  // GRAPE_MEMORY_MODEL_H_
