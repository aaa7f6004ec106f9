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
#ifndef GRAPE_PARALLEL_H_
#define GRAPE_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace grape {

// Worker count: hardware concurrency, capped by GRAPE_DP_THREADS if set.
std::size_t MaxThreads();

// Runs fn(i) for i in [0, n). Each index writes only its own output slot,
// so results do not depend on the thread count. Falls back to a serial loop
// when `work` (a rough flop estimate) is too small to amortize threads.
void ParallelFor(std::size_t n, std::size_t work,
                 const std::function<void(std::size_t)>& fn);

}  // namespace grape

#endif  // GRAPE_PARALLEL_H_
