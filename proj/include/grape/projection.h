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
#ifndef GRAPE_PROJECTION_H_
#define GRAPE_PROJECTION_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "grape/matrix.h"
#include "grape/memory_tracker.h"
#include "grape/model.h"

namespace grape {

// Stateless schedule of per-layer projector seeds.
//
// The seed of layer l at step t is HashWords(master_seed, t - t mod F, l),
// so seeds change exactly when t mod F == 0 and any step can be replayed.
// refresh_every == 0 means the subspace never changes.
struct SubspaceSchedule {
  std::size_t rank = 1;           // r
  std::size_t refresh_every = 1;  // F
  std::uint64_t master_seed = 0;

  std::uint64_t Window(std::size_t step) const {
    return refresh_every == 0 ? 0 : step - step % refresh_every;
  }
  std::uint64_t LayerSeed(std::size_t step, std::size_t layer) const;
  // True when `step` starts a new subspace window.
  bool RefreshesAt(std::size_t step) const {
    return refresh_every != 0 && step % refresh_every == 0;
  }
  // Layers whose fan-in is below the rank stay unprojected.
  bool Projects(std::size_t fan_in) const { return rank <= fan_in; }
};

// m x r projector with N(0, 1/r) entries regenerated from the schedule.
// Identical (schedule, step, layer, m) give bit-identical matrices.
Matrix Projector(const SubspaceSchedule& schedule, std::size_t step,
                 std::size_t layer, std::size_t m);

// R = P^T G. Throws InvalidArgumentError if row counts differ.
Matrix Project(const Matrix& p, const Matrix& g);
// P R. Throws InvalidArgumentError if inner dimensions differ.
Matrix BackProject(const Matrix& p, const Matrix& r);

// Returns the projector of (step, layer, fan_in), or nullopt when the layer
// is left unprojected.
using ProjectorFactory = std::function<std::optional<Matrix>(
    std::size_t step, std::size_t layer, std::size_t fan_in)>;

ProjectorFactory GaussianProjectors(const SubspaceSchedule& schedule);

#ifdef GRAPE_DP_ENABLE_TEST_HOOKS
// P = I for every layer. Makes projected training coincide with full-space
// training; exists for equivalence tests only.
ProjectorFactory IdentityProjectors();
#endif

// A projector handed to an update: borrowed from optimizer state, freshly
// generated (and charged as projector memory while alive), or absent.
class LentProjector {
 public:
  static LentProjector None() { return LentProjector(); }
  static LentProjector Borrowed(const Matrix& p);
  static LentProjector Generated(Matrix p);

  const Matrix* get() const { return ptr_; }
  explicit operator bool() const { return ptr_ != nullptr; }

  LentProjector(LentProjector&& other) noexcept;
  LentProjector& operator=(LentProjector&&) = delete;

 private:
  LentProjector() = default;

  std::optional<Matrix> owned_;
  const Matrix* ptr_ = nullptr;
  Charge charge_;
};

// Sample i's projected layer gradients and unprojected biases, flattened in
// the GradSet layout. Throws InvalidArgumentError for an out-of-range i.
std::vector<double> FlattenForClipping(const PerSampleGrads& projected,
                                       std::size_t i);

}  // namespace grape

#endif  // GRAPE_PROJECTION_H_
