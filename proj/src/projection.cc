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
#include "grape/projection.h"

#include "grape/error.h"
#include "grape/rng.h"

namespace grape {

std::uint64_t SubspaceSchedule::LayerSeed(std::size_t step,
                                          std::size_t layer) const {
  return HashWords({master_seed, Window(step), layer});
}

Matrix Projector(const SubspaceSchedule& schedule, std::size_t step,
                 std::size_t layer, std::size_t m) {
  if (schedule.rank == 0) {
    throw InvalidArgumentError("projector rank must be >= 1");
  }
  return GaussianMatrix(RngStream(schedule.LayerSeed(step, layer)), m,
                        schedule.rank,
                        1.0 / static_cast<double>(schedule.rank));
}

Matrix Project(const Matrix& p, const Matrix& g) {
  if (p.rows() != g.rows()) {
    throw InvalidArgumentError("Project: projector " + p.ShapeString() +
                               " vs gradient " + g.ShapeString());
  }
  return MatMulTN(p, g);
}

Matrix BackProject(const Matrix& p, const Matrix& r) {
  if (p.cols() != r.rows()) {
    throw InvalidArgumentError("BackProject: projector " + p.ShapeString() +
                               " vs projected " + r.ShapeString());
  }
  return MatMul(p, r);
}

ProjectorFactory GaussianProjectors(const SubspaceSchedule& schedule) {
  return [schedule](std::size_t step, std::size_t layer,
                    std::size_t fan_in) -> std::optional<Matrix> {
    if (!schedule.Projects(fan_in)) return std::nullopt;
    return Projector(schedule, step, layer, fan_in);
  };
}

#ifdef GRAPE_DP_ENABLE_TEST_HOOKS
ProjectorFactory IdentityProjectors() {
  return [](std::size_t, std::size_t, std::size_t fan_in)
             -> std::optional<Matrix> { return Matrix::Identity(fan_in); };
}
#endif

LentProjector LentProjector::Borrowed(const Matrix& p) {
  LentProjector out;
  out.ptr_ = &p;
  return out;
}

LentProjector LentProjector::Generated(Matrix p) {
  LentProjector out;
  out.charge_ = Charge(MemoryCategory::kProjector, p.size());
  out.owned_ = std::move(p);
  out.ptr_ = &*out.owned_;
  return out;
}

LentProjector::LentProjector(LentProjector&& other) noexcept
    : owned_(std::move(other.owned_)),
      ptr_(other.owned_ ? nullptr : other.ptr_),
      charge_(std::move(other.charge_)) {
  if (owned_) ptr_ = &*owned_;
  other.ptr_ = nullptr;
}

std::vector<double> FlattenForClipping(const PerSampleGrads& projected,
                                       std::size_t i) {
  if (i >= projected.size()) {
    throw InvalidArgumentError("FlattenForClipping: sample " +
                               std::to_string(i) + " out of range");
  }
  return Flatten(projected[i]);
}

}  // namespace grape
