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
#include "grape/memory_tracker.h"

#include <utility>

namespace grape {
namespace {

std::atomic<MemoryTracker*> g_active{nullptr};

}  // namespace

const char* MemoryCategoryName(MemoryCategory c) {
  switch (c) {
    case MemoryCategory::kGradient:
      return "gradient";
    case MemoryCategory::kOptimizerState:
      return "optimizer_state";
    case MemoryCategory::kProjector:
      return "projector";
    case MemoryCategory::kSampleGradTransient:
      return "sample_grad_transient";
    case MemoryCategory::kWorkspace:
      return "workspace";
  }
  return "unknown";
}

void MemoryTracker::Add(MemoryCategory c, std::size_t floats) {
  events_.fetch_add(1, std::memory_order_relaxed);
  const auto i = Index(c);
  const std::int64_t now =
      current_[i].fetch_add(static_cast<std::int64_t>(floats)) +
      static_cast<std::int64_t>(floats);
  std::int64_t prev = peak_[i].load(std::memory_order_relaxed);
  while (now > prev && !peak_[i].compare_exchange_weak(prev, now)) {
  }
}

void MemoryTracker::Release(MemoryCategory c, std::size_t floats) {
  current_[Index(c)].fetch_sub(static_cast<std::int64_t>(floats));
}

void MemoryTracker::Reset() {
  for (auto& x : current_) x.store(0);
  for (auto& x : peak_) x.store(0);
  events_.store(0);
}

MemoryTracker* ActiveTracker() { return g_active.load(); }

ScopedTracking::ScopedTracking(MemoryTracker& tracker)
    : previous_(g_active.exchange(&tracker)) {}

ScopedTracking::~ScopedTracking() { g_active.store(previous_); }

Charge::Charge(MemoryCategory category, std::size_t floats)
    : tracker_(ActiveTracker()), category_(category), floats_(floats) {
  if (tracker_ != nullptr) tracker_->Add(category_, floats_);
}

Charge::Charge(Charge&& other) noexcept
    : tracker_(std::exchange(other.tracker_, nullptr)),
      category_(other.category_),
      floats_(std::exchange(other.floats_, 0)) {}

Charge& Charge::operator=(Charge&& other) noexcept {
  if (this != &other) {
    ReleaseAll();
    tracker_ = std::exchange(other.tracker_, nullptr);
    category_ = other.category_;
    floats_ = std::exchange(other.floats_, 0);
  }
  return *this;
}

Charge::~Charge() { ReleaseAll(); }

void Charge::Resize(std::size_t floats) {
  if (tracker_ == nullptr) {
    floats_ = floats;
    tracker_ = ActiveTracker();
    if (tracker_ != nullptr) tracker_->Add(category_, floats_);
    return;
  }
  if (floats > floats_) {
    tracker_->Add(category_, floats - floats_);
  } else {
    tracker_->Release(category_, floats_ - floats);
  }
  floats_ = floats;
}

void Charge::ReleaseAll() {
  if (tracker_ != nullptr && floats_ > 0) tracker_->Release(category_, floats_);
  tracker_ = nullptr;
  floats_ = 0;
}

}  // namespace grape
