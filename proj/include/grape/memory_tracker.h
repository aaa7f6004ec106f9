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
#ifndef GRAPE_MEMORY_TRACKER_H_
#define GRAPE_MEMORY_TRACKER_H_

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>

namespace grape {

// Buffer categories. The first three are the ones the memory model
// predicts; the transient per-sample block and workspace are tracked so a
// run can show where the remaining floats went.
enum class MemoryCategory {
  kGradient = 0,
  kOptimizerState,
  kProjector,
  // Full-size per-sample gradients of the layer currently in the backward
  // pass.
  kSampleGradTransient,
  // Aggregates derived from gradients (clipped sums, projected batch
  // gradients, privatized vectors).
  kWorkspace,
};
inline constexpr std::size_t kNumMemoryCategories = 5;

const char* MemoryCategoryName(MemoryCategory c);

// Live and peak float counts per category. Thread-safe.
class MemoryTracker {
 public:
  MemoryTracker() { Reset(); }
  MemoryTracker(const MemoryTracker&) = delete;
  MemoryTracker& operator=(const MemoryTracker&) = delete;

  void Add(MemoryCategory c, std::size_t floats);
  void Release(MemoryCategory c, std::size_t floats);
  void Reset();

  std::int64_t current(MemoryCategory c) const {
    return current_[Index(c)].load(std::memory_order_relaxed);
  }
  std::int64_t peak(MemoryCategory c) const {
    return peak_[Index(c)].load(std::memory_order_relaxed);
  }
  // Number of Add calls since the last Reset.
  std::int64_t events() const {
    return events_.load(std::memory_order_relaxed);
  }

 private:
  static std::size_t Index(MemoryCategory c) {
    return static_cast<std::size_t>(c);
  }

  std::array<std::atomic<std::int64_t>, kNumMemoryCategories> current_;
  std::array<std::atomic<std::int64_t>, kNumMemoryCategories> peak_;
  std::atomic<std::int64_t> events_;
};

// Tracker receiving charges, or nullptr when tracking is off.
MemoryTracker* ActiveTracker();

// Installs `tracker` as the active tracker for the current scope.
class ScopedTracking {
 public:
  explicit ScopedTracking(MemoryTracker& tracker);
  ~ScopedTracking();
  ScopedTracking(const ScopedTracking&) = delete;
  ScopedTracking& operator=(const ScopedTracking&) = delete;

 private:
  MemoryTracker* previous_;
};

// RAII registration of a live buffer of `floats` doubles. Released on
// destruction against the tracker that was active at construction.
class Charge {
 public:
  Charge() = default;
  Charge(MemoryCategory category, std::size_t floats);
  Charge(Charge&& other) noexcept;
  Charge& operator=(Charge&& other) noexcept;
  Charge(const Charge&) = delete;
  Charge& operator=(const Charge&) = delete;
  ~Charge();

  void Resize(std::size_t floats);
  std::size_t floats() const { return floats_; }

 private:
  void ReleaseAll();

  MemoryTracker* tracker_ = nullptr;
  MemoryCategory category_ = MemoryCategory::kWorkspace;
  std::size_t floats_ = 0;
};

}  // namespace grape

#endif  // GRAPE_MEMORY_TRACKER_H_
