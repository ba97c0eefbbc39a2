/* Copyright 2026 The Sliceformer Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef SLICEFORMER_ALLOC_TRACKER_HPP_
#define SLICEFORMER_ALLOC_TRACKER_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

namespace sf {

// Counts bytes that pass through TrackingAllocator on the current thread
// while the scope is alive. Scopes nest; an allocation is charged to every
// enclosing scope. Frees of buffers allocated before the scope opened lower
// the running total, so `peak_bytes` is the peak net growth since opening.
class AllocationScope {
 public:
  AllocationScope();
  ~AllocationScope();
  AllocationScope(const AllocationScope&) = delete;
  AllocationScope& operator=(const AllocationScope&) = delete;

  std::int64_t current_bytes() const { return current_; }
  std::int64_t peak_bytes() const { return peak_; }
  std::size_t largest_allocation() const { return largest_; }
  std::size_t allocation_count() const { return count_; }

  static void on_allocate(std::size_t bytes) noexcept;
  static void on_deallocate(std::size_t bytes) noexcept;

 private:
  AllocationScope* parent_;
  std::int64_t current_ = 0;
  std::int64_t peak_ = 0;
  std::size_t largest_ = 0;
  std::size_t count_ = 0;
};

template <class T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <class U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    T* p = std::allocator<T>().allocate(n);
    AllocationScope::on_allocate(n * sizeof(T));
    return p;
  }
  void deallocate(T* p, std::size_t n) noexcept {
    AllocationScope::on_deallocate(n * sizeof(T));
    std::allocator<T>().deallocate(p, n);
  }

  template <class U>
  bool operator==(const TrackingAllocator<U>&) const noexcept {
    return true;
  }
};

using Buffer = std::vector<double, TrackingAllocator<double>>;
using IndexBuffer = std::vector<std::size_t, TrackingAllocator<std::size_t>>;

}  // namespace sf

#endif  // SLICEFORMER_ALLOC_TRACKER_HPP_
