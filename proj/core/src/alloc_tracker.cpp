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

#include "sliceformer/alloc_tracker.hpp"

#include <algorithm>

namespace sf {
namespace {
thread_local AllocationScope* active_scope = nullptr;
}  // namespace

AllocationScope::AllocationScope() : parent_(active_scope) { active_scope = this; }

AllocationScope::~AllocationScope() { active_scope = parent_; }

void AllocationScope::on_allocate(std::size_t bytes) noexcept {
  for (AllocationScope* s = active_scope; s != nullptr; s = s->parent_) {
    s->current_ += static_cast<std::int64_t>(bytes);
    s->peak_ = std::max(s->peak_, s->current_);
    s->largest_ = std::max(s->largest_, bytes);
    ++s->count_;
  }
}

void AllocationScope::on_deallocate(std::size_t bytes) noexcept {
  for (AllocationScope* s = active_scope; s != nullptr; s = s->parent_) {
    s->current_ -= static_cast<std::int64_t>(bytes);
  }
}

}  // namespace sf
