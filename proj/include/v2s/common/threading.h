// Copyright (c) 2026 The v2s Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef V2S_COMMON_THREADING_H_
#define V2S_COMMON_THREADING_H_

#include <cstdint>
#include <functional>

namespace v2s {

// Worker count from DIFFV2S_THREADS, falling back to the logical core count.
int ConfiguredThreads();

// Applies ConfiguredThreads() to the tensor runtime. Idempotent.
void InitThreading();

// Runs fn(i) for i in [0, n) on up to ConfiguredThreads() workers. The
// first exception thrown by any worker is rethrown on the caller.
void ParallelFor(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace v2s

#endif  // V2S_COMMON_THREADING_H_
