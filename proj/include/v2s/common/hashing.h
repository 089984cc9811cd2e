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

#ifndef V2S_COMMON_HASHING_H_
#define V2S_COMMON_HASHING_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

namespace v2s {

// Lower-case hex SHA-256 digest.
std::string Sha256Hex(std::string_view bytes);

// Digest over (name, shape, float bytes) of every parameter, in order.
std::string HashParameters(
    const std::vector<std::pair<std::string, torch::Tensor>>& named);
std::string HashModule(const torch::nn::Module& module);

// Stable 64-bit seed derived from a parent seed and a label, so that
// per-item randomness does not depend on iteration order.
uint64_t DeriveSeed(uint64_t parent, std::string_view label);
uint64_t DeriveSeed(uint64_t parent, uint64_t index);

}  // namespace v2s

#endif  // V2S_COMMON_HASHING_H_
