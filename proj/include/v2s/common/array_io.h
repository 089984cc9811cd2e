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

#ifndef V2S_COMMON_ARRAY_IO_H_
#define V2S_COMMON_ARRAY_IO_H_

#include <filesystem>
#include <string>

#include <torch/torch.h>

namespace v2s {

// `.f32m` arrays: uint32 rows, uint32 cols, then rows*cols little-endian
// float32 values in row-major order.
void WriteF32m(const std::filesystem::path& path, const torch::Tensor& matrix);
torch::Tensor ReadF32m(const std::filesystem::path& path);

// Serialized bytes of a 2-D tensor in `.f32m` layout.
std::string EncodeF32m(const torch::Tensor& matrix);
torch::Tensor DecodeF32m(const std::string& bytes);

}  // namespace v2s

#endif  // V2S_COMMON_ARRAY_IO_H_
