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

#ifndef V2S_COMMON_WAV_H_
#define V2S_COMMON_WAV_H_

#include <filesystem>

#include <torch/torch.h>

namespace v2s {

// Mono 16-bit PCM RIFF file; samples [N] are clipped to [-1, 1].
void WriteWav16(const std::filesystem::path& path, const torch::Tensor& samples,
                int sample_rate);

}  // namespace v2s

#endif  // V2S_COMMON_WAV_H_
