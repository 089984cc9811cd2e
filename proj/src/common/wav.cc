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

#include "v2s/common/wav.h"

#include <cmath>
#include <cstdint>
#include <string>

#include "v2s/common/checkpoint.h"
#include "v2s/common/errors.h"

namespace v2s {

namespace {

void Put32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void Put16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

void WriteWav16(const std::filesystem::path& path, const torch::Tensor& samples,
                int sample_rate) {
  if (samples.dim() != 1 || sample_rate <= 0) {
    throw ValidationError("wav output needs a 1-D sample array and a positive rate");
  }
  auto x = samples.to(torch::kFloat32).contiguous();
  const auto* data = x.data_ptr<float>();
  const auto n = static_cast<uint32_t>(x.numel());
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  Put32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  Put32(out, 16);
  Put16(out, 1);  // PCM
  Put16(out, 1);  // mono
  Put32(out, static_cast<uint32_t>(sample_rate));
  Put32(out, static_cast<uint32_t>(sample_rate) * 2);
  Put16(out, 2);
  Put16(out, 16);
  out += "data";
  Put32(out, 2 * n);
  for (uint32_t i = 0; i < n; ++i) {
    const float v = std::isfinite(data[i]) ? std::fmax(-1.0f, std::fmin(1.0f, data[i])) : 0.0f;
    Put16(out, static_cast<uint16_t>(static_cast<int16_t>(std::lrint(v * 32767.0f))));
  }
  WriteFileAtomic(path, out);
}

}  // namespace v2s
