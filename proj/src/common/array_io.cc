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

#include "v2s/common/array_io.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "v2s/common/errors.h"

namespace v2s {

static_assert(std::endian::native == std::endian::little,
              "array files are written in host byte order");

std::string EncodeF32m(const torch::Tensor& matrix) {
  if (matrix.dim() != 2) {
    throw ValidationError("f32m arrays must be 2-D, got " +
                          std::to_string(matrix.dim()) + " dims");
  }
  if (matrix.size(0) > std::numeric_limits<uint32_t>::max() ||
      matrix.size(1) > std::numeric_limits<uint32_t>::max()) {
    throw ValidationError("f32m array too large");
  }
  auto contiguous = matrix.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  const uint32_t header[2] = {static_cast<uint32_t>(contiguous.size(0)),
                              static_cast<uint32_t>(contiguous.size(1))};
  const size_t payload = static_cast<size_t>(contiguous.numel()) * sizeof(float);
  std::string bytes(sizeof(header) + payload, '\0');
  std::memcpy(bytes.data(), header, sizeof(header));
  if (payload > 0) {
    std::memcpy(bytes.data() + sizeof(header), contiguous.data_ptr<float>(),
                payload);
  }
  return bytes;
}

torch::Tensor DecodeF32m(const std::string& bytes) {
  uint32_t header[2];
  if (bytes.size() < sizeof(header)) {
    throw PersistenceError("f32m payload shorter than its header");
  }
  std::memcpy(header, bytes.data(), sizeof(header));
  const size_t count = static_cast<size_t>(header[0]) * header[1];
  if (bytes.size() != sizeof(header) + count * sizeof(float)) {
    throw PersistenceError("f32m payload size does not match header " +
                           std::to_string(header[0]) + "x" +
                           std::to_string(header[1]));
  }
  auto out = torch::empty({header[0], header[1]}, torch::kFloat32);
  if (count > 0) {
    std::memcpy(out.data_ptr<float>(), bytes.data() + sizeof(header),
                count * sizeof(float));
  }
  return out;
}

void WriteF32m(const std::filesystem::path& path, const torch::Tensor& matrix) {
  const std::string bytes = EncodeF32m(matrix);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PersistenceError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw PersistenceError("write failed: " + path.string());
}

torch::Tensor ReadF32m(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  try {
    return DecodeF32m(bytes);
  } catch (const PersistenceError& e) {
    throw PersistenceError(path.string() + ": " + e.what());
  }
}

}  // namespace v2s
