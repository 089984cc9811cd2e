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

#include "v2s/common/hashing.h"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <memory>

#include "v2s/common/errors.h"

namespace v2s {

namespace {

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw InternalError("SHA-256 initialisation failed");
    }
  }
  void Update(const void* data, size_t size) {
    if (size > 0) EVP_DigestUpdate(ctx_.get(), data, size);
  }
  std::string HexDigest() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), digest.data(), &len);
    std::string hex;
    hex.reserve(len * 2);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
      std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
      hex += buf;
    }
    return hex;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx_;
};

uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string Sha256Hex(std::string_view bytes) {
  Sha256 h;
  h.Update(bytes.data(), bytes.size());
  return h.HexDigest();
}

std::string HashParameters(
    const std::vector<std::pair<std::string, torch::Tensor>>& named) {
  Sha256 h;
  for (const auto& [name, tensor] : named) {
    h.Update(name.data(), name.size());
    for (int64_t s : tensor.sizes()) h.Update(&s, sizeof(s));
    auto flat = tensor.detach().to(torch::kCPU, torch::kFloat32).contiguous();
    h.Update(flat.data_ptr<float>(), flat.numel() * sizeof(float));
  }
  return h.HexDigest();
}

std::string HashModule(const torch::nn::Module& module) {
  std::vector<std::pair<std::string, torch::Tensor>> named;
  for (const auto& item : module.named_parameters(/*recurse=*/true)) {
    named.emplace_back(item.key(), item.value());
  }
  return HashParameters(named);
}

uint64_t DeriveSeed(uint64_t parent, std::string_view label) {
  // FNV-1a over the label, then mixed with the parent.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return SplitMix64(SplitMix64(parent) ^ h);
}

uint64_t DeriveSeed(uint64_t parent, uint64_t index) {
  return SplitMix64(SplitMix64(parent) + SplitMix64(index ^ 0x5bd1e995ULL));
}

}  // namespace v2s
