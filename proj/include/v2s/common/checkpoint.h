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

#ifndef V2S_COMMON_CHECKPOINT_H_
#define V2S_COMMON_CHECKPOINT_H_

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace v2s {

// Binary checkpoint container shared by every training stage.
//
// Layout (all integers little-endian):
//   8 bytes   magic "V2SCKPT1"
//   uint32    metadata byte count, followed by UTF-8 `key=value\n` lines
//   uint32    entry count
//   per entry: uint32 name length, name bytes, uint32 rank,
//              rank x int64 dims, float32 payload
//
// Metadata keys are written sorted so identical checkpoints are
// byte-identical.
class Checkpoint {
 public:
  using Metadata = std::map<std::string, std::string>;

  Checkpoint() = default;
  explicit Checkpoint(std::string stage) { metadata_["stage"] = std::move(stage); }

  const std::string& stage() const;

  Metadata& metadata() { return metadata_; }
  const Metadata& metadata() const { return metadata_; }
  // Throws ConfigError when the key is absent.
  const std::string& Meta(const std::string& key) const;
  bool HasMeta(const std::string& key) const { return metadata_.count(key) > 0; }

  // Appends a tensor; names must be unique.
  void Add(const std::string& name, const torch::Tensor& tensor);
  // Adds all parameters of `module` with `prefix` prepended to each name.
  void AddModule(const std::string& prefix, const torch::nn::Module& module);

  bool Has(const std::string& name) const;
  const torch::Tensor& Get(const std::string& name) const;
  // Copies stored values into the module's parameters. Every parameter
  // must be present with an identical shape; no silent reshaping.
  void LoadInto(const std::string& prefix, torch::nn::Module& module) const;

  const std::vector<std::pair<std::string, torch::Tensor>>& entries() const {
    return entries_;
  }

  std::string Serialize() const;
  static Checkpoint Deserialize(const std::string& bytes);

  // Writes via a temporary file and rename so readers never see a partial file.
  void Save(const std::filesystem::path& path) const;
  static Checkpoint Load(const std::filesystem::path& path);

 private:
  Metadata metadata_;
  std::vector<std::pair<std::string, torch::Tensor>> entries_;
  std::map<std::string, size_t> index_;
};

// Atomically replaces `path` with `bytes`.
void WriteFileAtomic(const std::filesystem::path& path, const std::string& bytes);
std::string ReadFileBytes(const std::filesystem::path& path);

}  // namespace v2s

#endif  // V2S_COMMON_CHECKPOINT_H_
