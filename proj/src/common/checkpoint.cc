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

#include "v2s/common/checkpoint.h"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "v2s/common/errors.h"

namespace v2s {

namespace {

constexpr char kMagic[8] = {'V', '2', 'S', 'C', 'K', 'P', 'T', '1'};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T Pod() {
    T v;
    Raw(&v, sizeof(T));
    return v;
  }
  std::string Str(size_t n) {
    Need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void Raw(void* out, size_t n) {
    Need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool Done() const { return pos_ == bytes_.size(); }

 private:
  void Need(size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw PersistenceError("checkpoint truncated at byte " + std::to_string(pos_));
    }
  }
  const std::string& bytes_;
  size_t pos_ = 0;
};

template <typename T>
void PutPod(std::string& out, T v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

const std::string& Checkpoint::stage() const { return Meta("stage"); }

const std::string& Checkpoint::Meta(const std::string& key) const {
  auto it = metadata_.find(key);
  if (it == metadata_.end()) {
    throw ConfigError("checkpoint metadata lacks key '" + key + "'");
  }
  return it->second;
}

void Checkpoint::Add(const std::string& name, const torch::Tensor& tensor) {
  if (index_.count(name)) throw InternalError("duplicate checkpoint entry " + name);
  index_[name] = entries_.size();
  entries_.emplace_back(
      name, tensor.detach().to(torch::kCPU, torch::kFloat32).contiguous().clone());
}

void Checkpoint::AddModule(const std::string& prefix,
                           const torch::nn::Module& module) {
  for (const auto& p : module.named_parameters(/*recurse=*/true)) {
    Add(prefix + p.key(), p.value());
  }
}

bool Checkpoint::Has(const std::string& name) const { return index_.count(name) > 0; }

const torch::Tensor& Checkpoint::Get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("checkpoint lacks entry " + name);
  return entries_[it->second].second;
}

void Checkpoint::LoadInto(const std::string& prefix,
                          torch::nn::Module& module) const {
  torch::NoGradGuard no_grad;
  for (auto& p : module.named_parameters(/*recurse=*/true)) {
    const std::string name = prefix + p.key();
    const torch::Tensor& stored = Get(name);
    if (stored.sizes() != p.value().sizes()) {
      std::ostringstream msg;
      msg << "shape mismatch for " << name << ": checkpoint " << stored.sizes()
          << " vs model " << p.value().sizes();
      throw ConfigError(msg.str());
    }
    p.value().copy_(stored.to(p.value().dtype()));
  }
}

std::string Checkpoint::Serialize() const {
  std::string meta;
  for (const auto& [k, v] : metadata_) {
    if (k.find_first_of("=\n") != std::string::npos ||
        v.find('\n') != std::string::npos) {
      throw ValidationError("metadata key/value may not contain '=' or newlines: " + k);
    }
    meta += k + "=" + v + "\n";
  }
  std::string out(kMagic, sizeof(kMagic));
  PutPod<uint32_t>(out, static_cast<uint32_t>(meta.size()));
  out += meta;
  PutPod<uint32_t>(out, static_cast<uint32_t>(entries_.size()));
  for (const auto& [name, t] : entries_) {
    PutPod<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out += name;
    PutPod<uint32_t>(out, static_cast<uint32_t>(t.dim()));
    for (int64_t s : t.sizes()) PutPod<int64_t>(out, s);
    out.append(reinterpret_cast<const char*>(t.data_ptr<float>()),
               t.numel() * sizeof(float));
  }
  return out;
}

Checkpoint Checkpoint::Deserialize(const std::string& bytes) {
  Reader r(bytes);
  char magic[sizeof(kMagic)];
  r.Raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw PersistenceError("not a checkpoint file (bad magic)");
  }
  Checkpoint ckpt;
  std::istringstream meta(r.Str(r.Pod<uint32_t>()));
  for (std::string line; std::getline(meta, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw PersistenceError("bad metadata line: " + line);
    ckpt.metadata_[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const uint32_t count = r.Pod<uint32_t>();
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = r.Str(r.Pod<uint32_t>());
    const uint32_t rank = r.Pod<uint32_t>();
    std::vector<int64_t> dims(rank);
    for (auto& d : dims) {
      d = r.Pod<int64_t>();
      if (d < 0) throw PersistenceError("negative dimension in " + name);
    }
    auto t = torch::empty(dims, torch::kFloat32);
    r.Raw(t.data_ptr<float>(), t.numel() * sizeof(float));
    ckpt.Add(name, t);
  }
  if (!r.Done()) throw PersistenceError("trailing bytes after checkpoint entries");
  return ckpt;
}

void Checkpoint::Save(const std::filesystem::path& path) const {
  WriteFileAtomic(path, Serialize());
}

Checkpoint Checkpoint::Load(const std::filesystem::path& path) {
  try {
    return Deserialize(ReadFileBytes(path));
  } catch (const PersistenceError& e) {
    throw PersistenceError(path.string() + ": " + e.what());
  }
}

void WriteFileAtomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw PersistenceError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw PersistenceError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw PersistenceError("rename to " + path.string() + " failed: " + ec.message());
}

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace v2s
