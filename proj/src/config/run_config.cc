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

#include "v2s/config/run_config.h"

#include <charconv>
#include <fstream>
#include <sstream>
#include <variant>

#include "v2s/common/errors.h"
#include "v2s/common/hashing.h"

namespace v2s {

namespace {

using Slot = std::variant<int*, int64_t*, uint64_t*, double*, bool*, std::string*, Fusion*>;

struct Field {
  const char* key;
  bool arch;
  Slot slot;
};

std::vector<Field> Fields(RunConfig& c) {
  return {
      {"preset", false, &c.preset},
      {"corpus.speakers", true, &c.corpus.n_speakers},
      {"corpus.utterances_per_speaker", true, &c.corpus.utts_per_speaker},
      {"corpus.seed", true, &c.corpus.master_seed},
      {"corpus.frames", true, &c.corpus.frames},
      {"corpus.visual_dim", true, &c.corpus.d_vis},
      {"corpus.vocab", true, &c.corpus.vocab},
      {"corpus.heldout_speakers", true, &c.corpus.heldout_speakers},
      {"corpus.visual_noise", true, &c.corpus.visual_noise},
      {"corpus.offset_scale", true, &c.corpus.offset_scale},
      {"corpus.token_gain", true, &c.corpus.token_gain},
      {"corpus.speaker_gain", true, &c.corpus.speaker_gain},
      {"corpus.breath_gain", true, &c.corpus.breath_gain},
      {"corpus.noise_floor", true, &c.corpus.noise_floor},
      {"mel.n_mels", true, &c.mel.n_mels},
      {"mel.f_min", true, &c.mel.f_min},
      {"mel.f_max", true, &c.mel.f_max},
      {"mel.log_floor", true, &c.mel.log_floor},
      {"mel.griffin_lim_iters", false, &c.griffin_lim_iters},
      {"encoder.dim", true, &c.encoder.dim},
      {"encoder.layers", true, &c.encoder.layers},
      {"encoder.heads", true, &c.encoder.heads},
      {"encoder.ff", true, &c.encoder.ff},
      {"encoder.epochs", false, &c.encoder_train.epochs},
      {"encoder.batch", false, &c.encoder_train.batch},
      {"encoder.lr", false, &c.encoder_train.lr},
      {"encoder.weight_decay", false, &c.encoder_train.weight_decay},
      {"encoder.seed", false, &c.encoder_train.seed},
      {"speaker.dim", true, &c.oracle.dim},
      {"oracle.hidden", true, &c.oracle.hidden},
      {"oracle.epochs", false, &c.oracle_train.epochs},
      {"oracle.batch", false, &c.oracle_train.batch},
      {"oracle.lr", false, &c.oracle_train.lr},
      {"oracle.weight_decay", false, &c.oracle_train.weight_decay},
      {"oracle.seed", false, &c.oracle_train.seed},
      {"prompt.tau", false, &c.prompt.tau},
      {"prompt.init_std", false, &c.prompt.init_std},
      {"prompt.epochs", false, &c.prompt_train.epochs},
      {"prompt.batch", false, &c.prompt_train.batch},
      {"prompt.lr", false, &c.prompt_train.lr},
      {"prompt.weight_decay", false, &c.prompt_train.weight_decay},
      {"prompt.seed", false, &c.prompt_train.seed},
      {"diffusion.layers", true, &c.denoiser.layers},
      {"diffusion.heads", true, &c.denoiser.heads},
      {"diffusion.hidden", true, &c.denoiser.hidden},
      {"diffusion.ff", true, &c.denoiser.ff},
      {"diffusion.cond_dim", true, &c.denoiser.cond_dim},
      {"diffusion.fusion", true, &c.denoiser.fusion},
      {"diffusion.T", true, &c.diffusion_steps},
      {"diffusion.beta_start", true, &c.beta_start},
      {"diffusion.beta_end", true, &c.beta_end},
      {"diffusion.epochs", false, &c.diffusion_train.epochs},
      {"diffusion.batch", false, &c.diffusion_train.batch},
      {"diffusion.lr", false, &c.diffusion_train.lr},
      {"diffusion.weight_decay", false, &c.diffusion_train.weight_decay},
      {"diffusion.seed", false, &c.diffusion_train.seed},
      {"diffusion.max_steps", false, &c.diffusion_max_steps},
      {"sampler.lambda", false, &c.sampler.lambda},
      {"sampler.stride", false, &c.sampler.stride},
      {"sampler.seed", false, &c.sampler.seed},
      {"sampler.guidance", false, &c.sampler.guidance},
  };
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value '" + value + "' for " + key);
  }
  return out;
}

template <typename T>
std::string FormatNumber(T v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct Assign {
  const std::string& key;
  const std::string& value;
  void operator()(int* p) const { *p = ParseNumber<int>(key, value); }
  void operator()(int64_t* p) const { *p = ParseNumber<int64_t>(key, value); }
  void operator()(uint64_t* p) const { *p = ParseNumber<uint64_t>(key, value); }
  void operator()(double* p) const { *p = ParseNumber<double>(key, value); }
  void operator()(std::string* p) const { *p = value; }
  void operator()(bool* p) const {
    if (value == "true" || value == "1") *p = true;
    else if (value == "false" || value == "0") *p = false;
    else throw ConfigError("invalid boolean '" + value + "' for " + key);
  }
  void operator()(Fusion* p) const {
    if (value == "sequence") *p = Fusion::kSequence;
    else if (value == "channel") *p = Fusion::kChannel;
    else throw ConfigError(key + " must be 'sequence' or 'channel'");
  }
};

struct Render {
  std::string operator()(int* p) const { return FormatNumber(*p); }
  std::string operator()(int64_t* p) const { return FormatNumber(*p); }
  std::string operator()(uint64_t* p) const { return FormatNumber(*p); }
  std::string operator()(double* p) const { return FormatNumber(*p); }
  std::string operator()(bool* p) const { return *p ? "true" : "false"; }
  std::string operator()(std::string* p) const { return *p; }
  std::string operator()(Fusion* p) const {
    return *p == Fusion::kSequence ? "sequence" : "channel";
  }
};

const Field& FindField(const std::vector<Field>& fields, const std::string& key) {
  for (const auto& f : fields) {
    if (key == f.key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

RunConfig RunConfig::Preset(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "paper") {
    c.encoder = EncoderConfig{c.corpus.d_vis, 320, 1024, 24, 16, 4096};
    c.oracle.dim = 256;
    c.oracle.hidden = 512;
    c.prompt_train.lr = 1e-4;
    c.prompt_train.batch = 64;
    c.denoiser.layers = 8;
    c.denoiser.heads = 4;
    c.denoiser.hidden = 512;
    c.denoiser.ff = 1024;
    c.denoiser.cond_dim = 512;
    c.diffusion_train.lr = 1e-4;
    c.diffusion_train.batch = 64;
    c.diffusion_max_steps = 300000;
  } else if (name != "toy") {
    throw ConfigError("unknown preset '" + name + "' (expected toy or paper)");
  }
  c.Sync();
  return c;
}

RunConfig RunConfig::Parse(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string preset = "toy";
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + " is not key = value");
    }
    auto key = Trim(line.substr(0, eq));
    auto value = Trim(line.substr(eq + 1));
    if (key == "preset") preset = value;
    else pairs.emplace_back(std::move(key), std::move(value));
  }
  RunConfig c = Preset(preset);
  for (const auto& [k, v] : pairs) c.Set(k, v);
  c.Sync();
  c.Validate();
  return c;
}

RunConfig RunConfig::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str());
}

void RunConfig::Set(const std::string& key, const std::string& value) {
  if (key == "preset") throw ConfigError("preset can only be chosen when parsing");
  auto fields = Fields(*this);
  std::visit(Assign{key, value}, FindField(fields, key).slot);
}

std::string RunConfig::Get(const std::string& key) const {
  auto fields = Fields(const_cast<RunConfig&>(*this));
  return std::visit(Render{}, FindField(fields, key).slot);
}

std::vector<std::string> RunConfig::Keys() {
  RunConfig c;
  std::vector<std::string> keys;
  for (const auto& f : Fields(c)) keys.emplace_back(f.key);
  return keys;
}

bool RunConfig::IsArchKey(const std::string& key) {
  RunConfig c;
  auto fields = Fields(c);
  return FindField(fields, key).arch;
}

std::string RunConfig::Dump() const {
  std::string out;
  for (const auto& f : Fields(const_cast<RunConfig&>(*this))) {
    out += std::string(f.key) + " = " + std::visit(Render{}, f.slot) + "\n";
  }
  return out;
}

std::map<std::string, std::string> RunConfig::ArchValues() const {
  std::map<std::string, std::string> out;
  for (const auto& f : Fields(const_cast<RunConfig&>(*this))) {
    if (f.arch) out[f.key] = std::visit(Render{}, f.slot);
  }
  return out;
}

std::string RunConfig::ArchHash() const {
  std::string text;
  for (const auto& [k, v] : ArchValues()) text += k + "=" + v + "\n";
  return Sha256Hex(text);
}

void RunConfig::Sync() {
  encoder.d_vis = corpus.d_vis;
  encoder.audio_in = static_cast<int64_t>(mel.n_mels) * mel.stack_factor;
  oracle.n_mels = mel.n_mels;
  prompt.d_spk = oracle.dim;
  denoiser.mel_dim = encoder.audio_in;
  denoiser.feature_dim = encoder.dim;
  denoiser.speaker_dim = oracle.dim;
  sampler.t_steps = diffusion_steps;
}

void RunConfig::Validate() const {
  corpus.Validate();
  mel.Validate();
  denoiser.Validate();
  if (encoder.dim < 1 || encoder.layers < 2 || encoder.heads < 1 ||
      encoder.dim % encoder.heads != 0 || encoder.ff < 1) {
    throw ConfigError("invalid encoder dimensions");
  }
  if (oracle.dim < 1 || oracle.hidden < 1) throw ConfigError("invalid speaker dimensions");
  if (!(prompt.tau > 0.0)) throw ConfigError("prompt.tau must be positive");
  for (const auto* t : {&encoder_train, &oracle_train, &prompt_train, &diffusion_train}) {
    if (t->epochs < 0 || t->batch < 1 || !(t->lr > 0.0) || t->weight_decay < 0.0) {
      throw ConfigError("training options need epochs >= 0, batch >= 1, lr > 0");
    }
  }
  if (diffusion_max_steps < 0) throw ConfigError("diffusion.max_steps must be >= 0");
  if (griffin_lim_iters < 1) throw ConfigError("mel.griffin_lim_iters must be positive");
  sampler.Validate(Schedule());
}

NoiseSchedule RunConfig::Schedule() const {
  try {
    return MakeSchedule(diffusion_steps, beta_start, beta_end);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace v2s
