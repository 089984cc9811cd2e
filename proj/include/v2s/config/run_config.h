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

#ifndef V2S_CONFIG_RUN_CONFIG_H_
#define V2S_CONFIG_RUN_CONFIG_H_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "v2s/corpus/corpus.h"
#include "v2s/diffusion/diffusion.h"
#include "v2s/encoders/encoders.h"
#include "v2s/mel/mel.h"
#include "v2s/nn/training.h"
#include "v2s/prompt/prompt.h"
#include "v2s/sampler/sampler.h"

namespace v2s {

// Every tunable of the pipeline, addressable as flat `section.name` keys.
// Widths shared between modules (visual width, speaker dim, ...) have a
// single key and are copied into each module's config by Sync().
struct RunConfig {
  std::string preset = "toy";

  CorpusConfig corpus;
  MelConfig mel;
  int griffin_lim_iters = 32;

  EncoderConfig encoder;
  TrainOptions encoder_train{20, 32, 1e-3, 0.01, 1};
  OracleConfig oracle;
  TrainOptions oracle_train{20, 32, 1e-3, 0.01, 2};
  PromptConfig prompt;
  TrainOptions prompt_train{80, 16, 3e-3, 0.01, 3};

  DenoiserConfig denoiser;
  int64_t diffusion_steps = 1000;  // T
  double beta_start = 1e-4;
  double beta_end = 0.02;
  TrainOptions diffusion_train{100000, 32, 1e-3, 0.01, 4};
  int64_t diffusion_max_steps = 3000;  // 0 = bounded by epochs only

  SamplerConfig sampler;

  // "toy" (desk-scale defaults) or "paper" (reference hyperparameters).
  static RunConfig Preset(const std::string& name);
  // `key = value` lines, `#` comments. A `preset` line is applied before
  // the other keys regardless of position. Unknown keys raise ConfigError.
  static RunConfig Parse(const std::string& text);
  static RunConfig Load(const std::filesystem::path& path);

  void Set(const std::string& key, const std::string& value);
  std::string Get(const std::string& key) const;
  static std::vector<std::string> Keys();
  static bool IsArchKey(const std::string& key);

  // Every key, one `key = value` line each, in a fixed order.
  std::string Dump() const;
  // Values of the keys that fix tensor shapes or the data layout.
  std::map<std::string, std::string> ArchValues() const;
  std::string ArchHash() const;

  void Sync();
  void Validate() const;
  NoiseSchedule Schedule() const;
};

}  // namespace v2s

#endif  // V2S_CONFIG_RUN_CONFIG_H_
