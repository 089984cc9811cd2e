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

#ifndef V2S_PIPELINE_PIPELINE_H_
#define V2S_PIPELINE_PIPELINE_H_

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "v2s/common/checkpoint.h"
#include "v2s/config/run_config.h"
#include "v2s/corpus/corpus.h"
#include "v2s/diffusion/diffusion.h"
#include "v2s/encoders/encoders.h"
#include "v2s/prompt/prompt.h"
#include "v2s/sampler/sampler.h"

namespace v2s {

enum class Stage { kEncoders, kSpeakerOracle, kPrompts, kDiffusion };

const char* StageName(Stage stage);
Stage ParseStage(const std::string& name);
std::vector<Stage> StageDependencies(Stage stage);
// <ckpt_dir>/<stage>.ckpt
std::filesystem::path StagePath(const std::filesystem::path& ckpt_dir, Stage stage);

// Records the full config as `config.<key>` entries plus its arch hash.
void WriteConfigMetadata(Checkpoint& ckpt, const RunConfig& cfg);
RunConfig ConfigFromCheckpoint(const Checkpoint& ckpt);
// ConfigError naming every architecture key on which they disagree.
void CheckArchitecture(const Checkpoint& ckpt, const RunConfig& cfg);

// Trains one stage on the corpus in `data_dir` and writes its checkpoint to
// `ckpt_dir`. Corpus and mel settings are taken from the dataset manifest.
// With `resume`, the stage's existing checkpoint seeds the parameters and
// its step counter is continued (prompts and diffusion only).
Checkpoint TrainStage(Stage stage, RunConfig cfg, const std::filesystem::path& data_dir,
                      const std::filesystem::path& ckpt_dir, bool resume,
                      std::ostream* log = nullptr);

// Frozen models from a checkpoint directory.
struct ModelBundle {
  RunConfig config;  // from the newest stage, mel norm bounds included
  std::filesystem::path data_dir;
  AvEncoders encoders;
  SpeakerGuidanceEncoder oracle{nullptr};
  PromptHeads heads{nullptr};
  Denoiser denoiser{nullptr};
  NoiseSchedule schedule;

  SpeakerExtractor Extractor() const { return SpeakerExtractor(encoders, heads); }
};

// Loads every stage up to `last`. A missing checkpoint or an architecture
// conflict between stages raises ConfigError.
ModelBundle LoadBundle(const std::filesystem::path& ckpt_dir, Stage last = Stage::kDiffusion);

struct SampledSet {
  torch::Tensor mels;  // [B, n_mels, S]
  double overflow_fraction = 0.0;
  std::vector<TraceRow> trace;  // only for single-row requests
};

// Samples visual rows [B, L, d_vis] in chunks of `chunk`; row i starts from
// the noise seeded by (cfg.seed, ids[i]).
SampledSet SampleUtterances(ModelBundle& bundle, const torch::Tensor& visual,
                            const std::vector<std::string>& ids, const SamplerConfig& cfg,
                            int64_t chunk = 64, bool trace = false);

}  // namespace v2s

#endif  // V2S_PIPELINE_PIPELINE_H_
