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

#ifndef V2S_SAMPLER_SAMPLER_H_
#define V2S_SAMPLER_SAMPLER_H_

#include <functional>
#include <vector>

#include <torch/torch.h>

#include "v2s/diffusion/diffusion.h"
#include "v2s/prompt/prompt.h"

namespace v2s {

struct SamplerConfig {
  int64_t t_steps = 1000;  // first timestep of the reverse loop
  double lambda = 1000.0;
  int64_t stride = 1;
  uint64_t seed = 0;
  bool guidance = true;

  void Validate(const NoiseSchedule& sched) const;
  bool guided() const { return guidance && lambda != 0.0; }
};

// Stride that visits about `steps` timesteps out of T.
int64_t StrideForSteps(int64_t T, int64_t steps);

// mel [B, n_mels, S] -> unit speaker vectors [B, d_spk]
using AudioSpeakerFn = std::function<torch::Tensor(const torch::Tensor& mel)>;

struct GuidanceResult {
  torch::Tensor m0_hat;  // [B, L, mel_dim]
  torch::Tensor g_spk;   // [B], 1 - cos(s_v, s_a)
  torch::Tensor grad;    // d(sum g_spk) / d m_t, shaped like m_t
};

// Predicts the clean stacked mel, embeds it with `audio_speaker` and
// differentiates the cosine distance to `s_v` back to `m_t`. Rows are
// independent, so the gradient of the sum is the per-row gradient.
GuidanceResult SpeakerGuidance(const torch::Tensor& m_t, int64_t t, const torch::Tensor& c,
                               const torch::Tensor& s_v, const DenoiseFn& denoise,
                               const AudioSpeakerFn& audio_speaker, int64_t n_mels = 80,
                               int64_t stack = 4);

// One deterministic step from timestep t to t - 1.
torch::Tensor DdimStep(const torch::Tensor& m_t, const torch::Tensor& m0_hat,
                       const torch::Tensor& grad, int64_t t, const NoiseSchedule& sched,
                       double lambda);
// Same update between arbitrary cumulative products; used for strides.
torch::Tensor DdimStepBetween(const torch::Tensor& m_t, const torch::Tensor& m0_hat,
                              const torch::Tensor& grad, double alpha_bar_t,
                              double alpha_bar_prev, double lambda);

struct TraceRow {
  int64_t t = 0;
  double g_spk = 0.0;  // batch mean
  double grad_norm = 0.0;
  double state_norm = 0.0;
};

struct SampleResult {
  torch::Tensor mel;               // [B, n_mels, S], clamped to [-1, 1]
  double overflow_fraction = 0.0;  // share of entries clamped
  std::vector<TraceRow> trace;
};

struct SamplerModels {
  DenoiseFn denoise;
  AudioSpeakerFn audio_speaker;
  NoiseSchedule schedule;
  int64_t n_mels = 80;
  int64_t stack = 4;
};

// Reverse loop from the given starting state under condition `c`.
SampleResult SampleFrom(const torch::Tensor& m_start, const torch::Tensor& c,
                        const torch::Tensor& s_v, const SamplerConfig& cfg,
                        const SamplerModels& models, bool trace = false);

// Starting noise [L, mel_dim] for one utterance.
torch::Tensor InitialNoise(int64_t length, int64_t mel_dim, uint64_t seed);

// Full conditional sampling for a batch of visual sequences [B, L, d_vis].
// Row i starts from InitialNoise(.., noise_seeds[i]).
SampleResult Sample(const torch::Tensor& visual, const std::vector<uint64_t>& noise_seeds,
                    const SamplerConfig& cfg, SpeakerExtractor& extractor, Denoiser denoiser,
                    const NoiseSchedule& sched, bool trace = false);

}  // namespace v2s

#endif  // V2S_SAMPLER_SAMPLER_H_
