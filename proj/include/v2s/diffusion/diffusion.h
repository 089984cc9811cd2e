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

#ifndef V2S_DIFFUSION_DIFFUSION_H_
#define V2S_DIFFUSION_DIFFUSION_H_

#include <functional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "v2s/corpus/corpus.h"
#include "v2s/encoders/encoders.h"
#include "v2s/nn/training.h"
#include "v2s/prompt/prompt.h"

namespace v2s {

// Linear-beta variance schedule. Index t runs from 1 to T; AlphaBar(0) is 1.
struct NoiseSchedule {
  int64_t T = 0;
  std::vector<double> beta, alpha, alpha_bar;  // entry t-1 holds timestep t

  double AlphaBar(int64_t t) const;
  // alpha_bar gathered at integer timesteps `t` (any shape), float64.
  torch::Tensor AlphaBarAt(const torch::Tensor& t) const;
};

NoiseSchedule MakeSchedule(int64_t T, double beta_start, double beta_end);

// sqrt(ab_t) * m0 + sqrt(1 - ab_t) * eps. `t` is a scalar timestep or an
// int64 tensor [B] applied per leading row.
torch::Tensor QSample(const torch::Tensor& m0, int64_t t, const torch::Tensor& eps,
                      const NoiseSchedule& sched);
torch::Tensor QSample(const torch::Tensor& m0, const torch::Tensor& t,
                      const torch::Tensor& eps, const NoiseSchedule& sched);

enum class Fusion { kSequence, kChannel };

struct DenoiserConfig {
  int64_t mel_dim = 320;
  int64_t feature_dim = 64;  // f_v width
  int64_t speaker_dim = 32;  // s_v width
  int64_t cond_dim = 128;
  int64_t hidden = 128;
  int64_t layers = 4;
  int64_t heads = 4;
  int64_t ff = 256;
  // kSequence puts condition tokens next to audio tokens (length 2L);
  // kChannel adds them onto the audio tokens (length L).
  Fusion fusion = Fusion::kSequence;

  void Validate() const;
};

// Per-frame [f_v || s_v] followed by a linear map to cond_dim.
class ConditionProjectorImpl : public torch::nn::Cloneable<ConditionProjectorImpl> {
 public:
  ConditionProjectorImpl(int64_t feature_dim, int64_t speaker_dim, int64_t cond_dim);
  void reset() override;
  // f_v [B, L, d] (or [L, d]), s_v [B, d_spk] (or [d_spk]) -> [B, L, cond_dim]
  torch::Tensor forward(const torch::Tensor& f_v, const torch::Tensor& s_v);

  torch::nn::Linear proj{nullptr};

 private:
  int64_t feature_dim_, speaker_dim_, cond_dim_;
};
TORCH_MODULE(ConditionProjector);

// Transformer that predicts the clean stacked mel from a noisy one.
class DenoiserImpl : public torch::nn::Cloneable<DenoiserImpl> {
 public:
  explicit DenoiserImpl(const DenoiserConfig& cfg);
  void reset() override;

  torch::Tensor condition(const torch::Tensor& f_v, const torch::Tensor& s_v);
  // m_t [B, L, mel_dim], t int64 [B], c [B, L, cond_dim] -> [B, L, mel_dim]
  torch::Tensor forward(const torch::Tensor& m_t, const torch::Tensor& t,
                        const torch::Tensor& c);

  const DenoiserConfig& config() const { return cfg_; }

 private:
  DenoiserConfig cfg_;
  ConditionProjector projector_{nullptr};
  torch::nn::Linear audio_in_{nullptr}, cond_in_{nullptr}, time_proj_{nullptr};
  torch::nn::Linear out_{nullptr};
  torch::nn::LayerNorm final_norm_{nullptr};
  torch::nn::ModuleList layers_{nullptr};
};
TORCH_MODULE(Denoiser);

using DenoiseFn = std::function<torch::Tensor(const torch::Tensor& m_t,
                                              const torch::Tensor& t,
                                              const torch::Tensor& c)>;

DenoiseFn DenoiseWith(Denoiser net);

// Mean |m0 - denoise(q_sample(m0, t, eps), t, c)| over all elements.
torch::Tensor DiffusionLoss(const DenoiseFn& denoise, const torch::Tensor& m0,
                            const torch::Tensor& c, const torch::Tensor& t,
                            const torch::Tensor& eps, const NoiseSchedule& sched);

struct DiffusionTrainOptions {
  TrainOptions train;
  int64_t max_steps = 0;          // 0 = run every epoch
  std::vector<size_t> items;      // empty = training split
  std::string log_path;           // CSV step,loss,wall_seconds; appended on resume
  int64_t start_step = 0;         // continues the counter when resuming
};

struct DiffusionTrainResult {
  Denoiser denoiser{nullptr};
  int64_t steps = 0;  // including start_step
  double initial_loss = 0.0;
  double final_loss = 0.0;  // mean of the last 50 step losses
  std::vector<double> losses;
};

// Frozen inputs for diffusion training: the stacked mel target and the
// visual features and speaker vector that make up its condition.
struct ConditionInputs {
  torch::Tensor m0;   // [N, L, mel_dim]
  torch::Tensor f_v;  // [N, L, d]
  torch::Tensor s_v;  // [N, d_spk]
};

ConditionInputs PrepareConditionInputs(const Corpus& corpus,
                                       const std::vector<size_t>& items,
                                       SpeakerExtractor& extractor);

// Trains only the denoiser and its projections. Upstream modules must be
// frozen (ConfigError otherwise); drift raises InternalError and a loss
// above ten times the first step's raises TrainingError.
DiffusionTrainResult TrainDiffusion(const Corpus& corpus, SpeakerExtractor& extractor,
                                    SpeakerGuidanceEncoder& oracle,
                                    const DenoiserConfig& cfg, const NoiseSchedule& sched,
                                    const DiffusionTrainOptions& opts,
                                    Denoiser init = nullptr);

}  // namespace v2s

#endif  // V2S_DIFFUSION_DIFFUSION_H_
