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

#include "v2s/sampler/sampler.h"

#include <cmath>

#include "v2s/common/errors.h"
#include "v2s/encoders/encoders.h"
#include "v2s/mel/mel.h"

namespace v2s {

namespace {

void CheckFinite(const torch::Tensor& x, const char* what, int64_t t) {
  if (!torch::isfinite(x).all().item<bool>()) {
    throw NumericalError(std::string("non-finite ") + what + " at t=" + std::to_string(t));
  }
}

}  // namespace

void SamplerConfig::Validate(const NoiseSchedule& sched) const {
  if (t_steps < 1 || t_steps > sched.T) throw ConfigError("sampler t_steps must be in [1, T]");
  if (stride < 1 || stride > t_steps) throw ConfigError("sampler stride must be in [1, T]");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("guidance scale must be finite and >= 0");
  }
}

int64_t StrideForSteps(int64_t T, int64_t steps) {
  if (steps < 1) throw ConfigError("step count must be positive");
  return std::max<int64_t>(1, (T + steps - 1) / steps);
}

GuidanceResult SpeakerGuidance(const torch::Tensor& m_t, int64_t t, const torch::Tensor& c,
                               const torch::Tensor& s_v, const DenoiseFn& denoise,
                               const AudioSpeakerFn& audio_speaker, int64_t n_mels,
                               int64_t stack) {
  torch::AutoGradMode grad_mode(true);
  auto x = m_t.detach().requires_grad_(true);
  auto steps = torch::full({x.size(0)}, t, torch::kInt64);
  auto m0_hat = denoise(x, steps, c);
  auto s_a = audio_speaker(UnstackTensor(m0_hat, static_cast<int>(n_mels),
                                         static_cast<int>(stack)));
  auto g_spk = 1.0 - (L2Normalize(s_v) * L2Normalize(s_a)).sum(-1);
  torch::Tensor grad;
  if (g_spk.requires_grad()) {
    grad = torch::autograd::grad({g_spk.sum()}, {x}, {}, false, false, true)[0];
  }
  if (!grad.defined()) grad = torch::zeros_like(x);
  CheckFinite(grad, "guidance gradient", t);
  return GuidanceResult{m0_hat.detach(), g_spk.detach(), grad};
}

torch::Tensor DdimStepBetween(const torch::Tensor& m_t, const torch::Tensor& m0_hat,
                              const torch::Tensor& grad, double alpha_bar_t,
                              double alpha_bar_prev, double lambda) {
  const double sa = std::sqrt(alpha_bar_t), sn = std::sqrt(1.0 - alpha_bar_t);
  auto eps = (m_t - sa * m0_hat) / sn;
  if (grad.defined() && lambda != 0.0) eps = eps - sn * lambda * grad;
  return std::sqrt(alpha_bar_prev) * ((m_t - sn * eps) / sa) +
         std::sqrt(1.0 - alpha_bar_prev) * eps;
}

torch::Tensor DdimStep(const torch::Tensor& m_t, const torch::Tensor& m0_hat,
                       const torch::Tensor& grad, int64_t t, const NoiseSchedule& sched,
                       double lambda) {
  if (t < 1 || t > sched.T) throw ValidationError("ddim step needs t in [1, T]");
  return DdimStepBetween(m_t, m0_hat, grad, sched.AlphaBar(t), sched.AlphaBar(t - 1), lambda);
}

SampleResult SampleFrom(const torch::Tensor& m_start, const torch::Tensor& c,
                        const torch::Tensor& s_v, const SamplerConfig& cfg,
                        const SamplerModels& models, bool trace) {
  cfg.Validate(models.schedule);
  SampleResult result;
  auto m = m_start;
  for (int64_t t = cfg.t_steps; t >= 1; t -= cfg.stride) {
    const int64_t prev = std::max<int64_t>(t - cfg.stride, 0);
    torch::Tensor m0_hat, grad;
    double g_mean = 0.0;
    if (cfg.guided()) {
      auto g = SpeakerGuidance(m, t, c, s_v, models.denoise, models.audio_speaker,
                               models.n_mels, models.stack);
      m0_hat = g.m0_hat;
      grad = g.grad;
      if (trace) g_mean = g.g_spk.mean().item<double>();
    } else {
      torch::NoGradGuard no_grad;
      m0_hat = models.denoise(m, torch::full({m.size(0)}, t, torch::kInt64), c);
      if (trace) {
        auto s_a = models.audio_speaker(UnstackTensor(
            m0_hat, static_cast<int>(models.n_mels), static_cast<int>(models.stack)));
        g_mean = (1.0 - (L2Normalize(s_v) * L2Normalize(s_a)).sum(-1)).mean().item<double>();
      }
    }
    {
      torch::NoGradGuard no_grad;
      // The step subtracts sqrt(1 - ab_t) * lambda * g from the noise estimate,
      // which ascends g. Feeding the gradient of the cosine similarity rather
      // than of the distance makes the loop pull s_a towards s_v.
      m = DdimStepBetween(m, m0_hat, grad.defined() ? -grad : grad,
                          models.schedule.AlphaBar(t), models.schedule.AlphaBar(prev),
                          cfg.guided() ? cfg.lambda : 0.0);
    }
    CheckFinite(m, "sampler state", t);
    if (trace) {
      result.trace.push_back(TraceRow{t, g_mean, grad.defined() ? grad.norm().item<double>() : 0.0,
                                      m.norm().item<double>()});
    }
  }
  result.overflow_fraction = (m.abs() > 1.0).to(torch::kFloat64).mean().item<double>();
  result.mel = UnstackTensor(m.clamp(-1.0, 1.0), static_cast<int>(models.n_mels),
                             static_cast<int>(models.stack));
  return result;
}

torch::Tensor InitialNoise(int64_t length, int64_t mel_dim, uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  return torch::randn({length, mel_dim}, gen, torch::kFloat32);
}

SampleResult Sample(const torch::Tensor& visual, const std::vector<uint64_t>& noise_seeds,
                    const SamplerConfig& cfg, SpeakerExtractor& extractor, Denoiser denoiser,
                    const NoiseSchedule& sched, bool trace) {
  if (visual.dim() != 3 || visual.size(0) != static_cast<int64_t>(noise_seeds.size())) {
    throw ValidationError("sample expects visual [B, L, d_vis] and one seed per row");
  }
  const auto& dcfg = denoiser->config();
  torch::Tensor c, s_v;
  {
    torch::NoGradGuard no_grad;
    auto sv = extractor.ExtractSv(visual);
    s_v = sv.embedding;
    c = denoiser->condition(sv.features, s_v);
  }
  std::vector<torch::Tensor> noise;
  for (uint64_t seed : noise_seeds) noise.push_back(InitialNoise(visual.size(1), dcfg.mel_dim, seed));

  SamplerModels models;
  models.denoise = DenoiseWith(denoiser);
  models.audio_speaker = [&extractor](const torch::Tensor& mel) {
    return extractor.ExtractSa(mel).embedding;
  };
  models.schedule = sched;
  const MelConfig mel;
  models.n_mels = mel.n_mels;
  models.stack = mel.stack_factor;
  return SampleFrom(torch::stack(noise), c, s_v, cfg, models, trace);
}

}  // namespace v2s
