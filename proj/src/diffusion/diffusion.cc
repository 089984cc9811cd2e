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

#include "v2s/diffusion/diffusion.h"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "v2s/common/errors.h"
#include "v2s/common/hashing.h"
#include "v2s/mel/mel.h"
#include "v2s/nn/transformer.h"

namespace v2s {

namespace {

constexpr int64_t kFinalLossWindow = 50;

bool AllFrozen(const torch::nn::Module& module) {
  for (const auto& p : module.parameters()) {
    if (p.requires_grad()) return false;
  }
  return true;
}

std::string UpstreamHash(SpeakerExtractor& extractor, SpeakerGuidanceEncoder& oracle) {
  return Sha256Hex(extractor.encoders().Hash() + HashModule(*extractor.heads()) +
                   HashModule(*oracle));
}

}  // namespace

double NoiseSchedule::AlphaBar(int64_t t) const {
  if (t < 0 || t > T) throw ValidationError("timestep " + std::to_string(t) + " outside [0, T]");
  return t == 0 ? 1.0 : alpha_bar[t - 1];
}

torch::Tensor NoiseSchedule::AlphaBarAt(const torch::Tensor& t) const {
  if (t.numel() > 0 && (t.min().item<int64_t>() < 1 || t.max().item<int64_t>() > T)) {
    throw ValidationError("timestep outside [1, T]");
  }
  auto table = torch::tensor(alpha_bar, torch::kFloat64);
  return table.index_select(0, (t.reshape({-1}) - 1).to(torch::kInt64)).reshape(t.sizes());
}

NoiseSchedule MakeSchedule(int64_t T, double beta_start, double beta_end) {
  if (T < 1) throw ValidationError("schedule needs T >= 1");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw ValidationError("schedule needs 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.T = T;
  double prod = 1.0;
  for (int64_t i = 0; i < T; ++i) {
    const double b = T == 1 ? beta_start
                            : beta_start + (beta_end - beta_start) * static_cast<double>(i) /
                                               static_cast<double>(T - 1);
    s.beta.push_back(b);
    s.alpha.push_back(1.0 - b);
    prod *= 1.0 - b;
    s.alpha_bar.push_back(prod);
  }
  return s;
}

torch::Tensor QSample(const torch::Tensor& m0, int64_t t, const torch::Tensor& eps,
                      const NoiseSchedule& sched) {
  if (t < 1 || t > sched.T) throw ValidationError("q_sample timestep outside [1, T]");
  if (m0.sizes() != eps.sizes()) throw ValidationError("q_sample shape mismatch");
  const double ab = sched.AlphaBar(t);
  return std::sqrt(ab) * m0 + std::sqrt(1.0 - ab) * eps;
}

torch::Tensor QSample(const torch::Tensor& m0, const torch::Tensor& t,
                      const torch::Tensor& eps, const NoiseSchedule& sched) {
  if (m0.sizes() != eps.sizes()) throw ValidationError("q_sample shape mismatch");
  if (t.dim() != 1 || m0.dim() < 1 || t.size(0) != m0.size(0)) {
    throw ValidationError("q_sample expects one timestep per leading row");
  }
  std::vector<int64_t> view(m0.dim(), 1);
  view[0] = m0.size(0);
  // Both coefficients in float64 first: 1 - ab cancels badly in float32.
  auto ab = sched.AlphaBarAt(t).reshape(view);
  return ab.sqrt().to(m0.scalar_type()) * m0 + (1.0 - ab).sqrt().to(m0.scalar_type()) * eps;
}

void DenoiserConfig::Validate() const {
  if (mel_dim < 1 || feature_dim < 1 || speaker_dim < 1 || cond_dim < 1 || layers < 1 ||
      ff < 1 || heads < 1 || hidden < 2 || hidden % heads != 0 || hidden % 2 != 0) {
    throw ConfigError("invalid denoiser dimensions");
  }
}

ConditionProjectorImpl::ConditionProjectorImpl(int64_t feature_dim, int64_t speaker_dim,
                                               int64_t cond_dim)
    : feature_dim_(feature_dim), speaker_dim_(speaker_dim), cond_dim_(cond_dim) {
  reset();
}

void ConditionProjectorImpl::reset() {
  proj = register_module("proj", torch::nn::Linear(feature_dim_ + speaker_dim_, cond_dim_));
}

torch::Tensor ConditionProjectorImpl::forward(const torch::Tensor& f_v,
                                              const torch::Tensor& s_v) {
  auto f = f_v.dim() == 2 ? f_v.unsqueeze(0) : f_v;
  auto s = s_v.dim() == 1 ? s_v.unsqueeze(0) : s_v;
  if (f.dim() != 3 || s.dim() != 2 || f.size(0) != s.size(0) || f.size(2) != feature_dim_ ||
      s.size(1) != speaker_dim_) {
    throw ValidationError("condition expects f_v [B, L, " + std::to_string(feature_dim_) +
                          "] and s_v [B, " + std::to_string(speaker_dim_) + "]");
  }
  auto rows = torch::cat({f, s.unsqueeze(1).expand({f.size(0), f.size(1), speaker_dim_})}, 2);
  return proj(rows);
}

DenoiserImpl::DenoiserImpl(const DenoiserConfig& cfg) : cfg_(cfg) {
  cfg_.Validate();
  reset();
}

void DenoiserImpl::reset() {
  projector_ = register_module(
      "projector", ConditionProjector(cfg_.feature_dim, cfg_.speaker_dim, cfg_.cond_dim));
  audio_in_ = register_module("audio_in", torch::nn::Linear(cfg_.mel_dim, cfg_.hidden));
  cond_in_ = register_module("cond_in", torch::nn::Linear(cfg_.cond_dim, cfg_.hidden));
  time_proj_ = register_module("time_proj", torch::nn::Linear(cfg_.hidden, cfg_.hidden));
  layers_ = register_module("layers", torch::nn::ModuleList());
  for (int64_t i = 0; i < cfg_.layers; ++i) {
    layers_->push_back(EncoderLayer(TransformerOptions{cfg_.hidden, cfg_.heads, cfg_.ff}));
  }
  final_norm_ = register_module(
      "final_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg_.hidden})));
  out_ = register_module("out", torch::nn::Linear(cfg_.hidden, cfg_.mel_dim));
}

torch::Tensor DenoiserImpl::condition(const torch::Tensor& f_v, const torch::Tensor& s_v) {
  return projector_(f_v, s_v);
}

torch::Tensor DenoiserImpl::forward(const torch::Tensor& m_t, const torch::Tensor& t,
                                    const torch::Tensor& c) {
  if (m_t.dim() != 3 || c.dim() != 3 || m_t.size(2) != cfg_.mel_dim ||
      c.size(2) != cfg_.cond_dim || m_t.size(0) != c.size(0)) {
    throw ValidationError("denoiser expects m_t [B, L, mel_dim] and c [B, L, cond_dim]");
  }
  if (m_t.size(1) != c.size(1)) {
    throw ValidationError("denoiser length mismatch: audio " + std::to_string(m_t.size(1)) +
                          " vs condition " + std::to_string(c.size(1)));
  }
  if (t.dim() != 1 || t.size(0) != m_t.size(0)) {
    throw ValidationError("denoiser expects one timestep per batch row");
  }
  const int64_t length = m_t.size(1);
  auto pe = SinusoidalTable(length, cfg_.hidden).to(m_t.scalar_type()).unsqueeze(0);
  auto temb = time_proj_(SinusoidalTable(t, cfg_.hidden).to(m_t.scalar_type())).unsqueeze(1);
  auto audio = audio_in_(m_t) + pe + temb;
  auto cond = cond_in_(c) + pe + temb;
  auto x = cfg_.fusion == Fusion::kSequence ? torch::cat({audio, cond}, 1) : audio + cond;
  for (const auto& layer : *layers_) x = layer->as<EncoderLayerImpl>()->forward(x);
  return out_(final_norm_(x.narrow(1, 0, length)));
}

DenoiseFn DenoiseWith(Denoiser net) {
  return [net](const torch::Tensor& m_t, const torch::Tensor& t,
               const torch::Tensor& c) mutable {
    return net->forward(m_t, t, c);
  };
}

torch::Tensor DiffusionLoss(const DenoiseFn& denoise, const torch::Tensor& m0,
                            const torch::Tensor& c, const torch::Tensor& t,
                            const torch::Tensor& eps, const NoiseSchedule& sched) {
  auto m_t = QSample(m0, t, eps, sched);
  return (m0 - denoise(m_t, t, c)).abs().mean();
}

ConditionInputs PrepareConditionInputs(const Corpus& corpus,
                                       const std::vector<size_t>& items,
                                       SpeakerExtractor& extractor) {
  torch::NoGradGuard no_grad;
  auto sv = extractor.ExtractSv(StackVisual(corpus, items));
  return ConditionInputs{StackTensor(StackMel(corpus, items)), sv.features, sv.embedding};
}

DiffusionTrainResult TrainDiffusion(const Corpus& corpus, SpeakerExtractor& extractor,
                                    SpeakerGuidanceEncoder& oracle,
                                    const DenoiserConfig& cfg, const NoiseSchedule& sched,
                                    const DiffusionTrainOptions& opts, Denoiser init) {
  if (!extractor.encoders().frozen() || !AllFrozen(*extractor.heads()) || !oracle->frozen()) {
    throw ConfigError("diffusion training requires frozen encoders, prompts and oracle");
  }
  const auto items = opts.items.empty() ? corpus.Indices(Split::kTrain) : opts.items;
  if (items.empty()) throw ValidationError("no utterances to train the denoiser on");

  SeedTensorRng(opts.train.seed);
  DiffusionTrainResult result;
  result.denoiser = init ? init : Denoiser(cfg);
  result.steps = opts.start_step;
  const std::string hash_before = UpstreamHash(extractor, oracle);
  const auto inputs = PrepareConditionInputs(corpus, items, extractor);

  std::ofstream log;
  if (!opts.log_path.empty()) {
    const bool append = opts.start_step > 0 && std::filesystem::exists(opts.log_path);
    log.open(opts.log_path, append ? std::ios::app : std::ios::trunc);
    if (!log) throw PersistenceError("cannot write training log " + opts.log_path);
    if (!append) log << "step,loss,wall_seconds\n";
  }
  const auto start = std::chrono::steady_clock::now();

  torch::optim::AdamW optim(
      result.denoiser->parameters(),
      torch::optim::AdamWOptions(opts.train.lr).weight_decay(opts.train.weight_decay));
  auto gen = at::make_generator<at::CPUGeneratorImpl>(DeriveSeed(opts.train.seed, "noise"));
  std::mt19937_64 rng(DeriveSeed(opts.train.seed, "batches"));
  std::vector<size_t> rows(items.size());
  for (size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const DenoiseFn denoise = DenoiseWith(result.denoiser);

  bool done = false;
  for (int64_t epoch = 0; epoch < opts.train.epochs && !done; ++epoch) {
    for (const auto& batch : ShuffledBatches(rows, opts.train.batch, rng)) {
      auto idx = torch::tensor(std::vector<int64_t>(batch.begin(), batch.end()), torch::kInt64);
      auto m0 = inputs.m0.index_select(0, idx);
      auto c = result.denoiser->condition(inputs.f_v.index_select(0, idx),
                                          inputs.s_v.index_select(0, idx));
      auto t = torch::randint(1, sched.T + 1, {m0.size(0)}, gen, torch::kInt64);
      auto eps = torch::randn(m0.sizes(), gen, torch::kFloat32);
      auto loss = DiffusionLoss(denoise, m0, c, t, eps, sched);
      optim.zero_grad();
      loss.backward();
      optim.step();

      const double value = loss.item<double>();
      if (result.losses.empty()) result.initial_loss = value;
      result.losses.push_back(value);
      ++result.steps;
      if (log) {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log << result.steps << ',' << value << ',' << wall << '\n';
      }
      if (!std::isfinite(value) || value > 10.0 * result.initial_loss) {
        throw TrainingError("denoiser training diverged at step " +
                            std::to_string(result.steps) + " (loss " +
                            std::to_string(value) + ")");
      }
      if (opts.max_steps > 0 && result.steps - opts.start_step >= opts.max_steps) {
        done = true;
        break;
      }
    }
  }

  if (UpstreamHash(extractor, oracle) != hash_before) {
    throw InternalError("frozen upstream parameters changed during denoiser training");
  }
  const int64_t n = static_cast<int64_t>(result.losses.size());
  const int64_t window = std::min<int64_t>(kFinalLossWindow, n);
  for (int64_t i = n - window; i < n; ++i) result.final_loss += result.losses[i];
  if (window > 0) result.final_loss /= static_cast<double>(window);
  return result;
}

}  // namespace v2s
