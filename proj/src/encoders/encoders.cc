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

#include "v2s/encoders/encoders.h"

#include "v2s/common/errors.h"
#include "v2s/common/hashing.h"
#include "v2s/mel/mel.h"

namespace v2s {

namespace {

torch::Tensor Batched(const torch::Tensor& x) {
  if (x.dim() == 2) return x.unsqueeze(0);
  if (x.dim() == 3) return x;
  throw ValidationError("expected [L, d] or [B, L, d] input");
}

}  // namespace

torch::Tensor L2Normalize(const torch::Tensor& x) {
  return x / x.norm(2, -1, /*keepdim=*/true).clamp_min(1e-12);
}

FrontendImpl::FrontendImpl(int64_t in_dim, int64_t out_dim)
    : in_dim_(in_dim), out_dim_(out_dim) {
  reset();
}

void FrontendImpl::reset() {
  proj_ = register_module("proj", torch::nn::Linear(in_dim_, out_dim_));
}

torch::Tensor FrontendImpl::forward(const torch::Tensor& x) {
  if (x.dim() < 2 || x.size(-1) != in_dim_) {
    throw ValidationError("frontend expects frames of width " + std::to_string(in_dim_) +
                          ", got " + (x.dim() ? std::to_string(x.size(-1)) : "scalar"));
  }
  return torch::gelu(proj_(x));
}

PromptMask PromptMask::Make(int64_t length) {
  auto allowed = torch::ones({length + 1, length + 1}, torch::kBool);
  allowed.index_put_({torch::indexing::Slice(1, torch::indexing::None), 0}, false);
  return PromptMask{allowed};
}

EncoderStackImpl::EncoderStackImpl(const EncoderConfig& cfg) : cfg_(cfg) {
  if (cfg.layers < 2) throw ValidationError("encoder stack needs at least 2 layers");
  reset();
}

void EncoderStackImpl::reset() {
  layers_ = register_module("layers", torch::nn::ModuleList());
  const TransformerOptions opts{cfg_.dim, cfg_.heads, cfg_.ff};
  for (int64_t i = 0; i < cfg_.layers; ++i) layers_->push_back(EncoderLayer(opts));
  final_norm_ = register_module(
      "final_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg_.dim})));
}

torch::Tensor EncoderStackImpl::Embed(const torch::Tensor& e) {
  auto x = Batched(e);
  if (x.size(-1) != cfg_.dim) {
    throw ValidationError("encoder input width " + std::to_string(x.size(-1)) +
                          " != " + std::to_string(cfg_.dim));
  }
  if (!positional_) return x;
  return x + SinusoidalTable(x.size(1), cfg_.dim).to(x.dtype()).unsqueeze(0);
}

torch::Tensor EncoderStackImpl::BatchPrompt(const torch::Tensor& prompt,
                                            int64_t batch) {
  if (prompt.dim() == 1 && prompt.size(0) == cfg_.dim) {
    return prompt.view({1, 1, cfg_.dim}).expand({batch, 1, cfg_.dim});
  }
  if (prompt.dim() == 2 && prompt.size(0) == batch && prompt.size(1) == cfg_.dim) {
    return prompt.unsqueeze(1);
  }
  throw ValidationError("prompt must be [d] or [B, d] with d=" + std::to_string(cfg_.dim));
}

torch::Tensor EncoderStackImpl::encode(const torch::Tensor& e) {
  auto x = Embed(e);
  for (const auto& layer : *layers_) x = layer->as<EncoderLayer>()->forward(x);
  return final_norm_(x);
}

PromptedOutput EncoderStackImpl::forward_with_prompt(const torch::Tensor& prompt,
                                                     const torch::Tensor& e) {
  auto x = Embed(e);
  auto k = BatchPrompt(prompt, x.size(0)).to(x.dtype());
  for (const auto& module : *layers_) {
    auto* layer = module->as<EncoderLayer>();
    // Row 0 of the mask: the prompt attends over itself and every feature.
    auto k_next = layer->forward_query(k, torch::cat({k, x}, 1));
    // Rows 1..L: features attend only to features.
    x = layer->forward(x);
    k = k_next;
  }
  return PromptedOutput{final_norm_(k).squeeze(1), final_norm_(x)};
}

PromptedOutput EncoderStackImpl::forward_masked(const torch::Tensor& prompt,
                                                const torch::Tensor& e) {
  auto x = Embed(e);
  const int64_t length = x.size(1);
  auto tokens = torch::cat({BatchPrompt(prompt, x.size(0)).to(x.dtype()), x}, 1);
  const auto mask = PromptMask::Make(length);
  for (const auto& layer : *layers_) {
    tokens = layer->as<EncoderLayer>()->forward(tokens, mask.allowed);
  }
  tokens = final_norm_(tokens);
  return PromptedOutput{tokens.select(1, 0), tokens.narrow(1, 1, length)};
}

void EncoderStackImpl::freeze() {
  FreezeParameters(*this);
  frozen_ = true;
}

AvEncoders AvEncoders::Create(const EncoderConfig& cfg) {
  AvEncoders enc;
  enc.visual_frontend = Frontend(cfg.d_vis, cfg.dim);
  enc.audio_frontend = Frontend(cfg.audio_in, cfg.dim);
  enc.visual = EncoderStack(cfg);
  enc.audio = EncoderStack(cfg);
  return enc;
}

torch::Tensor AvEncoders::VisualEmbed(const torch::Tensor& visual) {
  return visual_frontend(visual);
}

torch::Tensor AvEncoders::AudioEmbed(const torch::Tensor& mel) {
  return audio_frontend(StackTensor(mel));
}

void AvEncoders::Freeze() {
  FreezeParameters(*visual_frontend);
  FreezeParameters(*audio_frontend);
  visual->freeze();
  audio->freeze();
}

bool AvEncoders::frozen() const { return visual->frozen() && audio->frozen(); }

std::string AvEncoders::Hash() const {
  Checkpoint tmp;
  Save(tmp);
  return HashParameters(tmp.entries());
}

void AvEncoders::Save(Checkpoint& ckpt) const {
  ckpt.AddModule("visual_frontend.", *visual_frontend);
  ckpt.AddModule("audio_frontend.", *audio_frontend);
  ckpt.AddModule("visual_stack.", *visual);
  ckpt.AddModule("audio_stack.", *audio);
}

void AvEncoders::Load(const Checkpoint& ckpt) {
  ckpt.LoadInto("visual_frontend.", *visual_frontend);
  ckpt.LoadInto("audio_frontend.", *audio_frontend);
  ckpt.LoadInto("visual_stack.", *visual);
  ckpt.LoadInto("audio_stack.", *audio);
}

AvEncoders AvEncoders::Clone() const {
  AvEncoders out;
  out.visual_frontend = Frontend(std::dynamic_pointer_cast<FrontendImpl>(visual_frontend->clone()));
  out.audio_frontend = Frontend(std::dynamic_pointer_cast<FrontendImpl>(audio_frontend->clone()));
  out.visual = EncoderStack(std::dynamic_pointer_cast<EncoderStackImpl>(visual->clone()));
  out.audio = EncoderStack(std::dynamic_pointer_cast<EncoderStackImpl>(audio->clone()));
  // clone() copies values but not requires_grad flags.
  if (frozen()) out.Freeze();
  return out;
}

void AvEncoders::To(torch::Dtype dtype) {
  visual_frontend->to(dtype);
  audio_frontend->to(dtype);
  visual->to(dtype);
  audio->to(dtype);
}

SpeakerGuidanceEncoderImpl::SpeakerGuidanceEncoderImpl(const OracleConfig& cfg)
    : cfg_(cfg) {
  reset();
}

void SpeakerGuidanceEncoderImpl::reset() {
  in_ = register_module("in", torch::nn::Linear(cfg_.n_mels, cfg_.hidden));
  mid_ = register_module("mid", torch::nn::Linear(cfg_.hidden, cfg_.hidden));
  emb_ = register_module("emb", torch::nn::Linear(cfg_.hidden, cfg_.dim));
}

torch::Tensor SpeakerGuidanceEncoderImpl::forward(const torch::Tensor& mel) {
  auto m = mel.dim() == 2 ? mel.unsqueeze(0) : mel;
  if (m.dim() != 3 || m.size(1) != cfg_.n_mels) {
    throw ValidationError("speaker encoder expects [B, " + std::to_string(cfg_.n_mels) +
                          ", S] mel input");
  }
  auto frames = m.transpose(1, 2);  // [B, S, n_mels]
  auto h = torch::gelu(mid_(torch::gelu(in_(frames))));
  return L2Normalize(emb_(h.mean(1)));
}

void SpeakerGuidanceEncoderImpl::freeze() {
  FreezeParameters(*this);
  frozen_ = true;
}

}  // namespace v2s
