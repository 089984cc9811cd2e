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

#ifndef V2S_ENCODERS_ENCODERS_H_
#define V2S_ENCODERS_ENCODERS_H_

#include <string>

#include <torch/torch.h>

#include "v2s/common/checkpoint.h"
#include "v2s/nn/transformer.h"

namespace v2s {

// Frozen stand-ins for a pretrained audio-visual representation model.
// Reference scale is dim 1024, 24 layers, 16 heads; the defaults are toy scale.
struct EncoderConfig {
  int64_t d_vis = 16;
  int64_t audio_in = 320;  // stacked mel width
  int64_t dim = 64;
  int64_t layers = 4;
  int64_t heads = 4;
  int64_t ff = 128;
};

// Per-frame affine map followed by GELU: [..., L, in] -> [..., L, dim].
class FrontendImpl : public torch::nn::Cloneable<FrontendImpl> {
 public:
  FrontendImpl(int64_t in_dim, int64_t out_dim);
  void reset() override;
  torch::Tensor forward(const torch::Tensor& x);
  int64_t in_dim() const { return in_dim_; }

 private:
  int64_t in_dim_, out_dim_;
  torch::nn::Linear proj_{nullptr};
};
TORCH_MODULE(Frontend);

// Attention pattern for a sequence with a prompt token at index 0: the
// prompt reads every position, feature tokens never read the prompt.
struct PromptMask {
  torch::Tensor allowed;  // [(L+1) x (L+1)] bool

  static PromptMask Make(int64_t length);
};

struct PromptedOutput {
  torch::Tensor prompt_state;  // [B, d], final-layer prompt slot
  torch::Tensor features;      // [B, L, d]
};

// Stack of transformer layers with sinusoidal positions added at the input
// and a final layer norm. Accepts [L, d] or [B, L, d]; outputs are batched.
class EncoderStackImpl : public torch::nn::Cloneable<EncoderStackImpl> {
 public:
  explicit EncoderStackImpl(const EncoderConfig& cfg);
  void reset() override;

  torch::Tensor encode(const torch::Tensor& e);

  // Prompt token prepended under PromptMask. Features are computed by the
  // same ops as encode(), so they match it bit for bit.
  PromptedOutput forward_with_prompt(const torch::Tensor& prompt,
                                     const torch::Tensor& e);

  // Dense reference: runs the (L+1)-token sequence with an explicit mask.
  PromptedOutput forward_masked(const torch::Tensor& prompt, const torch::Tensor& e);

  void set_positional(bool enabled) { positional_ = enabled; }
  bool positional() const { return positional_; }
  void freeze();
  bool frozen() const { return frozen_; }
  int64_t dim() const { return cfg_.dim; }
  const EncoderConfig& config() const { return cfg_; }

 private:
  torch::Tensor Embed(const torch::Tensor& e);
  torch::Tensor BatchPrompt(const torch::Tensor& prompt, int64_t batch);

  EncoderConfig cfg_;
  bool positional_ = true;
  bool frozen_ = false;
  torch::nn::ModuleList layers_{nullptr};
  torch::nn::LayerNorm final_norm_{nullptr};
};
TORCH_MODULE(EncoderStack);

// Visual and audio frontends plus their feature extractors.
struct AvEncoders {
  Frontend visual_frontend{nullptr};
  Frontend audio_frontend{nullptr};
  EncoderStack visual{nullptr};
  EncoderStack audio{nullptr};

  static AvEncoders Create(const EncoderConfig& cfg);

  // [.., L, d_vis] -> [.., L, d]
  torch::Tensor VisualEmbed(const torch::Tensor& visual);
  // Mel [.., n_mels, S] is stacked to [.., S/4, 320] first.
  torch::Tensor AudioEmbed(const torch::Tensor& mel);

  void Freeze();
  bool frozen() const;
  std::string Hash() const;
  void Save(Checkpoint& ckpt) const;
  void Load(const Checkpoint& ckpt);
  AvEncoders Clone() const;
  void To(torch::Dtype dtype);
};

struct OracleConfig {
  int64_t n_mels = 80;
  int64_t hidden = 128;
  int64_t dim = 32;  // d_spk; 256 at reference scale
};

// Frame-wise MLP, temporal mean pooling and a linear embedding layer;
// the L2-normalized embedding is the speaker vector.
class SpeakerGuidanceEncoderImpl
    : public torch::nn::Cloneable<SpeakerGuidanceEncoderImpl> {
 public:
  explicit SpeakerGuidanceEncoderImpl(const OracleConfig& cfg);
  void reset() override;
  // mel [n_mels, S] or [B, n_mels, S] -> [B, dim], unit rows.
  torch::Tensor forward(const torch::Tensor& mel);
  void freeze();
  bool frozen() const { return frozen_; }
  const OracleConfig& config() const { return cfg_; }

 private:
  OracleConfig cfg_;
  bool frozen_ = false;
  torch::nn::Linear in_{nullptr}, mid_{nullptr}, emb_{nullptr};
};
TORCH_MODULE(SpeakerGuidanceEncoder);

// Unit-norm rows along the last dimension.
torch::Tensor L2Normalize(const torch::Tensor& x);

}  // namespace v2s

#endif  // V2S_ENCODERS_ENCODERS_H_
