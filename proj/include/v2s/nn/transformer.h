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

#ifndef V2S_NN_TRANSFORMER_H_
#define V2S_NN_TRANSFORMER_H_

#include <torch/torch.h>

namespace v2s {

// [count x dim] sinusoidal table; even columns sin, odd columns cos.
torch::Tensor SinusoidalTable(const torch::Tensor& positions, int64_t dim);
torch::Tensor SinusoidalTable(int64_t count, int64_t dim);

struct TransformerOptions {
  int64_t dim = 64;
  int64_t heads = 4;
  int64_t ff = 128;
};

// Multi-head scaled dot-product attention of `query` tokens over `context`
// tokens. Inputs are [B, Lq, d] and [B, Lk, d]. `allowed`, when defined,
// is a [Lq, Lk] boolean matrix; false entries are excluded from the softmax.
class MultiHeadAttentionImpl : public torch::nn::Cloneable<MultiHeadAttentionImpl> {
 public:
  explicit MultiHeadAttentionImpl(const TransformerOptions& opts);
  void reset() override;
  torch::Tensor forward(const torch::Tensor& query, const torch::Tensor& context,
                        const torch::Tensor& allowed = {});

 private:
  TransformerOptions opts_;
  torch::nn::Linear q_{nullptr}, k_{nullptr}, v_{nullptr}, out_{nullptr};
};
TORCH_MODULE(MultiHeadAttention);

// Pre-norm transformer encoder layer with GELU feed-forward.
class EncoderLayerImpl : public torch::nn::Cloneable<EncoderLayerImpl> {
 public:
  explicit EncoderLayerImpl(const TransformerOptions& opts);
  void reset() override;

  // Full self-attention over x [B, L, d], optionally restricted by `allowed`.
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& allowed = {});
  // Updates `query` tokens [B, Lq, d] by attending over `context` [B, Lk, d];
  // the context itself is not updated.
  torch::Tensor forward_query(const torch::Tensor& query, const torch::Tensor& context);

 private:
  torch::Tensor FeedForward(const torch::Tensor& x);

  TransformerOptions opts_;
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
  MultiHeadAttention attn_{nullptr};
  torch::nn::Linear ff1_{nullptr}, ff2_{nullptr};
};
TORCH_MODULE(EncoderLayer);

// Sets requires_grad=false on every parameter of `module`.
void FreezeParameters(torch::nn::Module& module);

}  // namespace v2s

#endif  // V2S_NN_TRANSFORMER_H_
