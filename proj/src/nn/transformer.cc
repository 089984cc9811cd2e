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

#include "v2s/nn/transformer.h"

#include <cmath>
#include <limits>

#include "v2s/common/errors.h"

namespace v2s {

torch::Tensor SinusoidalTable(const torch::Tensor& positions, int64_t dim) {
  const auto opts = torch::TensorOptions().dtype(torch::kFloat32);
  auto pos = positions.to(torch::kFloat64).reshape({-1, 1});
  const int64_t half = (dim + 1) / 2;
  auto idx = torch::arange(half, torch::TensorOptions().dtype(torch::kFloat64));
  auto freq = torch::exp(idx * (-std::log(10000.0) * 2.0 / static_cast<double>(dim)));
  auto angles = pos * freq.reshape({1, -1});
  auto table = torch::stack({torch::sin(angles), torch::cos(angles)}, 2)
                   .reshape({pos.size(0), 2 * half})
                   .narrow(1, 0, dim);
  return table.to(opts);
}

torch::Tensor SinusoidalTable(int64_t count, int64_t dim) {
  return SinusoidalTable(torch::arange(count, torch::kInt64), dim);
}

MultiHeadAttentionImpl::MultiHeadAttentionImpl(const TransformerOptions& opts)
    : opts_(opts) {
  if (opts.heads <= 0 || opts.dim % opts.heads != 0) {
    throw ValidationError("attention dim must be divisible by head count");
  }
  reset();
}

void MultiHeadAttentionImpl::reset() {
  q_ = register_module("q", torch::nn::Linear(opts_.dim, opts_.dim));
  k_ = register_module("k", torch::nn::Linear(opts_.dim, opts_.dim));
  v_ = register_module("v", torch::nn::Linear(opts_.dim, opts_.dim));
  out_ = register_module("out", torch::nn::Linear(opts_.dim, opts_.dim));
}

torch::Tensor MultiHeadAttentionImpl::forward(const torch::Tensor& query,
                                              const torch::Tensor& context,
                                              const torch::Tensor& allowed) {
  const int64_t b = query.size(0), lq = query.size(1), lk = context.size(1);
  const int64_t h = opts_.heads, dh = opts_.dim / opts_.heads;
  auto split = [&](const torch::Tensor& t, int64_t len) {
    return t.view({b, len, h, dh}).transpose(1, 2);  // [B, h, len, dh]
  };
  auto q = split(q_(query), lq);
  auto k = split(k_(context), lk);
  auto v = split(v_(context), lk);
  auto scores = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(dh));
  if (allowed.defined()) {
    scores = scores.masked_fill(allowed.logical_not(), -std::numeric_limits<double>::infinity());
  }
  auto weights = torch::softmax(scores, -1);
  auto mixed = torch::matmul(weights, v).transpose(1, 2).reshape({b, lq, opts_.dim});
  return out_(mixed);
}

EncoderLayerImpl::EncoderLayerImpl(const TransformerOptions& opts) : opts_(opts) {
  reset();
}

void EncoderLayerImpl::reset() {
  norm1_ = register_module("norm1", torch::nn::LayerNorm(
                                        torch::nn::LayerNormOptions({opts_.dim})));
  norm2_ = register_module("norm2", torch::nn::LayerNorm(
                                        torch::nn::LayerNormOptions({opts_.dim})));
  attn_ = register_module("attn", MultiHeadAttention(opts_));
  ff1_ = register_module("ff1", torch::nn::Linear(opts_.dim, opts_.ff));
  ff2_ = register_module("ff2", torch::nn::Linear(opts_.ff, opts_.dim));
}

torch::Tensor EncoderLayerImpl::FeedForward(const torch::Tensor& x) {
  return ff2_(torch::gelu(ff1_(norm2_(x))));
}

torch::Tensor EncoderLayerImpl::forward(const torch::Tensor& x,
                                        const torch::Tensor& allowed) {
  auto normed = norm1_(x);
  auto h = x + attn_(normed, normed, allowed);
  return h + FeedForward(h);
}

torch::Tensor EncoderLayerImpl::forward_query(const torch::Tensor& query,
                                              const torch::Tensor& context) {
  auto h = query + attn_(norm1_(query), norm1_(context));
  return h + FeedForward(h);
}

void FreezeParameters(torch::nn::Module& module) {
  for (auto& p : module.parameters(/*recurse=*/true)) p.set_requires_grad(false);
}

}  // namespace v2s
