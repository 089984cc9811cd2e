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

#ifndef V2S_PROMPT_PROMPT_H_
#define V2S_PROMPT_PROMPT_H_

#include <cstdint>
#include <string>

#include <torch/torch.h>

#include "v2s/common/checkpoint.h"
#include "v2s/corpus/corpus.h"
#include "v2s/encoders/encoders.h"
#include "v2s/nn/training.h"

namespace v2s {

struct PromptConfig {
  int64_t d_spk = 32;
  double tau = 0.07;
  double init_std = 0.02;
};

// One learnable prompt token per modality plus the projection heads that
// map the final-layer prompt state to the speaker-embedding width.
class PromptHeadsImpl : public torch::nn::Cloneable<PromptHeadsImpl> {
 public:
  PromptHeadsImpl(int64_t dim, const PromptConfig& cfg);
  void reset() override;

  torch::Tensor prompt_v, prompt_a;  // [dim]
  torch::nn::Linear head_v{nullptr}, head_a{nullptr};

  const PromptConfig& config() const { return cfg_; }
  int64_t dim() const { return dim_; }

 private:
  int64_t dim_;
  PromptConfig cfg_;
};
TORCH_MODULE(PromptHeads);

struct SpeakerFeatures {
  torch::Tensor embedding;  // [B, d_spk], unit rows
  torch::Tensor features;   // [B, L, d], untouched encoder output
};

// Vision- and audio-guided speaker embedding extraction over frozen encoders.
class SpeakerExtractor {
 public:
  SpeakerExtractor(AvEncoders encoders, PromptHeads heads)
      : encoders_(std::move(encoders)), heads_(std::move(heads)) {}

  // visual [L, d_vis] or [B, L, d_vis] -> (s_v, f_v)
  SpeakerFeatures ExtractSv(const torch::Tensor& visual);
  // mel [n_mels, S] or [B, n_mels, S] -> (s_a, f_a)
  SpeakerFeatures ExtractSa(const torch::Tensor& mel);

  AvEncoders& encoders() { return encoders_; }
  PromptHeads& heads() { return heads_; }
  SpeakerExtractor Clone() const;
  void To(torch::Dtype dtype);

 private:
  AvEncoders encoders_;
  PromptHeads heads_;
};

// Mean InfoNCE over anchors: row i of `anchors` is scored against every row
// of `gallery` by cosine / tau, with row i as its positive. Asymmetric.
torch::Tensor InfoNce(const torch::Tensor& anchors, const torch::Tensor& gallery,
                      double tau);

// L(s_v,s_G) + L(s_a,s_G) + L(s_v,s_a) + L(s_a,s_v). s_G is detached.
torch::Tensor SpeakerLoss(const torch::Tensor& s_v, const torch::Tensor& s_a,
                          const torch::Tensor& s_g, double tau);

struct PromptTrainResult {
  PromptHeads heads{nullptr};
  int64_t steps = 0;
  double final_loss = 0.0;
  // s_v queries from the test split against all speakers' s_G centroids.
  double retrieval_accuracy = 0.0;
  // Same protocol for the fully held-out speakers.
  double unseen_retrieval_accuracy = 0.0;
  // Mean cos(s_a, s_G) on the test split.
  double audio_oracle_cosine = 0.0;
  std::string frozen_hash;  // SHA-256 of encoder + oracle parameters
};

// Optimizes only the prompts and heads. Each batch holds at most one
// utterance per speaker so no negative shares the anchor's identity.
// The returned heads are frozen. Throws InternalError if any frozen
// parameter changes.
PromptTrainResult TrainPrompts(const Corpus& corpus, AvEncoders& encoders,
                               SpeakerGuidanceEncoder& oracle, const PromptConfig& cfg,
                               const TrainOptions& opts, PromptHeads init = nullptr);

struct RetrievalReport {
  double accuracy = 0.0;
  int64_t queries = 0;
};

// Nearest-centroid speaker retrieval of `queries` against per-speaker
// centroids of `gallery` rows.
RetrievalReport CentroidRetrieval(const torch::Tensor& queries,
                                  const std::vector<int>& query_speakers,
                                  const torch::Tensor& gallery,
                                  const std::vector<int>& gallery_speakers);

}  // namespace v2s

#endif  // V2S_PROMPT_PROMPT_H_
