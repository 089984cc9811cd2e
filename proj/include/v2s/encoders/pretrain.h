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

#ifndef V2S_ENCODERS_PRETRAIN_H_
#define V2S_ENCODERS_PRETRAIN_H_

#include <cstdint>

#include "v2s/corpus/corpus.h"
#include "v2s/encoders/encoders.h"
#include "v2s/nn/training.h"

namespace v2s {

// Frame-level token accuracy below this aborts encoder pretraining.
constexpr double kEncoderFailAccuracy = 0.5;
// Held-out speaker accuracy below this aborts oracle pretraining.
constexpr double kOracleFailAccuracy = 0.8;

struct EncoderPretrainResult {
  AvEncoders encoders;
  double visual_train_accuracy = 0.0;
  double audio_train_accuracy = 0.0;
  double visual_heldout_accuracy = 0.0;
  double audio_heldout_accuracy = 0.0;
  int64_t steps = 0;
};

// Trains both frontends and stacks with per-frame content-token
// classification heads on the train split, discards the heads and freezes.
// Held-out accuracy is measured on the val and test splits.
EncoderPretrainResult PretrainEncoders(const Corpus& corpus, const EncoderConfig& cfg,
                                       const TrainOptions& opts);

struct OraclePretrainResult {
  SpeakerGuidanceEncoder oracle{nullptr};
  double train_accuracy = 0.0;
  double heldout_accuracy = 0.0;
  // Mean cosine over same-speaker / different-speaker pairs on held-out
  // utterances (val, test and unseen speakers).
  double intra_cosine = 0.0;
  double inter_cosine = 0.0;
  int64_t steps = 0;
};

// Speaker classification over the train split with a cosine classifier on
// the normalized embedding, then frozen.
OraclePretrainResult PretrainSpeakerOracle(const Corpus& corpus, const OracleConfig& cfg,
                                           const TrainOptions& opts);

struct CosineMargin {
  double intra = 0.0;
  double inter = 0.0;
};
// Mean same-speaker and cross-speaker cosine over all pairs of rows.
CosineMargin SpeakerCosineMargin(const torch::Tensor& embeddings,
                                 const std::vector<int>& speakers);

}  // namespace v2s

#endif  // V2S_ENCODERS_PRETRAIN_H_
