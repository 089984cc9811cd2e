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

#ifndef V2S_NN_TRAINING_H_
#define V2S_NN_TRAINING_H_

#include <cstdint>
#include <random>
#include <vector>

#include <torch/torch.h>

namespace v2s {

struct TrainOptions {
  int64_t epochs = 10;
  int64_t batch = 32;
  double lr = 1e-3;
  double weight_decay = 0.01;
  uint64_t seed = 1;
};

// Shuffles `items` with `rng` and cuts them into batches of at most `batch`.
std::vector<std::vector<size_t>> ShuffledBatches(std::vector<size_t> items,
                                                 int64_t batch, std::mt19937_64& rng);

// Fraction of rows where argmax(logits) == label. logits [N, C], labels [N].
double Accuracy(const torch::Tensor& logits, const torch::Tensor& labels);

// Seeds the global tensor generator used for parameter initialization.
void SeedTensorRng(uint64_t seed);

}  // namespace v2s

#endif  // V2S_NN_TRAINING_H_
