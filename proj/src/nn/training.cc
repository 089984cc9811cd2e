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

#include "v2s/nn/training.h"

#include <algorithm>

namespace v2s {

std::vector<std::vector<size_t>> ShuffledBatches(std::vector<size_t> items,
                                                 int64_t batch, std::mt19937_64& rng) {
  // Fisher-Yates with explicit draws; std::shuffle's draw pattern is
  // implementation-defined.
  for (size_t i = items.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
  std::vector<std::vector<size_t>> out;
  for (size_t start = 0; start < items.size(); start += batch) {
    const size_t end = std::min(items.size(), start + static_cast<size_t>(batch));
    out.emplace_back(items.begin() + start, items.begin() + end);
  }
  return out;
}

double Accuracy(const torch::Tensor& logits, const torch::Tensor& labels) {
  if (labels.numel() == 0) return 0.0;
  auto hits = logits.argmax(-1).eq(labels).sum().item<int64_t>();
  return static_cast<double>(hits) / static_cast<double>(labels.numel());
}

void SeedTensorRng(uint64_t seed) { torch::manual_seed(seed); }

}  // namespace v2s
