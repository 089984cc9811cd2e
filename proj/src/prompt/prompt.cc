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

#include "v2s/prompt/prompt.h"

#include <algorithm>
#include <map>

#include "v2s/common/errors.h"
#include "v2s/common/hashing.h"
#include "v2s/nn/transformer.h"

namespace v2s {

namespace {

std::string FrozenHash(const AvEncoders& encoders, SpeakerGuidanceEncoder& oracle) {
  return Sha256Hex(encoders.Hash() + HashModule(*oracle));
}

// Rounds of one utterance per speaker, chunked into batches.
std::vector<std::vector<size_t>> SpeakerDistinctBatches(
    const Corpus& corpus, const std::vector<size_t>& items, int64_t batch,
    std::mt19937_64& rng) {
  std::map<int, std::vector<size_t>> by_speaker;
  for (size_t i : items) by_speaker[corpus.items()[i].record.speaker_id].push_back(i);
  std::vector<std::vector<size_t>> queues;
  for (auto& [spk, list] : by_speaker) {
    auto shuffled = ShuffledBatches(list, static_cast<int64_t>(list.size()), rng);
    queues.push_back(shuffled.empty() ? std::vector<size_t>{} : shuffled.front());
  }
  std::vector<std::vector<size_t>> out;
  for (size_t round = 0;; ++round) {
    std::vector<size_t> pool;
    for (const auto& q : queues) {
      if (round < q.size()) pool.push_back(q[round]);
    }
    if (pool.empty()) break;
    for (auto& b : ShuffledBatches(pool, batch, rng)) out.push_back(std::move(b));
  }
  return out;
}

std::vector<int> SpeakersOf(const Corpus& corpus, const std::vector<size_t>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (size_t i : idx) out.push_back(corpus.items()[i].record.speaker_id);
  return out;
}

}  // namespace

PromptHeadsImpl::PromptHeadsImpl(int64_t dim, const PromptConfig& cfg)
    : dim_(dim), cfg_(cfg) {
  reset();
}

void PromptHeadsImpl::reset() {
  prompt_v = register_parameter("prompt_v", torch::randn({dim_}) * cfg_.init_std);
  prompt_a = register_parameter("prompt_a", torch::randn({dim_}) * cfg_.init_std);
  head_v = register_module("head_v", torch::nn::Linear(dim_, cfg_.d_spk));
  head_a = register_module("head_a", torch::nn::Linear(dim_, cfg_.d_spk));
}

SpeakerFeatures SpeakerExtractor::ExtractSv(const torch::Tensor& visual) {
  auto out = encoders_.visual->forward_with_prompt(heads_->prompt_v,
                                                   encoders_.VisualEmbed(visual));
  return SpeakerFeatures{L2Normalize(heads_->head_v(out.prompt_state)), out.features};
}

SpeakerFeatures SpeakerExtractor::ExtractSa(const torch::Tensor& mel) {
  auto out = encoders_.audio->forward_with_prompt(heads_->prompt_a,
                                                  encoders_.AudioEmbed(mel));
  return SpeakerFeatures{L2Normalize(heads_->head_a(out.prompt_state)), out.features};
}

SpeakerExtractor SpeakerExtractor::Clone() const {
  PromptHeads heads(std::dynamic_pointer_cast<PromptHeadsImpl>(heads_->clone()));
  return SpeakerExtractor(encoders_.Clone(), heads);
}

void SpeakerExtractor::To(torch::Dtype dtype) {
  encoders_.To(dtype);
  heads_->to(dtype);
}

torch::Tensor InfoNce(const torch::Tensor& anchors, const torch::Tensor& gallery,
                      double tau) {
  if (!(tau > 0.0)) throw ValidationError("InfoNCE temperature must be positive");
  if (anchors.dim() != 2 || gallery.dim() != 2 || anchors.size(0) != gallery.size(0) ||
      anchors.size(1) != gallery.size(1)) {
    throw ValidationError("InfoNCE expects two [N, d] batches of equal shape");
  }
  if (anchors.size(0) < 1) throw ValidationError("InfoNCE needs N >= 1");
  auto logits = torch::matmul(L2Normalize(anchors), L2Normalize(gallery).t()) / tau;
  auto targets = torch::arange(anchors.size(0), torch::kInt64);
  return torch::cross_entropy_loss(logits, targets);
}

torch::Tensor SpeakerLoss(const torch::Tensor& s_v, const torch::Tensor& s_a,
                          const torch::Tensor& s_g, double tau) {
  if (s_v.sizes() != s_a.sizes() || s_v.sizes() != s_g.sizes()) {
    throw ValidationError("speaker loss batches must have equal shapes");
  }
  auto guide = s_g.detach();
  return InfoNce(s_v, guide, tau) + InfoNce(s_a, guide, tau) + InfoNce(s_v, s_a, tau) +
         InfoNce(s_a, s_v, tau);
}

RetrievalReport CentroidRetrieval(const torch::Tensor& queries,
                                  const std::vector<int>& query_speakers,
                                  const torch::Tensor& gallery,
                                  const std::vector<int>& gallery_speakers) {
  std::map<int, std::vector<int64_t>> rows;
  for (size_t i = 0; i < gallery_speakers.size(); ++i) {
    rows[gallery_speakers[i]].push_back(static_cast<int64_t>(i));
  }
  std::vector<int> ids;
  std::vector<torch::Tensor> centroids;
  for (const auto& [spk, r] : rows) {
    ids.push_back(spk);
    centroids.push_back(gallery.index_select(0, torch::tensor(r, torch::kInt64)).mean(0));
  }
  RetrievalReport report;
  report.queries = queries.size(0);
  if (report.queries == 0) return report;
  auto sims = torch::matmul(L2Normalize(queries), L2Normalize(torch::stack(centroids)).t());
  auto best = sims.argmax(1);
  int64_t hits = 0;
  for (int64_t i = 0; i < report.queries; ++i) {
    if (ids[best[i].item<int64_t>()] == query_speakers[i]) ++hits;
  }
  report.accuracy = static_cast<double>(hits) / static_cast<double>(report.queries);
  return report;
}

PromptTrainResult TrainPrompts(const Corpus& corpus, AvEncoders& encoders,
                               SpeakerGuidanceEncoder& oracle, const PromptConfig& cfg,
                               const TrainOptions& opts, PromptHeads init) {
  if (!encoders.frozen() || !oracle->frozen()) {
    throw ConfigError("prompt training requires frozen encoders and oracle");
  }
  SeedTensorRng(opts.seed);
  PromptTrainResult result;
  result.heads = init ? init : PromptHeads(encoders.visual->dim(), cfg);
  for (auto& p : result.heads->parameters()) p.set_requires_grad(true);
  SpeakerExtractor extractor(encoders, result.heads);
  const std::string hash_before = FrozenHash(encoders, oracle);

  const int64_t n_items = static_cast<int64_t>(corpus.items().size());
  std::vector<size_t> all(n_items);
  for (int64_t i = 0; i < n_items; ++i) all[i] = static_cast<size_t>(i);
  torch::Tensor guide;
  {
    torch::NoGradGuard no_grad;
    guide = oracle(StackMel(corpus, all));
  }

  torch::optim::AdamW optim(result.heads->parameters(),
                            torch::optim::AdamWOptions(opts.lr).weight_decay(opts.weight_decay));
  const auto train = corpus.Indices(Split::kTrain);
  std::mt19937_64 rng(opts.seed);
  for (int64_t epoch = 0; epoch < opts.epochs; ++epoch) {
    for (const auto& batch : SpeakerDistinctBatches(corpus, train, opts.batch, rng)) {
      auto s_v = extractor.ExtractSv(StackVisual(corpus, batch)).embedding;
      auto s_a = extractor.ExtractSa(StackMel(corpus, batch)).embedding;
      auto s_g = guide.index_select(
          0, torch::tensor(std::vector<int64_t>(batch.begin(), batch.end()), torch::kInt64));
      auto loss = SpeakerLoss(s_v, s_a, s_g, cfg.tau);
      optim.zero_grad();
      loss.backward();
      optim.step();
      result.final_loss = loss.item<double>();
      ++result.steps;
    }
  }

  result.frozen_hash = FrozenHash(encoders, oracle);
  if (result.frozen_hash != hash_before) {
    throw InternalError("frozen encoder/oracle parameters changed during prompt training");
  }

  FreezeParameters(*result.heads);
  torch::NoGradGuard no_grad;
  const auto all_speakers = SpeakersOf(corpus, all);
  auto evaluate = [&](const std::vector<size_t>& idx) {
    if (idx.empty()) return RetrievalReport{};
    auto s_v = extractor.ExtractSv(StackVisual(corpus, idx)).embedding;
    return CentroidRetrieval(s_v, SpeakersOf(corpus, idx), guide, all_speakers);
  };
  const auto test = corpus.Indices(Split::kTest);
  result.retrieval_accuracy = evaluate(test).accuracy;
  result.unseen_retrieval_accuracy = evaluate(corpus.Indices(Split::kUnseen)).accuracy;
  if (!test.empty()) {
    auto s_a = extractor.ExtractSa(StackMel(corpus, test)).embedding;
    auto s_g = guide.index_select(
        0, torch::tensor(std::vector<int64_t>(test.begin(), test.end()), torch::kInt64));
    result.audio_oracle_cosine = (s_a * s_g).sum(1).mean().item<double>();
  }
  return result;
}

}  // namespace v2s
