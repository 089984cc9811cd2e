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

#include "v2s/encoders/pretrain.h"

#include <map>
#include <sstream>

#include "v2s/common/errors.h"

namespace v2s {

namespace {

constexpr double kCosineLogitScale = 16.0;

torch::Tensor Labels(const Corpus& corpus, const std::vector<size_t>& idx,
                     const std::map<int, int64_t>& label_of) {
  std::vector<int64_t> out;
  out.reserve(idx.size());
  for (size_t i : idx) out.push_back(label_of.at(corpus.items()[i].record.speaker_id));
  return torch::tensor(out, torch::kInt64);
}

}  // namespace

EncoderPretrainResult PretrainEncoders(const Corpus& corpus, const EncoderConfig& cfg,
                                       const TrainOptions& opts) {
  SeedTensorRng(opts.seed);
  const int64_t vocab = corpus.manifest().config.vocab;
  EncoderPretrainResult result;
  result.encoders = AvEncoders::Create(cfg);
  auto& enc = result.encoders;
  torch::nn::Linear visual_head(cfg.dim, vocab), audio_head(cfg.dim, vocab);

  std::vector<torch::Tensor> params;
  for (auto* m : std::initializer_list<torch::nn::Module*>{
           enc.visual_frontend.get(), enc.audio_frontend.get(), enc.visual.get(),
           enc.audio.get(), visual_head.get(), audio_head.get()}) {
    for (auto& p : m->parameters()) params.push_back(p);
  }
  torch::optim::AdamW optim(params, torch::optim::AdamWOptions(opts.lr)
                                        .weight_decay(opts.weight_decay));

  const auto train = corpus.Indices(Split::kTrain);
  const auto heldout = corpus.Indices({Split::kVal, Split::kTest});
  if (train.empty()) throw ValidationError("corpus has no training utterances");

  auto logits = [&](const std::vector<size_t>& idx) {
    auto v = visual_head(enc.visual->encode(enc.VisualEmbed(StackVisual(corpus, idx))));
    auto a = audio_head(enc.audio->encode(enc.AudioEmbed(StackMel(corpus, idx))));
    return std::make_pair(v.reshape({-1, vocab}), a.reshape({-1, vocab}));
  };

  std::mt19937_64 rng(opts.seed);
  for (int64_t epoch = 0; epoch < opts.epochs; ++epoch) {
    for (const auto& batch : ShuffledBatches(train, opts.batch, rng)) {
      auto [v, a] = logits(batch);
      auto target = StackContent(corpus, batch).reshape({-1});
      auto loss = torch::cross_entropy_loss(v, target) + torch::cross_entropy_loss(a, target);
      optim.zero_grad();
      loss.backward();
      optim.step();
      ++result.steps;
    }
  }

  torch::NoGradGuard no_grad;
  auto measure = [&](const std::vector<size_t>& idx, double& vis_acc, double& aud_acc) {
    if (idx.empty()) return;
    auto [v, a] = logits(idx);
    auto target = StackContent(corpus, idx).reshape({-1});
    vis_acc = Accuracy(v, target);
    aud_acc = Accuracy(a, target);
  };
  measure(train, result.visual_train_accuracy, result.audio_train_accuracy);
  measure(heldout, result.visual_heldout_accuracy, result.audio_heldout_accuracy);
  enc.Freeze();

  const double worst = std::min(result.visual_heldout_accuracy, result.audio_heldout_accuracy);
  if (!heldout.empty() && worst < kEncoderFailAccuracy) {
    std::ostringstream msg;
    msg << "encoder pretraining failed: held-out token accuracy visual="
        << result.visual_heldout_accuracy << " audio=" << result.audio_heldout_accuracy;
    throw TrainingError(msg.str());
  }
  return result;
}

CosineMargin SpeakerCosineMargin(const torch::Tensor& embeddings,
                                 const std::vector<int>& speakers) {
  auto sims = torch::matmul(embeddings, embeddings.t()).to(torch::kFloat64);
  auto acc = sims.accessor<double, 2>();
  double intra = 0.0, inter = 0.0;
  int64_t n_intra = 0, n_inter = 0;
  const int64_t n = embeddings.size(0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = i + 1; j < n; ++j) {
      if (speakers[i] == speakers[j]) {
        intra += acc[i][j];
        ++n_intra;
      } else {
        inter += acc[i][j];
        ++n_inter;
      }
    }
  }
  return CosineMargin{n_intra ? intra / n_intra : 0.0, n_inter ? inter / n_inter : 0.0};
}

OraclePretrainResult PretrainSpeakerOracle(const Corpus& corpus, const OracleConfig& cfg,
                                           const TrainOptions& opts) {
  SeedTensorRng(opts.seed);
  OraclePretrainResult result;
  result.oracle = SpeakerGuidanceEncoder(cfg);
  auto& oracle = result.oracle;

  const auto seen = corpus.SeenSpeakers();
  std::map<int, int64_t> label_of;
  for (size_t i = 0; i < seen.size(); ++i) label_of[seen[i]] = static_cast<int64_t>(i);
  auto class_weight = torch::nn::init::xavier_uniform_(
                          torch::empty({static_cast<int64_t>(seen.size()), cfg.dim}))
                          .set_requires_grad(true);

  auto params = oracle->parameters();
  params.push_back(class_weight);
  torch::optim::AdamW optim(params, torch::optim::AdamWOptions(opts.lr)
                                        .weight_decay(opts.weight_decay));
  auto logits = [&](const torch::Tensor& emb) {
    return kCosineLogitScale * torch::matmul(emb, L2Normalize(class_weight).t());
  };

  const auto train = corpus.Indices(Split::kTrain);
  const auto heldout = corpus.Indices({Split::kVal, Split::kTest});
  if (train.empty()) throw ValidationError("corpus has no training utterances");
  std::mt19937_64 rng(opts.seed);
  for (int64_t epoch = 0; epoch < opts.epochs; ++epoch) {
    for (const auto& batch : ShuffledBatches(train, opts.batch, rng)) {
      auto loss = torch::cross_entropy_loss(logits(oracle(StackMel(corpus, batch))),
                                            Labels(corpus, batch, label_of));
      optim.zero_grad();
      loss.backward();
      optim.step();
      ++result.steps;
    }
  }

  torch::NoGradGuard no_grad;
  result.train_accuracy =
      Accuracy(logits(oracle(StackMel(corpus, train))), Labels(corpus, train, label_of));
  if (!heldout.empty()) {
    result.heldout_accuracy = Accuracy(logits(oracle(StackMel(corpus, heldout))),
                                       Labels(corpus, heldout, label_of));
  }
  auto margin_idx = corpus.Indices({Split::kVal, Split::kTest, Split::kUnseen});
  if (!margin_idx.empty()) {
    std::vector<int> spk;
    for (size_t i : margin_idx) spk.push_back(corpus.items()[i].record.speaker_id);
    auto m = SpeakerCosineMargin(oracle(StackMel(corpus, margin_idx)), spk);
    result.intra_cosine = m.intra;
    result.inter_cosine = m.inter;
  }
  oracle->freeze();
  if (!heldout.empty() && result.heldout_accuracy < kOracleFailAccuracy) {
    std::ostringstream msg;
    msg << "speaker oracle pretraining failed: held-out accuracy "
        << result.heldout_accuracy;
    throw TrainingError(msg.str());
  }
  return result;
}

}  // namespace v2s
