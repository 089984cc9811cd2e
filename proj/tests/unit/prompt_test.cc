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

#include <cmath>

#include <gtest/gtest.h>

#include "tiny_models.h"
#include "v2s/common/errors.h"
#include "v2s/common/hashing.h"
#include "v2s/prompt/prompt.h"

namespace v2s {
namespace {

using testing::Tiny;

TEST(InfoNceTest, SinglePositiveIsZero) {
  auto a = torch::randn({1, 8});
  EXPECT_EQ(InfoNce(a, torch::randn({1, 8}), 0.07).item<double>(), 0.0);
}

TEST(InfoNceTest, UniformGalleryIsLogN) {
  for (int64_t n : {2, 5, 16}) {
    auto gallery = torch::randn({1, 8}).expand({n, 8}).contiguous();
    const double loss = InfoNce(torch::randn({n, 8}), gallery, 0.07).item<double>();
    EXPECT_NEAR(loss, std::log(static_cast<double>(n)), 1e-6);
  }
}

TEST(InfoNceTest, TwoItemScalarOracle) {
  auto eye = torch::eye(2);
  const double e = std::exp(1.0);
  // Both anchors match their own row with cosine 1 and the other with 0.
  EXPECT_NEAR(InfoNce(eye, eye, 1.0).item<double>(), -std::log(e / (e + 1.0)), 1e-6);
  EXPECT_NEAR(-std::log(e / (e + 1.0)), 0.3133, 1e-4);
  // Scaling rows does not matter; only cosines enter.
  EXPECT_NEAR(InfoNce(eye * 3.0, eye * 0.5, 1.0).item<double>(), 0.3132617, 1e-6);
}

TEST(InfoNceTest, IsAsymmetric) {
  auto a = torch::tensor({{1.0f, 0.0f}, {1.0f, 0.0f}});
  auto b = torch::tensor({{1.0f, 0.0f}, {0.0f, 1.0f}});
  const double ab = InfoNce(a, b, 1.0).item<double>();
  const double ba = InfoNce(b, a, 1.0).item<double>();
  const double e = std::exp(1.0);
  // a->b: both anchors see logits (1, 0); ba: row 0 sees (1,1), row 1 sees (0,0).
  EXPECT_NEAR(ab, 0.5 * (std::log(1 + e) - 1.0 + std::log(1 + e)), 1e-6);
  EXPECT_NEAR(ba, std::log(2.0), 1e-6);
}

TEST(InfoNceTest, RejectsBadInput) {
  auto a = torch::randn({3, 4});
  EXPECT_THROW(InfoNce(a, a, 0.0), ValidationError);
  EXPECT_THROW(InfoNce(a, a, -1.0), ValidationError);
  EXPECT_THROW(InfoNce(a, torch::randn({2, 4}), 0.07), ValidationError);
  EXPECT_THROW(InfoNce(torch::randn({0, 4}), torch::randn({0, 4}), 0.07), ValidationError);
}

TEST(SpeakerLossTest, SumOfFourTerms) {
  auto v = torch::randn({6, 8}), a = torch::randn({6, 8}), g = torch::randn({6, 8});
  const double tau = 0.2;
  const double expected = InfoNce(v, g, tau).item<double>() + InfoNce(a, g, tau).item<double>() +
                          InfoNce(v, a, tau).item<double>() + InfoNce(a, v, tau).item<double>();
  EXPECT_NEAR(SpeakerLoss(v, a, g, tau).item<double>(), expected, 1e-5);
  auto one = torch::randn({1, 8});
  EXPECT_EQ(SpeakerLoss(one, one, one, tau).item<double>(), 0.0);
  EXPECT_THROW(SpeakerLoss(v, a, torch::randn({5, 8}), tau), ValidationError);
}

TEST(SpeakerLossTest, NoGradientIntoGuide) {
  auto v = torch::randn({4, 8}).requires_grad_();
  auto g = torch::randn({4, 8}).requires_grad_();
  SpeakerLoss(v, torch::randn({4, 8}), g, 0.07).backward();
  EXPECT_GT(v.grad().abs().sum().item<double>(), 0.0);
  EXPECT_FALSE(g.grad().defined());
}

TEST(RetrievalTest, NearestCentroid) {
  auto gallery = torch::tensor({{1.0f, 0.1f}, {1.0f, -0.1f}, {0.0f, 1.0f}});
  auto queries = torch::tensor({{0.9f, 0.2f}, {0.2f, 0.9f}, {0.9f, 0.0f}});
  auto r = CentroidRetrieval(queries, {4, 9, 9}, gallery, {4, 4, 9});
  EXPECT_EQ(r.queries, 3);
  EXPECT_NEAR(r.accuracy, 2.0 / 3.0, 1e-12);
}

class ExtractorTest : public ::testing::Test {
 protected:
  SpeakerExtractor Make() {
    SeedTensorRng(3);
    return SpeakerExtractor(Tiny().encoders, PromptHeads(16, PromptConfig{8, 0.07, 0.02}));
  }
};

TEST_F(ExtractorTest, UnitEmbeddingsAndUntouchedFeatures) {
  auto ex = Make();
  auto visual = StackVisual(Tiny().corpus, {0, 5});
  auto sv = ex.ExtractSv(visual);
  EXPECT_TRUE(torch::allclose(sv.embedding.norm(2, 1), torch::ones({2}), 1e-6, 1e-6));
  EXPECT_TRUE(torch::equal(sv.features, ex.encoders().visual->encode(ex.encoders().VisualEmbed(visual))));
  auto sa = ex.ExtractSa(StackMel(Tiny().corpus, {0, 5}));
  EXPECT_EQ(sa.embedding.sizes(), (std::vector<int64_t>{2, 8}));
  EXPECT_TRUE(torch::allclose(sa.embedding.norm(2, 1), torch::ones({2}), 1e-6, 1e-6));
}

TEST_F(ExtractorTest, HeadScaleDoesNotChangeEmbedding) {
  auto ex = Make();
  auto visual = StackVisual(Tiny().corpus, {1, 2, 3});
  auto before = ex.ExtractSv(visual).embedding;
  {
    torch::NoGradGuard no_grad;
    ex.heads()->head_v->weight.mul_(7.5);
    ex.heads()->head_v->bias.mul_(7.5);
  }
  EXPECT_TRUE(torch::allclose(before, ex.ExtractSv(visual).embedding, 1e-5, 1e-6));
}

TEST(TrainPromptsTest, ZeroEpochsKeepsInitialization) {
  auto& w = Tiny();
  SeedTensorRng(5);
  PromptHeads init(16, PromptConfig{8, 0.07, 0.02});
  const auto before = HashModule(*init);
  auto result = TrainPrompts(w.corpus, w.encoders, w.oracle, PromptConfig{8, 0.07, 0.02},
                             TrainOptions{0, 4, 1e-3, 0.01, 1}, init);
  EXPECT_EQ(result.steps, 0);
  EXPECT_EQ(HashModule(*result.heads), before);
  for (auto& p : result.heads->parameters()) EXPECT_FALSE(p.requires_grad());
}

TEST(TrainPromptsTest, DeterministicAndFrozenElsewhere) {
  auto& w = Tiny();
  const auto enc_hash = w.encoders.Hash();
  const auto oracle_hash = HashModule(*w.oracle);
  const TrainOptions opts{2, 4, 1e-2, 0.01, 9};
  const PromptConfig cfg{8, 0.07, 0.02};
  auto a = TrainPrompts(w.corpus, w.encoders, w.oracle, cfg, opts);
  auto b = TrainPrompts(w.corpus, w.encoders, w.oracle, cfg, opts);
  EXPECT_GT(a.steps, 0);
  EXPECT_EQ(HashModule(*a.heads), HashModule(*b.heads));
  EXPECT_EQ(a.final_loss, b.final_loss);
  EXPECT_EQ(w.encoders.Hash(), enc_hash);
  EXPECT_EQ(HashModule(*w.oracle), oracle_hash);
}

TEST(TrainPromptsTest, RequiresFrozenUpstream) {
  auto& w = Tiny();
  auto loose = AvEncoders::Create(testing::TinyEncoderConfig());
  EXPECT_THROW(TrainPrompts(w.corpus, loose, w.oracle, PromptConfig{8}, TrainOptions{}),
               ConfigError);
}

}  // namespace
}  // namespace v2s
