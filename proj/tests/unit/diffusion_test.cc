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
#include <fstream>

#include <gtest/gtest.h>

#include "tiny_models.h"
#include "v2s/common/errors.h"
#include "v2s/common/hashing.h"
#include "v2s/diffusion/diffusion.h"

namespace v2s {
namespace {

using testing::Tiny;

DenoiserConfig SmallDenoiser() {
  DenoiserConfig cfg;
  cfg.feature_dim = 16;
  cfg.speaker_dim = 8;
  cfg.cond_dim = 16;
  cfg.hidden = 32;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.ff = 64;
  return cfg;
}

TEST(ScheduleTest, SingleStep) {
  auto s = MakeSchedule(1, 0.5, 0.5);
  EXPECT_EQ(s.AlphaBar(1), 0.5);
  EXPECT_EQ(s.AlphaBar(0), 1.0);
}

TEST(ScheduleTest, DefaultEndpoints) {
  auto s = MakeSchedule(1000, 1e-4, 0.02);
  EXPECT_NEAR(s.AlphaBar(1), 0.9999, 1e-15);
  // Independent product over the linear betas in long double.
  long double prod = 1.0L;
  for (int i = 0; i < 1000; ++i) {
    prod *= 1.0L - (1e-4L + (0.02L - 1e-4L) * i / 999.0L);
  }
  EXPECT_LT(s.AlphaBar(1000), 1e-4);
  EXPECT_NEAR(s.AlphaBar(1000), static_cast<double>(prod), 1e-12);
}

TEST(ScheduleTest, RecurrenceAndMonotonicity) {
  auto s = MakeSchedule(1000, 1e-4, 0.02);
  for (int64_t t = 1; t <= s.T; ++t) {
    EXPECT_LT(s.AlphaBar(t), s.AlphaBar(t - 1));
    EXPECT_NEAR(s.AlphaBar(t), s.AlphaBar(t - 1) * s.alpha[t - 1], 1e-15);
  }
  auto gathered = s.AlphaBarAt(torch::tensor({1, 500, 1000}));
  EXPECT_EQ(gathered.scalar_type(), torch::kFloat64);
  EXPECT_EQ(gathered[1].item<double>(), s.AlphaBar(500));
}

TEST(ScheduleTest, RejectsBadArguments) {
  EXPECT_THROW(MakeSchedule(0, 1e-4, 0.02), ValidationError);
  EXPECT_THROW(MakeSchedule(10, 0.0, 0.02), ValidationError);
  EXPECT_THROW(MakeSchedule(10, 0.03, 0.02), ValidationError);
  EXPECT_THROW(MakeSchedule(10, 1e-4, 1.0), ValidationError);
  EXPECT_THROW(MakeSchedule(10, 1e-4, 0.02).AlphaBar(11), ValidationError);
}

TEST(QSampleTest, Identities) {
  auto s = MakeSchedule(1000, 1e-4, 0.02);
  auto m0 = torch::randn({2, 4, 320});
  auto eps = torch::randn({2, 4, 320});
  EXPECT_TRUE(torch::allclose(QSample(m0, 300, torch::zeros_like(m0), s),
                              m0 * std::sqrt(s.AlphaBar(300))));
  EXPECT_TRUE(torch::allclose(QSample(torch::zeros_like(m0), 300, eps, s),
                              eps * std::sqrt(1.0 - s.AlphaBar(300))));
  // Per-row timesteps agree with the scalar form.
  auto rows = QSample(m0, torch::tensor({10, 900}), eps, s);
  EXPECT_TRUE(torch::allclose(rows[0], QSample(m0[0], 10, eps[0], s)));
  EXPECT_TRUE(torch::allclose(rows[1], QSample(m0[1], 900, eps[1], s)));
}

TEST(QSampleTest, FinalStepIsAlmostPureNoise) {
  auto s = MakeSchedule(1000, 1e-4, 0.02);
  torch::manual_seed(0);
  auto m0 = torch::rand({64, 320}) * 2 - 1;
  auto eps = torch::randn({64, 320});
  auto mt = QSample(m0, 1000, eps, s).flatten();
  auto e = eps.flatten();
  auto corr = ((mt - mt.mean()) * (e - e.mean())).sum() /
              ((mt - mt.mean()).norm() * (e - e.mean()).norm());
  EXPECT_GT(corr.item<double>(), 0.999);
}

TEST(QSampleTest, MarginalStatistics) {
  auto s = MakeSchedule(1000, 1e-4, 0.02);
  torch::manual_seed(1);
  const int64_t n = 1 << 20;
  const int64_t t = 250;
  auto m0 = torch::full({n}, 0.4, torch::kFloat64);
  auto mt = QSample(m0, t, torch::randn({n}, torch::kFloat64), s);
  const double var = 1.0 - s.AlphaBar(t);
  const double sd = std::sqrt(var / n);
  EXPECT_NEAR(mt.mean().item<double>(), 0.4 * std::sqrt(s.AlphaBar(t)), 3 * sd);
  // Sample variance has std about var * sqrt(2 / n).
  EXPECT_NEAR(mt.var().item<double>(), var, 3 * var * std::sqrt(2.0 / n));
}

TEST(ConditionTest, BroadcastAndBias) {
  SeedTensorRng(2);
  ConditionProjector proj(16, 8, 12);
  auto c = proj(torch::zeros({1, 16}), torch::zeros({8}));
  ASSERT_EQ(c.sizes(), (std::vector<int64_t>{1, 1, 12}));
  EXPECT_TRUE(torch::allclose(c[0][0], proj->proj->bias));
  // A change in s_v shifts every frame by the same vector.
  auto f = torch::randn({2, 5, 16});
  auto s1 = torch::randn({2, 8}), s2 = torch::randn({2, 8});
  auto diff = proj(f, s2) - proj(f, s1);
  for (int64_t l = 1; l < 5; ++l) {
    EXPECT_TRUE(torch::allclose(diff.select(1, l), diff.select(1, 0), 1e-5, 1e-6));
  }
  EXPECT_THROW(proj(torch::randn({2, 5, 16}), torch::randn({3, 8})), ValidationError);
}

TEST(DenoiserTest, ShapeDeterminismAndErrors) {
  SeedTensorRng(3);
  Denoiser net(SmallDenoiser());
  auto m = torch::randn({2, 6, 320});
  auto c = net->condition(torch::randn({2, 6, 16}), torch::randn({2, 8}));
  auto t = torch::tensor({5, 700});
  auto a = net(m, t, c);
  EXPECT_EQ(a.sizes(), m.sizes());
  EXPECT_TRUE(torch::equal(a, net(m, t, c)));
  EXPECT_THROW(net(m, t, c.narrow(1, 0, 5)), ValidationError);
}

TEST(DenoiserTest, ChannelFusionShape) {
  SeedTensorRng(3);
  auto cfg = SmallDenoiser();
  cfg.fusion = Fusion::kChannel;
  Denoiser net(cfg);
  auto m = torch::randn({1, 6, 320});
  auto c = net->condition(torch::randn({1, 6, 16}), torch::randn({1, 8}));
  EXPECT_EQ(net(m, torch::tensor({3}), c).sizes(), m.sizes());
}

TEST(DenoiserTest, GradientMatchesFiniteDifferences) {
  SeedTensorRng(4);
  Denoiser net(SmallDenoiser());
  net->to(torch::kFloat64);
  torch::manual_seed(4);
  auto m = torch::randn({1, 4, 320}, torch::kFloat64);
  auto c = net->condition(torch::randn({1, 4, 16}, torch::kFloat64),
                          torch::randn({1, 8}, torch::kFloat64)).detach();
  auto t = torch::tensor({123});
  auto w = torch::randn({1, 4, 320}, torch::kFloat64);
  auto f = [&](const torch::Tensor& x) { return (net(x, t, c) * w).sum(); };
  auto x = m.clone().requires_grad_();
  f(x).backward();
  auto grad = x.grad();
  torch::NoGradGuard no_grad;
  const double h = 1e-5;
  for (int k = 0; k < 16; ++k) {
    const int64_t l = k % 4, j = (37 * k + 11) % 320;
    auto plus = m.clone(), minus = m.clone();
    plus[0][l][j] += h;
    minus[0][l][j] -= h;
    const double fd = (f(plus) - f(minus)).item<double>() / (2 * h);
    const double an = grad[0][l][j].item<double>();
    EXPECT_LT(std::abs(fd - an), 1e-3 * std::max(1.0, std::abs(an))) << l << "," << j;
  }
  // Perturbing one frame moves the prediction of another (attention mixes frames).
  auto bumped = m.clone();
  bumped[0][0] += 0.5;
  EXPECT_GT((net(bumped, t, c)[0][3] - net(m, t, c)[0][3]).abs().max().item<double>(), 0.0);
}

TEST(DiffusionLossTest, StubDenoisers) {
  auto s = MakeSchedule(1000, 1e-4, 0.02);
  auto m0 = torch::rand({3, 4, 320}) * 2 - 1;
  auto c = torch::zeros({3, 4, 1});
  auto t = torch::tensor({1, 500, 1000});
  auto eps = torch::randn_like(m0);
  DenoiseFn perfect = [&](const torch::Tensor&, const torch::Tensor&, const torch::Tensor&) {
    return m0;
  };
  DenoiseFn zero = [](const torch::Tensor& x, const torch::Tensor&, const torch::Tensor&) {
    return torch::zeros_like(x);
  };
  EXPECT_EQ(DiffusionLoss(perfect, m0, c, t, eps, s).item<double>(), 0.0);
  EXPECT_NEAR(DiffusionLoss(zero, m0, c, t, eps, s).item<double>(),
              m0.abs().mean().item<double>(), 1e-6);
}

class TrainDiffusionTest : public ::testing::Test {
 protected:
  void SetUp() override {
    SeedTensorRng(6);
    PromptHeads heads(16, PromptConfig{8});
    FreezeParameters(*heads);
    extractor_ = std::make_unique<SpeakerExtractor>(Tiny().encoders, heads);
  }
  DiffusionTrainResult Run(int64_t epochs, Denoiser init = nullptr,
                           const std::string& log = "") {
    DiffusionTrainOptions opts;
    opts.train = TrainOptions{epochs, 4, 1e-3, 0.01, 21};
    opts.log_path = log;
    return TrainDiffusion(Tiny().corpus, *extractor_, Tiny().oracle, SmallDenoiser(), sched_,
                          opts, init);
  }

  NoiseSchedule sched_ = MakeSchedule(1000, 1e-4, 0.02);
  std::unique_ptr<SpeakerExtractor> extractor_;
};

TEST_F(TrainDiffusionTest, ZeroEpochsReturnsInitialization) {
  SeedTensorRng(8);
  Denoiser init(SmallDenoiser());
  const auto before = HashModule(*init);
  auto r = Run(0, init);
  EXPECT_EQ(r.steps, 0);
  EXPECT_EQ(HashModule(*r.denoiser), before);
}

TEST_F(TrainDiffusionTest, DeterministicLossCurveAndLog) {
  testing::TempDir dir("difflog");
  const auto upstream = Tiny().encoders.Hash() + HashModule(*extractor_->heads());
  auto a = Run(2, nullptr, (dir.path() / "log.csv").string());
  auto b = Run(2);
  ASSERT_GT(a.steps, 0);
  EXPECT_EQ(a.losses, b.losses);
  EXPECT_EQ(HashModule(*a.denoiser), HashModule(*b.denoiser));
  EXPECT_EQ(Tiny().encoders.Hash() + HashModule(*extractor_->heads()), upstream);
  std::ifstream in(dir.path() / "log.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,loss,wall_seconds");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, a.steps);
}

TEST_F(TrainDiffusionTest, RejectsTrainableUpstream) {
  SpeakerExtractor loose(Tiny().encoders, PromptHeads(16, PromptConfig{8}));
  DiffusionTrainOptions opts;
  EXPECT_THROW(TrainDiffusion(Tiny().corpus, loose, Tiny().oracle, SmallDenoiser(), sched_, opts),
               ConfigError);
}

}  // namespace
}  // namespace v2s
