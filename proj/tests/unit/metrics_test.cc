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

#include "test_util.h"
#include "v2s/common/array_io.h"
#include "v2s/common/errors.h"
#include "v2s/metrics/metrics.h"
#include "v2s/nn/training.h"

namespace v2s {
namespace {

// Textbook DCT-II with orthonormal scaling, one coefficient at a time.
double DctCoefficient(const std::vector<double>& x, int k) {
  const int n = static_cast<int>(x.size());
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += x[i] * std::cos(M_PI * k * (2 * i + 1) / (2.0 * n));
  return sum * std::sqrt((k == 0 ? 1.0 : 2.0) / n);
}

TEST(DctTest, MatchesDirectSum) {
  auto d = DctMatrix(80).to(torch::kFloat64);
  std::vector<double> x(80);
  for (int i = 0; i < 80; ++i) x[i] = std::sin(0.3 * i) + 0.01 * i * i;
  auto got = torch::mv(d, torch::tensor(x, torch::kFloat64));
  for (int k = 0; k < 80; ++k) EXPECT_NEAR(got[k].item<double>(), DctCoefficient(x, k), 1e-9);
  EXPECT_TRUE(torch::allclose(torch::mm(d, d.t()), torch::eye(80, torch::kFloat64), 1e-9, 1e-9));
}

TEST(McdTest, SingleFrameOracle) {
  std::vector<double> a(80), b(80);
  for (int i = 0; i < 80; ++i) {
    a[i] = -3.0 + 0.05 * i;
    b[i] = -2.0 + std::cos(0.2 * i);
  }
  double sq = 0.0;
  for (int k = 1; k <= kCepstralOrder; ++k) {
    sq += std::pow(DctCoefficient(a, k) - DctCoefficient(b, k), 2);
  }
  const double expected = 10.0 / std::log(10.0) * std::sqrt(2.0) * std::sqrt(sq);
  auto ta = torch::tensor(a, torch::kFloat64).unsqueeze(1);
  auto tb = torch::tensor(b, torch::kFloat64).unsqueeze(1);
  EXPECT_NEAR(McdLogMel(ta, tb), expected, 1e-6 * expected);
  EXPECT_EQ(MelCepstrum(ta).sizes(), (std::vector<int64_t>{1, kCepstralOrder}));
}

TEST(McdTest, IdentitySymmetryAndOffsetInvariance) {
  torch::manual_seed(0);
  auto a = torch::rand({80, 20}) * 1.6 - 0.8;
  auto b = torch::rand({80, 20}) * 1.6 - 0.8;
  MelConfig cfg;
  cfg.norm_lo = -9.0f;
  cfg.norm_hi = 2.0f;
  EXPECT_EQ(Mcd(a, a, cfg), 0.0);
  EXPECT_NEAR(Mcd(a, b, cfg), Mcd(b, a, cfg), 1e-9);
  EXPECT_GT(Mcd(a, b, cfg), 0.0);
  EXPECT_NEAR(Mcd(a, a + 0.1, cfg), 0.0, 1e-4);
}

TEST(L1Test, Identities) {
  auto a = torch::rand({80, 8});
  EXPECT_EQ(L1Mel(a, a), 0.0);
  EXPECT_NEAR(L1Mel(a, a + 0.25), 0.25, 1e-6);
  EXPECT_NEAR(L1Mel(a, a - 0.25), L1Mel(a - 0.25, a), 1e-12);
  EXPECT_THROW(L1Mel(a, torch::rand({80, 9})), ValidationError);
}

TEST(SecsTest, SelfSimilarityIsOne) {
  SeedTensorRng(1);
  SpeakerGuidanceEncoder oracle(OracleConfig{80, 16, 8});
  auto a = torch::rand({80, 12}) * 2 - 1;
  EXPECT_NEAR(Secs(a, a, oracle), 1.0, 1e-6);
  const double cross = Secs(a, torch::rand({80, 12}) * 2 - 1, oracle);
  EXPECT_LE(cross, 1.0 + 1e-6);
  EXPECT_GE(cross, -1.0 - 1e-6);
}

class EvaluateTest : public ::testing::Test {
 protected:
  void SetUp() override {
    SeedTensorRng(2);
    oracle_ = SpeakerGuidanceEncoder(OracleConfig{80, 16, 8});
    std::filesystem::create_directories(ref());
    std::filesystem::create_directories(gen());
    torch::manual_seed(3);
    for (int i = 0; i < 20; ++i) {
      auto m = torch::rand({80, 8}) * 2 - 1;
      WriteF32m(ref() / Id(i), m);
      WriteF32m(gen() / Id(i), m);
    }
  }
  std::filesystem::path ref() const { return dir_.path() / "ref"; }
  std::filesystem::path gen() const { return dir_.path() / "gen"; }
  static std::string Id(int i) { return "u" + std::to_string(i) + ".f32m"; }

  testing::TempDir dir_{"eval"};
  SpeakerGuidanceEncoder oracle_{nullptr};
  MelConfig cfg_;
};

TEST_F(EvaluateTest, IdenticalDirectories) {
  auto r = EvaluateCorpus(ref(), gen(), oracle_, cfg_);
  ASSERT_EQ(r.records.size(), 20u);
  EXPECT_EQ(r.mean.l1, 0.0);
  EXPECT_EQ(r.mean.mcd_db, 0.0);
  EXPECT_NEAR(r.mean.secs, 1.0, 1e-6);
  EXPECT_NEAR(r.std.secs, 0.0, 1e-6);
  auto csv = r.ToCsv();
  EXPECT_EQ(csv.rfind("id,l1,mcd_db,secs\n", 0), 0u);
  EXPECT_NE(csv.find("\nMEAN,0.000000,0.000000,1.000000\n"), std::string::npos);
  EXPECT_NE(csv.find("\nSTD,"), std::string::npos);
}

TEST_F(EvaluateTest, PopulationStandardDeviation) {
  // Two ids only: l1 values 0 and 0.5 give mean 0.25 and population std 0.25.
  std::ofstream(gen() / "ids.txt") << "u0\nu1\n";
  WriteF32m(gen() / Id(1), ReadF32m(ref() / Id(1)) + 0.5);
  auto r = EvaluateCorpus(ref(), gen(), oracle_, cfg_);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_NEAR(r.mean.l1, 0.25, 1e-6);
  EXPECT_NEAR(r.std.l1, 0.25, 1e-6);
}

TEST_F(EvaluateTest, FewMissingIdsAreReported) {
  std::filesystem::remove(gen() / Id(4));
  std::filesystem::remove(gen() / Id(9));
  {
    std::ofstream ids(gen() / "ids.txt");
    for (int i = 0; i < 20; ++i) ids << "u" << i << "\n";
  }
  auto r = EvaluateCorpus(ref(), gen(), oracle_, cfg_);
  EXPECT_EQ(r.records.size(), 18u);
  EXPECT_EQ(r.missing, (std::vector<std::string>{"u4", "u9"}));
}

TEST_F(EvaluateTest, TooManyMissingIdsFail) {
  for (int i = 0; i < 3; ++i) std::filesystem::remove(ref() / Id(i));
  MetricReport partial;
  EXPECT_THROW(EvaluateCorpus(ref(), gen(), oracle_, cfg_, &partial), ValidationError);
  EXPECT_EQ(partial.records.size(), 17u);
  EXPECT_EQ(partial.missing.size(), 3u);
}

TEST_F(EvaluateTest, EmptyIntersectionFails) {
  testing::TempDir other("eval_other");
  WriteF32m(other.path() / "x.f32m", torch::zeros({80, 8}));
  EXPECT_THROW(EvaluateCorpus(ref(), other.path(), oracle_, cfg_), ValidationError);
  EXPECT_THROW(EvaluateCorpus(ref(), dir_.path() / "absent", oracle_, cfg_), ValidationError);
}

}  // namespace
}  // namespace v2s
