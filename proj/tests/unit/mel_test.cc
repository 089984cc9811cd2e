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
#include <numbers>

#include <gtest/gtest.h>

#include "v2s/common/errors.h"
#include "v2s/mel/mel.h"

namespace v2s {
namespace {

Waveform Tone(double hz, int64_t n, double amp = 0.5) {
  auto t = torch::arange(n, torch::kFloat64) / kSampleRate;
  return Waveform{(amp * torch::sin(2.0 * std::numbers::pi * hz * t)).to(torch::kFloat32)};
}

// Slaney mel scale written out independently of the library.
double SlaneyMel(double hz) {
  const double f_sp = 200.0 / 3.0;
  if (hz < 1000.0) return hz / f_sp;
  return 1000.0 / f_sp + std::log(hz / 1000.0) / (std::log(6.4) / 27.0);
}

double SlaneyHz(double mel) {
  const double f_sp = 200.0 / 3.0;
  if (mel < 1000.0 / f_sp) return mel * f_sp;
  return 1000.0 * std::exp((std::log(6.4) / 27.0) * (mel - 1000.0 / f_sp));
}

TEST(MelTest, SilenceMapsToFloor) {
  MelConfig cfg;
  auto m = ComputeMel(Waveform{torch::zeros({20480})}, cfg);
  EXPECT_NEAR(m.values.min().item<double>(), -1.0, 1e-6);
  EXPECT_NEAR(m.values.max().item<double>(), -1.0, 1e-6);
}

TEST(MelTest, FrameCountForOnePointTwoEightSeconds) {
  MelConfig cfg;
  auto m = ComputeMel(Tone(300.0, 20480), cfg);
  EXPECT_EQ(m.bands(), 80);
  EXPECT_EQ(m.frames(), 128);
  EXPECT_EQ(StackFrames(m).frames(), 32);
}

TEST(MelTest, TruncatesToMultipleOfStack) {
  MelConfig cfg;
  // 20480 + 700 samples -> floor(21180 / 160) = 132 frames, already a multiple of 4;
  // 20480 + 300 -> 129 frames -> truncated to 128.
  EXPECT_EQ(ComputeMel(Tone(300.0, 20780), cfg).frames(), 128);
  EXPECT_EQ(ComputeMel(Tone(300.0, 21180), cfg).frames(), 132);
}

TEST(MelTest, ToneEnergyPeaksInNearestBand) {
  MelConfig cfg;
  const double tone = 440.0;
  auto m = ComputeMel(Tone(tone, 16000), cfg);
  const int64_t got = m.values.mean(1).argmax().item<int64_t>();

  const double lo = SlaneyMel(0.0), hi = SlaneyMel(8000.0);
  int64_t expected = -1;
  double best = 1e9;
  for (int k = 0; k < 80; ++k) {
    const double center = SlaneyHz(lo + (hi - lo) * (k + 1) / 81.0);
    if (std::abs(center - tone) < best) {
      best = std::abs(center - tone);
      expected = k;
    }
  }
  EXPECT_EQ(got, expected);
}

TEST(MelTest, FilterbankCentersMatchIndependentScale) {
  MelConfig cfg;
  auto fb = MelFilterbank(cfg);
  ASSERT_EQ(fb.size(0), 80);
  ASSERT_EQ(fb.size(1), 321);
  EXPECT_NEAR(HzToMel(440.0), SlaneyMel(440.0), 1e-12);
  EXPECT_NEAR(HzToMel(3000.0), SlaneyMel(3000.0), 1e-12);
  EXPECT_NEAR(MelToHz(HzToMel(2500.0)), 2500.0, 1e-9);
}

TEST(MelTest, RejectsShortOrNonFiniteInput) {
  MelConfig cfg;
  EXPECT_THROW(ComputeMel(Waveform{torch::zeros({639})}, cfg), ValidationError);
  auto bad = torch::zeros({2048});
  bad[100] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(ComputeMel(Waveform{bad}, cfg), ValidationError);
  EXPECT_THROW(ComputeMel(Waveform{torch::zeros({2048}), 8000}, cfg), ValidationError);
}

TEST(MelTest, OutputRangeAndDeterminism) {
  MelConfig cfg;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(3);
  Waveform w{torch::randn({8000}, gen) * 3.0};
  auto a = ComputeMel(w, cfg).values;
  auto b = ComputeMel(w, cfg).values;
  EXPECT_TRUE(torch::equal(a, b));
  EXPECT_GE(a.min().item<double>(), -1.0);
  EXPECT_LE(a.max().item<double>(), 1.0);
}

TEST(MelTest, MonotoneInMagnitude) {
  MelConfig cfg;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(5);
  auto mag = torch::rand({321, 8}, gen) * 0.1;
  auto bigger = mag + torch::rand({321, 8}, gen) * 0.1;
  auto a = NormalizeLogMel(LogMelFromMagnitude(mag, cfg), cfg);
  auto b = NormalizeLogMel(LogMelFromMagnitude(bigger, cfg), cfg);
  EXPECT_TRUE((b >= a).all().item<bool>());
}

TEST(MelTest, StackOfFourFramesIsFrameOrder) {
  auto m = torch::arange(320, torch::kFloat32).reshape({80, 4});
  auto x = StackFrames(MelSpectrogram{m}).values;
  ASSERT_EQ(x.size(0), 1);
  ASSERT_EQ(x.size(1), 320);
  for (int j = 0; j < 4; ++j) {
    for (int b = 0; b < 80; ++b) {
      ASSERT_EQ(x[0][j * 80 + b].item<float>(), m[b][j].item<float>());
    }
  }
}

TEST(MelTest, StackIndexArithmetic) {
  const int s = 16;
  auto m = (torch::arange(s, torch::kFloat32) / s).unsqueeze(0).expand({80, s}).contiguous();
  auto x = StackFrames(MelSpectrogram{m}).values;
  ASSERT_EQ(x.size(0), s / 4);
  for (int l = 0; l < s / 4; ++l) {
    for (int j = 0; j < 4; ++j) {
      const float expected = static_cast<float>(4 * l + j) / s;
      auto block = x[l].narrow(0, j * 80, 80);
      EXPECT_TRUE((block == expected).all().item<bool>()) << "row " << l << " block " << j;
    }
  }
}

TEST(MelTest, StackRoundTripsBitExactly) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(11);
  auto m = torch::randn({80, 24}, gen);
  EXPECT_TRUE(torch::equal(UnstackFrames(StackFrames(MelSpectrogram{m})).values, m));
  auto x = torch::randn({6, 320}, gen);
  EXPECT_TRUE(torch::equal(StackFrames(UnstackFrames(StackedMel{x})).values, x));
  auto batched = torch::randn({3, 80, 8}, gen);
  EXPECT_TRUE(torch::equal(UnstackTensor(StackTensor(batched)), batched));
}

TEST(MelTest, UnstackZeros) {
  auto m = UnstackFrames(StackedMel{torch::zeros({2, 320})});
  EXPECT_EQ(m.bands(), 80);
  EXPECT_EQ(m.frames(), 8);
  EXPECT_EQ(m.values.abs().sum().item<double>(), 0.0);
}

TEST(MelTest, StackRejectsBadShapes) {
  EXPECT_THROW(StackFrames(MelSpectrogram{torch::zeros({80, 6})}), ValidationError);
  EXPECT_THROW(UnstackFrames(StackedMel{torch::zeros({2, 300})}), ValidationError);
}

TEST(MelTest, InvertRejectsZeroIterations) {
  MelConfig cfg;
  EXPECT_THROW(InvertMel(MelSpectrogram{torch::zeros({80, 8})}, cfg, 0), ValidationError);
}

TEST(MelTest, InvertFloorIsNearSilentWithExpectedLength) {
  MelConfig cfg;
  auto w = InvertMel(MelSpectrogram{torch::full({80, 16}, -1.0)}, cfg, 8);
  EXPECT_EQ(w.size(), 16 * 160);
  EXPECT_LT(w.samples.pow(2).mean().sqrt().item<double>(), 1e-3);
}

TEST(MelTest, InvertBeatsShuffledFrameBaseline) {
  MelConfig cfg;
  auto t = torch::arange(16000, torch::kFloat64) / kSampleRate;
  // Gliding tone so frames differ from one another.
  auto phase = 2.0 * std::numbers::pi * (200.0 * t + 400.0 * t * t);
  Waveform w{(0.4 * torch::sin(phase)).to(torch::kFloat32)};
  auto m = ComputeMel(w, cfg).values;
  auto back = ComputeMel(InvertMel(MelSpectrogram{m}, cfg, 32), cfg).values;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(2);
  auto shuffled = m.index_select(1, torch::randperm(m.size(1), gen));
  const double recon = (back - m).abs().mean().item<double>();
  const double baseline = (shuffled - m).abs().mean().item<double>();
  EXPECT_LT(recon, baseline);
}

}  // namespace
}  // namespace v2s
