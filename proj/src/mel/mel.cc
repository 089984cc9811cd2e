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

#include "v2s/mel/mel.h"

#include <cmath>
#include <string>

#include "v2s/common/errors.h"

namespace v2s {

namespace {

constexpr double kSlaneyLinearStep = 200.0 / 3.0;
constexpr double kSlaneyBreakHz = 1000.0;
constexpr double kSlaneyBreakMel = kSlaneyBreakHz / kSlaneyLinearStep;
const double kSlaneyLogStep = std::log(6.4) / 27.0;

torch::Tensor HannWindow(const MelConfig& cfg, torch::Dtype dtype) {
  return torch::hann_window(cfg.fft_window,
                            torch::TensorOptions().dtype(dtype));
}

torch::Tensor Stft(const torch::Tensor& signal, const MelConfig& cfg) {
  return torch::stft(signal, cfg.fft_window, cfg.hop, cfg.fft_window,
                     HannWindow(cfg, signal.scalar_type()), /*center=*/true,
                     /*pad_mode=*/"reflect", /*normalized=*/false,
                     /*onesided=*/true, /*return_complex=*/true);
}

void CheckStackable(int64_t frames, int stack_factor) {
  if (stack_factor <= 0 || frames % stack_factor != 0) {
    throw ValidationError("mel frame count " + std::to_string(frames) +
                          " is not divisible by " + std::to_string(stack_factor));
  }
}

}  // namespace

void MelConfig::Validate() const {
  if (hop <= 0 || fft_window != 4 * hop) {
    throw ValidationError("fft_window must equal 4*hop");
  }
  if (stack_factor * 25 != 100) {
    throw ValidationError("stack_factor must bring 100 Hz frames to 25 Hz");
  }
  if (n_mels <= 0) throw ValidationError("n_mels must be positive");
  if (sample_rate != kSampleRate) throw ValidationError("sample rate must be 16000");
  if (!(f_min >= 0.0 && f_max > f_min && f_max <= sample_rate / 2.0)) {
    throw ValidationError("invalid mel frequency range");
  }
  if (!(log_floor > 0.0)) throw ValidationError("log_floor must be positive");
  if (!(norm_hi > norm_lo)) throw ValidationError("norm_lo must be below norm_hi");
}

double HzToMel(double hz) {
  if (hz < kSlaneyBreakHz) return hz / kSlaneyLinearStep;
  return kSlaneyBreakMel + std::log(hz / kSlaneyBreakHz) / kSlaneyLogStep;
}

double MelToHz(double mel) {
  if (mel < kSlaneyBreakMel) return mel * kSlaneyLinearStep;
  return kSlaneyBreakHz * std::exp(kSlaneyLogStep * (mel - kSlaneyBreakMel));
}

torch::Tensor MelFilterbank(const MelConfig& cfg) {
  const int n_freqs = cfg.n_freqs();
  const double mel_lo = HzToMel(cfg.f_min);
  const double mel_hi = HzToMel(cfg.f_max);
  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));
  }
  auto fb = torch::zeros({cfg.n_mels, n_freqs}, torch::kFloat64);
  auto acc = fb.accessor<double, 2>();
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], centre = edges[m + 1], right = edges[m + 2];
    const double area_norm = 2.0 / (right - left);
    for (int k = 0; k < n_freqs; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_window;
      const double rising = (f - left) / (centre - left);
      const double falling = (right - f) / (right - centre);
      const double w = std::max(0.0, std::min(rising, falling));
      acc[m][k] = w * area_norm;
    }
  }
  return fb.to(torch::kFloat32);
}

torch::Tensor MagnitudeSpectrogram(const Waveform& w, const MelConfig& cfg) {
  cfg.Validate();
  if (w.sample_rate != cfg.sample_rate) {
    throw ValidationError("waveform sample rate " + std::to_string(w.sample_rate) +
                          " != " + std::to_string(cfg.sample_rate));
  }
  if (!w.samples.defined() || w.samples.dim() != 1) {
    throw ValidationError("waveform must be a 1-D sample array");
  }
  if (w.size() < cfg.fft_window) {
    throw ValidationError("waveform has " + std::to_string(w.size()) +
                          " samples, need at least " +
                          std::to_string(cfg.fft_window));
  }
  auto samples = w.samples.to(torch::kFloat32).contiguous();
  if (!torch::isfinite(samples).all().item<bool>()) {
    throw ValidationError("waveform contains non-finite samples");
  }
  int64_t frames = w.size() / cfg.hop;
  frames -= frames % cfg.stack_factor;
  if (frames == 0) throw ValidationError("waveform too short for one stacked frame");
  auto spec = Stft(samples, cfg).abs();
  return spec.narrow(1, 0, frames).contiguous();
}

torch::Tensor LogMelFromMagnitude(const torch::Tensor& magnitude,
                                  const MelConfig& cfg) {
  auto mel = torch::matmul(MelFilterbank(cfg), magnitude.to(torch::kFloat32));
  return torch::log(torch::clamp_min(mel, cfg.log_floor));
}

torch::Tensor ComputeLogMel(const Waveform& w, const MelConfig& cfg) {
  return LogMelFromMagnitude(MagnitudeSpectrogram(w, cfg), cfg);
}

torch::Tensor NormalizeLogMel(const torch::Tensor& log_mel, const MelConfig& cfg) {
  const double scale = 2.0 / (static_cast<double>(cfg.norm_hi) - cfg.norm_lo);
  return torch::clamp((log_mel - cfg.norm_lo) * scale - 1.0, -1.0, 1.0);
}

torch::Tensor DenormalizeMel(const torch::Tensor& mel, const MelConfig& cfg) {
  const double half_range = (static_cast<double>(cfg.norm_hi) - cfg.norm_lo) / 2.0;
  return (mel + 1.0) * half_range + cfg.norm_lo;
}

MelSpectrogram ComputeMel(const Waveform& w, const MelConfig& cfg) {
  return MelSpectrogram{NormalizeLogMel(ComputeLogMel(w, cfg), cfg)};
}

torch::Tensor StackTensor(const torch::Tensor& mel, int stack_factor) {
  if (mel.dim() < 2) throw ValidationError("mel tensor needs at least 2 dims");
  const int64_t bands = mel.size(-2);
  const int64_t frames = mel.size(-1);
  CheckStackable(frames, stack_factor);
  auto lead = mel.sizes().slice(0, mel.dim() - 2).vec();
  auto shape = lead;
  shape.push_back(frames / stack_factor);
  shape.push_back(bands * stack_factor);
  return mel.transpose(-1, -2).contiguous().reshape(shape);
}

torch::Tensor UnstackTensor(const torch::Tensor& stacked, int n_mels,
                            int stack_factor) {
  if (stacked.dim() < 2 || stacked.size(-1) != n_mels * stack_factor) {
    throw ValidationError("stacked mel must have " +
                          std::to_string(n_mels * stack_factor) + " columns");
  }
  auto lead = stacked.sizes().slice(0, stacked.dim() - 2).vec();
  auto shape = lead;
  shape.push_back(stacked.size(-2) * stack_factor);
  shape.push_back(n_mels);
  return stacked.reshape(shape).transpose(-1, -2).contiguous();
}

StackedMel StackFrames(const MelSpectrogram& m, int stack_factor) {
  if (!m.values.defined() || m.values.dim() != 2) {
    throw ValidationError("mel spectrogram must be 2-D");
  }
  return StackedMel{StackTensor(m.values, stack_factor)};
}

MelSpectrogram UnstackFrames(const StackedMel& x, int n_mels, int stack_factor) {
  if (!x.values.defined() || x.values.dim() != 2) {
    throw ValidationError("stacked mel must be 2-D");
  }
  return MelSpectrogram{UnstackTensor(x.values, n_mels, stack_factor)};
}

Waveform InvertMel(const MelSpectrogram& m, const MelConfig& cfg, int iters) {
  cfg.Validate();
  if (iters <= 0) throw ValidationError("Griffin-Lim needs at least one iteration");
  if (!m.values.defined() || m.values.dim() != 2 || m.bands() != cfg.n_mels) {
    throw ValidationError("mel must be [" + std::to_string(cfg.n_mels) + " x S]");
  }
  const int64_t frames = m.frames();
  auto energy = torch::exp(DenormalizeMel(m.values.to(torch::kFloat64), cfg)) -
                cfg.log_floor;
  energy = torch::clamp_min(energy, 0.0);
  auto fb = MelFilterbank(cfg).to(torch::kFloat64);
  auto magnitude = torch::clamp_min(torch::matmul(torch::linalg_pinv(fb), energy), 0.0);
  // Centred STFT of S*hop samples yields S+1 frames; the extra one is silent.
  magnitude = torch::cat({magnitude, torch::zeros({magnitude.size(0), 1},
                                                  torch::kFloat64)}, 1);
  const int64_t length = frames * cfg.hop;
  auto window = HannWindow(cfg, torch::kFloat64);

  auto gen = at::detail::createCPUGenerator(0);
  auto phase = torch::rand(magnitude.sizes(), gen, torch::kFloat64) * (2.0 * M_PI);
  auto angles = torch::polar(torch::ones_like(phase), phase);
  torch::Tensor signal;
  for (int i = 0; i <= iters; ++i) {
    signal = torch::istft(magnitude * angles, cfg.fft_window, cfg.hop,
                          cfg.fft_window, window, /*center=*/true,
                          /*normalized=*/false, /*onesided=*/true, length);
    if (i == iters) break;
    auto rebuilt = Stft(signal, cfg);
    angles = rebuilt / torch::clamp_min(rebuilt.abs(), 1e-12);
  }
  return Waveform{signal.to(torch::kFloat32).contiguous(), cfg.sample_rate};
}

}  // namespace v2s
