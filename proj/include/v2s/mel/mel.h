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

#ifndef V2S_MEL_MEL_H_
#define V2S_MEL_MEL_H_

#include <cstdint>

#include <torch/torch.h>

namespace v2s {

constexpr int kSampleRate = 16000;

struct Waveform {
  torch::Tensor samples;  // [N] float32
  int sample_rate = kSampleRate;

  int64_t size() const { return samples.defined() ? samples.numel() : 0; }
};

// Log-mel spectrogram normalized into [-1, 1]; values are [n_mels x S] at 100 Hz.
struct MelSpectrogram {
  torch::Tensor values;

  int64_t bands() const { return values.size(0); }
  int64_t frames() const { return values.size(1); }
};

// Groups of `stack_factor` consecutive mel frames flattened into one row,
// [L x n_mels*stack_factor] at 25 Hz.
struct StackedMel {
  torch::Tensor values;

  int64_t frames() const { return values.size(0); }
};

struct MelConfig {
  int fft_window = 640;
  int hop = 160;
  int n_mels = 80;
  int stack_factor = 4;
  int sample_rate = kSampleRate;
  double f_min = 0.0;
  double f_max = 8000.0;
  double log_floor = 1e-5;
  // Dataset-level natural-log mel bounds mapped onto -1 and +1.
  float norm_lo = -11.512925f;
  float norm_hi = 2.0f;

  int n_freqs() const { return fft_window / 2 + 1; }
  int stacked_dim() const { return n_mels * stack_factor; }
  // Throws ValidationError on inconsistent settings.
  void Validate() const;
};

// Slaney-style triangular filters with area normalization, [n_mels x n_freqs].
torch::Tensor MelFilterbank(const MelConfig& cfg);

// Slaney mel scale (linear below 1 kHz, logarithmic above).
double HzToMel(double hz);
double MelToHz(double mel);

// |STFT| with a periodic Hann window and centred reflect padding,
// [n_freqs x S] where S = floor(N / hop) truncated to a multiple of
// stack_factor.
torch::Tensor MagnitudeSpectrogram(const Waveform& w, const MelConfig& cfg);

// Natural-log mel energies with floor clamp, [n_mels x S].
torch::Tensor LogMelFromMagnitude(const torch::Tensor& magnitude,
                                  const MelConfig& cfg);
torch::Tensor ComputeLogMel(const Waveform& w, const MelConfig& cfg);

// Affine map of log-mel values onto [-1, 1] using (norm_lo, norm_hi), clamped.
torch::Tensor NormalizeLogMel(const torch::Tensor& log_mel, const MelConfig& cfg);
torch::Tensor DenormalizeMel(const torch::Tensor& mel, const MelConfig& cfg);

MelSpectrogram ComputeMel(const Waveform& w, const MelConfig& cfg);

// Row l of the result is frames 4l..4l+3 concatenated in time order.
StackedMel StackFrames(const MelSpectrogram& m, int stack_factor = 4);
MelSpectrogram UnstackFrames(const StackedMel& x, int n_mels = 80,
                             int stack_factor = 4);

// Differentiable tensor forms with optional leading batch dimensions:
// [..., n_mels, S] <-> [..., S/stack, n_mels*stack].
torch::Tensor StackTensor(const torch::Tensor& mel, int stack_factor = 4);
torch::Tensor UnstackTensor(const torch::Tensor& stacked, int n_mels = 80,
                            int stack_factor = 4);

// Mel pseudo-inverse followed by Griffin-Lim phase recovery. Output has
// S * hop samples. Quality is best-effort.
Waveform InvertMel(const MelSpectrogram& m, const MelConfig& cfg, int iters);

}  // namespace v2s

#endif  // V2S_MEL_MEL_H_
