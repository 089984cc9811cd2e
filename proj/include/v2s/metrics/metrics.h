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

#ifndef V2S_METRICS_METRICS_H_
#define V2S_METRICS_METRICS_H_

#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "v2s/encoders/encoders.h"
#include "v2s/mel/mel.h"

namespace v2s {

constexpr int kCepstralOrder = 13;

// Mean absolute difference of two normalized mels [n_mels, S].
double L1Mel(const torch::Tensor& ref, const torch::Tensor& gen);

// Orthonormal DCT-II matrix [n, n]; row k holds basis function k.
torch::Tensor DctMatrix(int64_t n);

// Cepstral coefficients 1..order of each frame of a natural-log mel
// [n_mels, S] -> [S, order].
torch::Tensor MelCepstrum(const torch::Tensor& log_mel, int order = kCepstralOrder);

// Mel cepstral distortion in dB between two normalized mels. Both are mapped
// back to log-mel with `cfg`'s bounds first.
double Mcd(const torch::Tensor& ref, const torch::Tensor& gen, const MelConfig& cfg);
// Same, on natural-log mels directly.
double McdLogMel(const torch::Tensor& ref_log, const torch::Tensor& gen_log);

// Cosine of the oracle embeddings of two mels.
double Secs(const torch::Tensor& ref, const torch::Tensor& gen, SpeakerGuidanceEncoder& oracle);

struct MetricRecord {
  std::string id;
  double l1 = 0.0;
  double mcd_db = 0.0;
  double secs = 0.0;
};

struct MetricReport {
  std::vector<MetricRecord> records;
  std::vector<std::string> missing;  // expected ids without both files
  MetricRecord mean, std;            // population statistics

  std::string ToCsv() const;
};

// Directory of `<id>.f32m` mels. A corpus directory resolves to its mel/.
std::filesystem::path MelDirectory(const std::filesystem::path& dir);

// Scores every expected id. The expected set is the id list in
// `<gen_dir>/ids.txt` when present, else every mel in `gen_dir`.
// Throws ValidationError if no id has both files or more than 10% are missing;
// the partial report is still filled in through `out` when given.
MetricReport EvaluateCorpus(const std::filesystem::path& ref_dir,
                            const std::filesystem::path& gen_dir,
                            SpeakerGuidanceEncoder& oracle, const MelConfig& cfg,
                            MetricReport* out = nullptr);

}  // namespace v2s

#endif  // V2S_METRICS_METRICS_H_
