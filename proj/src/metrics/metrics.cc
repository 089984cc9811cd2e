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

#include "v2s/metrics/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

#include "v2s/common/array_io.h"
#include "v2s/common/errors.h"
#include "v2s/corpus/corpus.h"

namespace v2s {

namespace {

constexpr double kMaxMissingFraction = 0.1;

void CheckSameShape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.dim() != 2 || a.sizes() != b.sizes()) {
    throw ValidationError(std::string(what) + " needs two [n_mels, S] mels of equal shape");
  }
}

std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

double L1Mel(const torch::Tensor& ref, const torch::Tensor& gen) {
  CheckSameShape(ref, gen, "l1");
  return (ref.to(torch::kFloat64) - gen.to(torch::kFloat64)).abs().mean().item<double>();
}

torch::Tensor DctMatrix(int64_t n) {
  auto k = torch::arange(n, torch::kFloat64).unsqueeze(1);
  auto i = torch::arange(n, torch::kFloat64).unsqueeze(0);
  auto d = torch::cos(std::numbers::pi / static_cast<double>(n) * (i + 0.5) * k);
  auto scale = torch::full({n, 1}, std::sqrt(2.0 / static_cast<double>(n)), torch::kFloat64);
  scale[0] = std::sqrt(1.0 / static_cast<double>(n));
  return d * scale;
}

torch::Tensor MelCepstrum(const torch::Tensor& log_mel, int order) {
  if (log_mel.dim() != 2 || order < 1 || order >= log_mel.size(0)) {
    throw ValidationError("cepstrum needs [n_mels, S] input and 1 <= order < n_mels");
  }
  auto c = torch::matmul(DctMatrix(log_mel.size(0)), log_mel.to(torch::kFloat64));
  return c.narrow(0, 1, order).t();
}

double McdLogMel(const torch::Tensor& ref_log, const torch::Tensor& gen_log) {
  CheckSameShape(ref_log, gen_log, "mcd");
  auto diff = MelCepstrum(ref_log) - MelCepstrum(gen_log);
  const double k = 10.0 / std::log(10.0) * std::sqrt(2.0);
  return k * diff.pow(2).sum(1).sqrt().mean().item<double>();
}

double Mcd(const torch::Tensor& ref, const torch::Tensor& gen, const MelConfig& cfg) {
  CheckSameShape(ref, gen, "mcd");
  return McdLogMel(DenormalizeMel(ref.to(torch::kFloat64), cfg),
                   DenormalizeMel(gen.to(torch::kFloat64), cfg));
}

double Secs(const torch::Tensor& ref, const torch::Tensor& gen, SpeakerGuidanceEncoder& oracle) {
  CheckSameShape(ref, gen, "secs");
  torch::NoGradGuard no_grad;
  auto e = oracle(torch::stack({ref, gen}).to(torch::kFloat32));
  return (e[0] * e[1]).sum().item<double>();
}

std::string MetricReport::ToCsv() const {
  std::string out = "id,l1,mcd_db,secs\n";
  auto row = [&out](const MetricRecord& r) {
    out += r.id + "," + Fmt(r.l1) + "," + Fmt(r.mcd_db) + "," + Fmt(r.secs) + "\n";
  };
  for (const auto& r : records) row(r);
  row(mean);
  row(std);
  return out;
}

std::filesystem::path MelDirectory(const std::filesystem::path& dir) {
  if (std::filesystem::exists(dir / kManifestName)) return dir / "mel";
  return dir;
}

MetricReport EvaluateCorpus(const std::filesystem::path& ref_dir,
                            const std::filesystem::path& gen_dir,
                            SpeakerGuidanceEncoder& oracle, const MelConfig& cfg,
                            MetricReport* out) {
  const auto ref = MelDirectory(ref_dir);
  const auto gen = MelDirectory(gen_dir);
  if (!std::filesystem::is_directory(ref) || !std::filesystem::is_directory(gen)) {
    throw ValidationError("evaluation directories must exist");
  }
  std::set<std::string> expected;
  if (std::ifstream list(gen / "ids.txt"); list) {
    for (std::string id; std::getline(list, id);) {
      if (!id.empty()) expected.insert(id);
    }
  } else {
    for (const auto& entry : std::filesystem::directory_iterator(gen)) {
      if (entry.path().extension() == ".f32m") expected.insert(entry.path().stem().string());
    }
  }

  MetricReport report;
  for (const auto& id : expected) {
    const auto r = ref / (id + ".f32m");
    const auto g = gen / (id + ".f32m");
    if (!std::filesystem::exists(r) || !std::filesystem::exists(g)) {
      report.missing.push_back(id);
      continue;
    }
    const auto a = ReadF32m(r);
    const auto b = ReadF32m(g);
    report.records.push_back(MetricRecord{id, L1Mel(a, b), Mcd(a, b, cfg), Secs(a, b, oracle)});
  }

  const double n = static_cast<double>(report.records.size());
  report.mean.id = "MEAN";
  report.std.id = "STD";
  for (const auto& r : report.records) {
    report.mean.l1 += r.l1 / n;
    report.mean.mcd_db += r.mcd_db / n;
    report.mean.secs += r.secs / n;
  }
  for (const auto& r : report.records) {
    report.std.l1 += std::pow(r.l1 - report.mean.l1, 2) / n;
    report.std.mcd_db += std::pow(r.mcd_db - report.mean.mcd_db, 2) / n;
    report.std.secs += std::pow(r.secs - report.mean.secs, 2) / n;
  }
  report.std.l1 = std::sqrt(report.std.l1);
  report.std.mcd_db = std::sqrt(report.std.mcd_db);
  report.std.secs = std::sqrt(report.std.secs);
  if (out) *out = report;

  if (report.records.empty()) throw ValidationError("no utterance has both a reference and a generated mel");
  if (static_cast<double>(report.missing.size()) >
      kMaxMissingFraction * static_cast<double>(expected.size())) {
    throw ValidationError(std::to_string(report.missing.size()) + " of " +
                          std::to_string(expected.size()) + " utterances are missing");
  }
  return report;
}

}  // namespace v2s
