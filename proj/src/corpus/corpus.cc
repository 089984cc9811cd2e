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

#include "v2s/corpus/corpus.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "v2s/common/array_io.h"
#include "v2s/common/checkpoint.h"
#include "v2s/common/errors.h"
#include "v2s/common/hashing.h"
#include "v2s/common/threading.h"

namespace v2s {

namespace {

// Sum of Gaussian bumps over [0, n), i.e. a smooth formant-like contour.
std::vector<double> Bumps(std::mt19937_64& rng, int n, int count,
                          double centre_lo, double centre_hi, double width_lo,
                          double width_hi, double amp_lo, double amp_hi,
                          bool signed_amp) {
  std::uniform_real_distribution<double> centre(centre_lo, centre_hi);
  std::uniform_real_distribution<double> width(width_lo, width_hi);
  std::uniform_real_distribution<double> amp(amp_lo, amp_hi);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> out(n, 0.0);
  for (int b = 0; b < count; ++b) {
    const double c = centre(rng), w = width(rng);
    double a = amp(rng);
    if (signed_amp && sign(rng)) a = -a;
    for (int i = 0; i < n; ++i) {
      const double z = (i - c) / w;
      out[i] += a * std::exp(-0.5 * z * z);
    }
  }
  return out;
}

std::vector<float> UnitNormalize(const std::vector<double>& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  std::vector<float> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

std::vector<double> GaussianVector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

// Linear interpolation of a per-band contour at fractional band position.
double SampleContour(const float* contour, int n, double position) {
  position = std::clamp(position, 0.0, static_cast<double>(n - 1));
  const int lo = static_cast<int>(std::floor(position));
  const int hi = std::min(lo + 1, n - 1);
  const double frac = position - lo;
  return contour[lo] * (1.0 - frac) + contour[hi] * frac;
}

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string FormatFloat(float v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

std::vector<std::string> SplitOn(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void CorpusConfig::Validate() const {
  if (n_speakers <= heldout_speakers || heldout_speakers < 0) {
    throw ValidationError("need more speakers than held-out speakers");
  }
  if (utts_per_speaker < 2) throw ValidationError("need at least 2 utterances per speaker");
  if (frames < 8) throw ValidationError("utterances need at least 8 frames");
  if (d_vis <= 0 || vocab <= 1) throw ValidationError("invalid d_vis or vocab");
  if (visual_noise < 0 || offset_scale < 0) {
    throw ValidationError("visual noise and offset scale must be non-negative");
  }
  if ((kMaxF0 - kMinF0) / kMinF0Gap < n_speakers) {
    throw ValidationError("too many speakers for the f0 range");
  }
}

ToySpeaker MakeSpeaker(uint64_t seed, int d_vis, int n_mels) {
  std::mt19937_64 rng(seed);
  ToySpeaker spk;
  spk.id = 0;
  spk.seed = seed;
  spk.f0 = std::uniform_real_distribution<double>(kMinF0, kMaxF0)(rng);
  auto contour = Bumps(rng, n_mels, 4, 4.0, n_mels - 4.0, 3.0, 9.0, 0.5, 1.5,
                       /*signed_amp=*/true);
  double mean = 0.0;
  for (double x : contour) mean += x;
  mean /= n_mels;
  for (double& x : contour) x -= mean;
  spk.formant_signature = UnitNormalize(contour);
  spk.articulation_offset = UnitNormalize(GaussianVector(rng, d_vis));
  return spk;
}

std::vector<ToySpeaker> MakeSpeakerSet(int count, uint64_t seed, int d_vis,
                                       int n_mels) {
  std::vector<ToySpeaker> out;
  for (int i = 0; i < count; ++i) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) throw ValidationError("cannot place speaker f0 values");
      auto cand = MakeSpeaker(
          DeriveSeed(seed, "speaker/" + std::to_string(i) + "/" + std::to_string(attempt)),
          d_vis, n_mels);
      const bool clash = std::any_of(out.begin(), out.end(), [&](const ToySpeaker& s) {
        return std::abs(s.f0 - cand.f0) < kMinF0Gap;
      });
      if (clash) continue;
      cand.id = i;
      out.push_back(std::move(cand));
      break;
    }
  }
  return out;
}

TokenInventory MakeTokenInventory(uint64_t master_seed, int vocab, int d_vis,
                                  int n_mels) {
  std::mt19937_64 rng(DeriveSeed(master_seed, "tokens"));
  TokenInventory inv;
  inv.visual = torch::empty({vocab, d_vis}, torch::kFloat32);
  inv.envelope = torch::empty({vocab, n_mels}, torch::kFloat32);
  auto vis = inv.visual.accessor<float, 2>();
  auto env = inv.envelope.accessor<float, 2>();
  for (int k = 0; k < vocab; ++k) {
    auto v = UnitNormalize(GaussianVector(rng, d_vis));
    for (int j = 0; j < d_vis; ++j) vis[k][j] = v[j];
    auto e = Bumps(rng, n_mels, 3, 2.0, n_mels - 2.0, 2.0, 6.0, 0.5, 1.5,
                   /*signed_amp=*/false);
    for (int j = 0; j < n_mels; ++j) env[k][j] = static_cast<float>(e[j]);
  }
  return inv;
}

std::vector<int> RandomContent(uint64_t seed, int length, int vocab) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> tok(0, vocab - 1);
  std::vector<int> out(length);
  for (auto& t : out) t = tok(rng);
  return out;
}

ToyUtterance SynthUtterance(const ToySpeaker& speaker,
                            const std::vector<int>& content, uint64_t seed,
                            const TokenInventory& tokens,
                            const CorpusConfig& cfg, const MelConfig& mel_cfg) {
  const int vocab = static_cast<int>(tokens.visual.size(0));
  const int d_vis = static_cast<int>(tokens.visual.size(1));
  const int n_mels = static_cast<int>(tokens.envelope.size(1));
  if (content.size() < 8) throw ValidationError("content needs at least 8 tokens");
  for (int t : content) {
    if (t < 0 || t >= vocab) {
      throw ValidationError("unknown token " + std::to_string(t));
    }
  }
  if (static_cast<int>(speaker.articulation_offset.size()) != d_vis ||
      static_cast<int>(speaker.formant_signature.size()) != n_mels) {
    throw ValidationError("speaker dimensions do not match the token inventory");
  }

  const int L = static_cast<int>(content.size());
  const int seg = cfg.samples_per_frame();
  const int ramp = mel_cfg.hop;
  const int64_t n_samples = static_cast<int64_t>(L) * seg;
  const int n_harm = static_cast<int>(std::floor(0.98 * (kSampleRate / 2.0) / speaker.f0));

  // Log-amplitude of each harmonic per token: token envelope plus the
  // speaker's spectral signature, both sampled on the mel-band axis.
  const double mel_lo = HzToMel(mel_cfg.f_min), mel_hi = HzToMel(mel_cfg.f_max);
  const double sig_scale = cfg.speaker_gain * std::sqrt(static_cast<double>(n_mels));
  auto env = tokens.envelope.contiguous();
  std::vector<double> band_pos(n_harm);
  std::vector<double> speaker_part(n_harm);
  for (int h = 0; h < n_harm; ++h) {
    const double f = (h + 1) * speaker.f0;
    band_pos[h] = (HzToMel(f) - mel_lo) / (mel_hi - mel_lo) * (n_mels + 1) - 1.0;
    speaker_part[h] =
        sig_scale * SampleContour(speaker.formant_signature.data(), n_mels, band_pos[h]);
  }
  auto amplitudes = [&](int token) {
    std::vector<double> a(n_harm);
    const float* contour = env.data_ptr<float>() + static_cast<int64_t>(token) * n_mels;
    for (int h = 0; h < n_harm; ++h) {
      a[h] = std::exp(cfg.token_gain * SampleContour(contour, n_mels, band_pos[h]) +
                      speaker_part[h]);
    }
    return a;
  };

  std::mt19937_64 phase_rng(DeriveSeed(seed, "phase"));
  std::uniform_real_distribution<double> uni_phase(0.0, 2.0 * M_PI);
  std::vector<double> phase(n_harm);
  for (auto& p : phase) p = uni_phase(phase_rng);

  std::vector<double> signal(n_samples, 0.0);
  std::vector<double> prev = amplitudes(content[0]);
  const double omega = 2.0 * M_PI * speaker.f0 / kSampleRate;
  for (int l = 0; l < L; ++l) {
    const auto cur = amplitudes(content[l]);
    for (int i = 0; i < seg; ++i) {
      const int64_t n = static_cast<int64_t>(l) * seg + i;
      const double r = std::min(1.0, (i + 1.0) / ramp);
      double acc = 0.0;
      for (int h = 0; h < n_harm; ++h) {
        const double a = prev[h] + (cur[h] - prev[h]) * r;
        acc += a * std::sin(omega * (h + 1) * static_cast<double>(n) + phase[h]);
      }
      signal[n] = acc;
    }
    prev = cur;
  }
  // Breath noise: white noise shaped by the same log-amplitude contour,
  // overlap-added with a periodic Hann window at 50% overlap.
  if (cfg.breath_gain > 0.0) {
    const int n_fft = seg;
    const int hop = seg / 2;
    const int n_bins = n_fft / 2 + 1;
    std::vector<double> bin_pos(n_bins), bin_speaker(n_bins);
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * kSampleRate / n_fft;
      bin_pos[k] = (HzToMel(f) - mel_lo) / (mel_hi - mel_lo) * (n_mels + 1) - 1.0;
      bin_speaker[k] =
          sig_scale * SampleContour(speaker.formant_signature.data(), n_mels, bin_pos[k]);
    }
    auto window = torch::hann_window(n_fft, torch::TensorOptions().dtype(torch::kFloat64));
    std::mt19937_64 breath_rng(DeriveSeed(seed, "breath"));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int64_t start = -hop; start < n_samples; start += hop) {
      const int64_t centre = std::clamp<int64_t>(start + hop, 0, n_samples - 1);
      const int token = content[centre / seg];
      const float* contour = env.data_ptr<float>() + static_cast<int64_t>(token) * n_mels;
      auto spec = torch::empty({n_bins, 2}, torch::kFloat64);
      auto sa = spec.accessor<double, 2>();
      for (int k = 0; k < n_bins; ++k) {
        // Scaled so a noise bin carries `breath_gain` times the spectral
        // magnitude a harmonic of the same envelope value would.
        const double a = cfg.breath_gain * (n_fft / 4.0) *
                         std::exp(cfg.token_gain * SampleContour(contour, n_mels, bin_pos[k]) +
                                  bin_speaker[k]);
        sa[k][0] = a * normal(breath_rng);
        sa[k][1] = a * normal(breath_rng);
      }
      auto frame = torch::fft::irfft(torch::view_as_complex(spec), n_fft) * window;
      const double* fp = frame.data_ptr<double>();
      for (int i = 0; i < n_fft; ++i) {
        const int64_t n = start + i;
        if (n >= 0 && n < n_samples) signal[n] += fp[i];
      }
    }
  }

  double peak = 0.0;
  for (double x : signal) peak = std::max(peak, std::abs(x));
  const double gain = peak > 0.0 ? 0.5 / peak : 0.0;
  std::mt19937_64 noise_rng(DeriveSeed(seed, "noise"));
  std::normal_distribution<double> noise(0.0, cfg.noise_floor);
  auto samples = torch::empty({n_samples}, torch::kFloat32);
  float* out = samples.data_ptr<float>();
  for (int64_t n = 0; n < n_samples; ++n) {
    out[n] = static_cast<float>(signal[n] * gain + noise(noise_rng));
  }

  ToyUtterance utt;
  utt.speaker_id = speaker.id;
  utt.content = content;
  utt.waveform = Waveform{samples, kSampleRate};
  utt.log_mel = ComputeLogMel(utt.waveform, mel_cfg);
  utt.mel = MelSpectrogram{NormalizeLogMel(utt.log_mel, mel_cfg)};

  std::mt19937_64 vis_rng(DeriveSeed(seed, "visual"));
  std::normal_distribution<double> vis_noise(0.0, 1.0);
  utt.visual = torch::empty({L, d_vis}, torch::kFloat32);
  auto vis = utt.visual.accessor<float, 2>();
  auto emb = tokens.visual.accessor<float, 2>();
  for (int l = 0; l < L; ++l) {
    for (int j = 0; j < d_vis; ++j) {
      vis[l][j] = static_cast<float>(emb[content[l]][j] +
                                     cfg.offset_scale * speaker.articulation_offset[j] +
                                     cfg.visual_noise * vis_noise(vis_rng));
    }
  }
  return utt;
}

const char* SplitName(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kUnseen: return "unseen";
  }
  return "?";
}

Split SplitFor(int speaker_index, int utt_index, const CorpusConfig& cfg) {
  if (speaker_index >= cfg.n_speakers - cfg.heldout_speakers) return Split::kUnseen;
  const int n = cfg.utts_per_speaker;
  const int n_test = std::max(1, n / 8);
  const int n_val = n >= 4 ? std::max(1, n / 16) : 0;
  if (utt_index >= n - n_test) return Split::kTest;
  if (utt_index >= n - n_test - n_val) return Split::kVal;
  return Split::kTrain;
}

std::string UtteranceId(int speaker_index, int utt_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%02d_utt%03d", speaker_index, utt_index);
  return buf;
}

std::string CorpusManifest::Serialize() const {
  std::ostringstream out;
  const auto& c = config;
  out << "#header\n";
  out << "#version=" << version << "\n";
  out << "#master_seed=" << c.master_seed << "\n";
  out << "#n_speakers=" << c.n_speakers << "\n";
  out << "#utts_per_speaker=" << c.utts_per_speaker << "\n";
  out << "#frames=" << c.frames << "\n";
  out << "#d_vis=" << c.d_vis << "\n";
  out << "#vocab=" << c.vocab << "\n";
  out << "#heldout_speakers=" << c.heldout_speakers << "\n";
  out << "#visual_noise=" << FormatDouble(c.visual_noise) << "\n";
  out << "#offset_scale=" << FormatDouble(c.offset_scale) << "\n";
  out << "#token_gain=" << FormatDouble(c.token_gain) << "\n";
  out << "#speaker_gain=" << FormatDouble(c.speaker_gain) << "\n";
  out << "#breath_gain=" << FormatDouble(c.breath_gain) << "\n";
  out << "#noise_floor=" << FormatDouble(c.noise_floor) << "\n";
  out << "#n_mels=" << mel.n_mels << "\n";
  out << "#f_min=" << FormatDouble(mel.f_min) << "\n";
  out << "#f_max=" << FormatDouble(mel.f_max) << "\n";
  out << "#log_floor=" << FormatDouble(mel.log_floor) << "\n";
  out << "#norm_lo=" << FormatFloat(norm_lo) << "\n";
  out << "#norm_hi=" << FormatFloat(norm_hi) << "\n";
  for (const auto& s : speakers) {
    out << "#speaker=" << s.id << "\t" << s.seed << "\t" << FormatDouble(s.f0) << "\t"
        << (s.heldout ? "heldout" : "seen") << "\n";
  }
  out << "#end\n";
  for (const auto& u : utterances) {
    out << u.id << "\t" << u.speaker_id << "\t";
    for (size_t i = 0; i < u.content.size(); ++i) {
      out << (i ? "," : "") << u.content[i];
    }
    out << "\t" << u.mel_path << "\t" << u.visual_path << "\t" << u.waveform_path << "\n";
  }
  return out.str();
}

CorpusManifest CorpusManifest::Parse(const std::string& text) {
  CorpusManifest m;
  auto& c = m.config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  std::vector<int> per_speaker_count;
  auto fail = [&](const std::string& why) {
    throw PersistenceError("manifest line " + std::to_string(line_no) + ": " + why);
  };
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      if (line[0] == '#') {
        if (line == "#header") {
          saw_header = true;
          continue;
        }
        if (line == "#end") continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("malformed header");
        const std::string key = line.substr(1, eq - 1);
        const std::string val = line.substr(eq + 1);
        if (key == "version") m.version = std::stoi(val);
        else if (key == "master_seed") c.master_seed = std::stoull(val);
        else if (key == "n_speakers") c.n_speakers = std::stoi(val);
        else if (key == "utts_per_speaker") c.utts_per_speaker = std::stoi(val);
        else if (key == "frames") c.frames = std::stoi(val);
        else if (key == "d_vis") c.d_vis = std::stoi(val);
        else if (key == "vocab") c.vocab = std::stoi(val);
        else if (key == "heldout_speakers") c.heldout_speakers = std::stoi(val);
        else if (key == "visual_noise") c.visual_noise = std::stod(val);
        else if (key == "offset_scale") c.offset_scale = std::stod(val);
        else if (key == "token_gain") c.token_gain = std::stod(val);
        else if (key == "speaker_gain") c.speaker_gain = std::stod(val);
        else if (key == "breath_gain") c.breath_gain = std::stod(val);
        else if (key == "noise_floor") c.noise_floor = std::stod(val);
        else if (key == "n_mels") m.mel.n_mels = std::stoi(val);
        else if (key == "f_min") m.mel.f_min = std::stod(val);
        else if (key == "f_max") m.mel.f_max = std::stod(val);
        else if (key == "log_floor") m.mel.log_floor = std::stod(val);
        else if (key == "norm_lo") m.norm_lo = std::stof(val);
        else if (key == "norm_hi") m.norm_hi = std::stof(val);
        else if (key == "speaker") {
          auto f = SplitOn(val, '\t');
          if (f.size() != 4) fail("speaker entry needs 4 fields");
          m.speakers.push_back(SpeakerRecord{std::stoi(f[0]), std::stoull(f[1]),
                                             std::stod(f[2]), f[3] == "heldout"});
        } else {
          fail("unknown header key '" + key + "'");
        }
        continue;
      }
      auto f = SplitOn(line, '\t');
      if (f.size() != 6) fail("record needs 6 tab-separated fields");
      UtteranceRecord r;
      r.id = f[0];
      r.speaker_id = std::stoi(f[1]);
      for (const auto& tok : SplitOn(f[2], ',')) r.content.push_back(std::stoi(tok));
      r.mel_path = f[3];
      r.visual_path = f[4];
      r.waveform_path = f[5];
      if (r.speaker_id < 0 || r.speaker_id >= c.n_speakers) fail("speaker id out of range");
      per_speaker_count.resize(c.n_speakers, 0);
      r.split = SplitFor(r.speaker_id, per_speaker_count[r.speaker_id]++, c);
      m.utterances.push_back(std::move(r));
    }
  } catch (const std::invalid_argument&) {
    fail("unparseable number");
  } catch (const std::out_of_range&) {
    fail("number out of range");
  }
  if (!saw_header) throw PersistenceError("manifest lacks #header block");
  if (!(m.norm_lo < m.norm_hi)) throw PersistenceError("manifest norm bounds invalid");
  return m;
}

CorpusManifest GenerateDataset(const CorpusConfig& cfg,
                               const std::filesystem::path& out_dir,
                               MelConfig mel_cfg) {
  cfg.Validate();
  mel_cfg.Validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* sub : {"mel", "visual", "wav"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) {
      throw PersistenceError("cannot create " + (out_dir / sub).string() + ": " +
                             ec.message());
    }
  }

  const auto tokens = MakeTokenInventory(cfg.master_seed, cfg.vocab, cfg.d_vis,
                                         mel_cfg.n_mels);
  const auto speakers = MakeSpeakerSet(cfg.n_speakers,
                                       DeriveSeed(cfg.master_seed, "speakers"),
                                       cfg.d_vis, mel_cfg.n_mels);
  const int64_t total = static_cast<int64_t>(cfg.n_speakers) * cfg.utts_per_speaker;
  std::vector<ToyUtterance> utts(total);
  ParallelFor(total, [&](int64_t i) {
    const int s = static_cast<int>(i / cfg.utts_per_speaker);
    const int u = static_cast<int>(i % cfg.utts_per_speaker);
    const std::string id = UtteranceId(s, u);
    const uint64_t seed = DeriveSeed(cfg.master_seed, id);
    auto content = RandomContent(DeriveSeed(seed, "content"), cfg.frames, cfg.vocab);
    utts[i] = SynthUtterance(speakers[s], content, seed, tokens, cfg, mel_cfg);
    utts[i].id = id;
  });

  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
  for (const auto& u : utts) {
    lo = std::min(lo, u.log_mel.min().item<float>());
    hi = std::max(hi, u.log_mel.max().item<float>());
  }
  lo = std::max(lo, static_cast<float>(std::log(mel_cfg.log_floor)));
  mel_cfg.norm_lo = lo;
  mel_cfg.norm_hi = hi;

  CorpusManifest manifest;
  manifest.config = cfg;
  manifest.mel = mel_cfg;
  manifest.norm_lo = lo;
  manifest.norm_hi = hi;
  for (int s = 0; s < cfg.n_speakers; ++s) {
    manifest.speakers.push_back(SpeakerRecord{
        s, speakers[s].seed, speakers[s].f0,
        SplitFor(s, 0, cfg) == Split::kUnseen});
  }
  manifest.utterances.resize(total);
  ParallelFor(total, [&](int64_t i) {
    auto& u = utts[i];
    UtteranceRecord& r = manifest.utterances[i];
    r.id = u.id;
    r.speaker_id = u.speaker_id;
    r.content = u.content;
    r.mel_path = "mel/" + u.id + ".f32m";
    r.visual_path = "visual/" + u.id + ".f32m";
    r.waveform_path = "wav/" + u.id + ".f32m";
    r.split = SplitFor(u.speaker_id, static_cast<int>(i % cfg.utts_per_speaker), cfg);
    WriteF32m(out_dir / r.mel_path, NormalizeLogMel(u.log_mel, mel_cfg));
    WriteF32m(out_dir / r.visual_path, u.visual);
    WriteF32m(out_dir / r.waveform_path, u.waveform.samples.reshape({1, -1}));
  });
  WriteFileAtomic(out_dir / kManifestName, manifest.Serialize());
  return manifest;
}

Corpus Corpus::Load(const std::filesystem::path& dir) {
  Corpus c;
  c.dir_ = dir;
  c.manifest_ = CorpusManifest::Parse(ReadFileBytes(dir / kManifestName));
  c.items_.resize(c.manifest_.utterances.size());
  const auto& m = c.manifest_;
  ParallelFor(static_cast<int64_t>(m.utterances.size()), [&](int64_t i) {
    const auto& r = m.utterances[i];
    Item item{r, ReadF32m(dir / r.visual_path), ReadF32m(dir / r.mel_path)};
    if (item.visual.size(0) * 4 != item.mel.size(1)) {
      throw PersistenceError(r.id + ": visual length does not match mel frames");
    }
    if (static_cast<size_t>(item.visual.size(0)) != r.content.size()) {
      throw PersistenceError(r.id + ": content length does not match visual frames");
    }
    c.items_[i] = std::move(item);
  });
  return c;
}

const Corpus::Item& Corpus::Find(const std::string& id) const {
  for (const auto& it : items_) {
    if (it.record.id == id) return it;
  }
  throw ValidationError("unknown utterance id '" + id + "'");
}

std::vector<size_t> Corpus::Indices(Split split) const { return Indices({split}); }

std::vector<size_t> Corpus::Indices(std::initializer_list<Split> splits) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < items_.size(); ++i) {
    if (std::find(splits.begin(), splits.end(), items_[i].record.split) != splits.end()) {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<int> Corpus::SeenSpeakers() const {
  std::set<int> seen;
  for (const auto& it : items_) {
    if (it.record.split == Split::kTrain) seen.insert(it.record.speaker_id);
  }
  return {seen.begin(), seen.end()};
}

MelConfig Corpus::mel_config() const {
  MelConfig cfg = manifest_.mel;
  cfg.norm_lo = manifest_.norm_lo;
  cfg.norm_hi = manifest_.norm_hi;
  return cfg;
}

torch::Tensor StackVisual(const Corpus& corpus, const std::vector<size_t>& idx) {
  std::vector<torch::Tensor> parts;
  parts.reserve(idx.size());
  for (size_t i : idx) parts.push_back(corpus.items().at(i).visual);
  return torch::stack(parts);
}

torch::Tensor StackMel(const Corpus& corpus, const std::vector<size_t>& idx) {
  std::vector<torch::Tensor> parts;
  parts.reserve(idx.size());
  for (size_t i : idx) parts.push_back(corpus.items().at(i).mel);
  return torch::stack(parts);
}

torch::Tensor StackContent(const Corpus& corpus, const std::vector<size_t>& idx) {
  std::vector<int64_t> flat;
  int64_t length = 0;
  for (size_t i : idx) {
    const auto& c = corpus.items().at(i).record.content;
    length = static_cast<int64_t>(c.size());
    flat.insert(flat.end(), c.begin(), c.end());
  }
  return torch::tensor(flat, torch::kInt64).view({static_cast<int64_t>(idx.size()), length});
}

}  // namespace v2s
