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

#ifndef V2S_CORPUS_CORPUS_H_
#define V2S_CORPUS_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "v2s/mel/mel.h"

namespace v2s {

// Procedural multi-speaker audio-visual corpus. Every speaker has a pitch
// and a spectral signature (audible identity) plus an articulation offset
// added to its visual frames (visible identity); tokens drive both streams.
struct CorpusConfig {
  int n_speakers = 16;
  int utts_per_speaker = 32;
  uint64_t master_seed = 7;
  int frames = 32;        // video frames (25 Hz) per utterance
  int d_vis = 16;         // visual feature width
  int vocab = 32;         // pseudo-phoneme inventory
  int heldout_speakers = 2;
  double visual_noise = 0.05;
  double offset_scale = 0.5;
  double token_gain = 1.0;    // log-amplitude scale of token envelopes
  double speaker_gain = 0.6;  // per-band log-amplitude std of the signature
  double breath_gain = 0.3;   // envelope-shaped noise relative to harmonics
  double noise_floor = 1e-4;  // additive white noise std

  int samples_per_frame() const { return kSampleRate / 25; }
  void Validate() const;
};

constexpr double kMinF0 = 90.0;
constexpr double kMaxF0 = 300.0;
constexpr double kMinF0Gap = 5.0;

struct ToySpeaker {
  int id = 0;
  uint64_t seed = 0;
  double f0 = 0.0;
  std::vector<float> formant_signature;    // [n_mels], unit norm
  std::vector<float> articulation_offset;  // [d_vis], unit norm
};

ToySpeaker MakeSpeaker(uint64_t seed, int d_vis = 16, int n_mels = 80);

// `count` speakers whose f0 values are pairwise at least kMinF0Gap apart;
// candidates that collide are redrawn from the next sub-seed.
std::vector<ToySpeaker> MakeSpeakerSet(int count, uint64_t seed, int d_vis = 16,
                                       int n_mels = 80);

// Per-token parameters shared by every speaker.
struct TokenInventory {
  torch::Tensor visual;    // [vocab x d_vis], unit rows
  torch::Tensor envelope;  // [vocab x n_mels] log-amplitude envelopes
};

TokenInventory MakeTokenInventory(uint64_t master_seed, int vocab, int d_vis,
                                  int n_mels = 80);

struct ToyUtterance {
  std::string id;
  int speaker_id = 0;
  std::vector<int> content;  // one token per video frame
  torch::Tensor visual;      // [L x d_vis]
  torch::Tensor log_mel;     // [n_mels x S], before normalization
  MelSpectrogram mel;        // normalized with the supplied MelConfig
  Waveform waveform;
};

ToyUtterance SynthUtterance(const ToySpeaker& speaker,
                            const std::vector<int>& content, uint64_t seed,
                            const TokenInventory& tokens,
                            const CorpusConfig& cfg, const MelConfig& mel_cfg);

std::vector<int> RandomContent(uint64_t seed, int length, int vocab);

enum class Split { kTrain, kVal, kTest, kUnseen };
const char* SplitName(Split s);

// Seen speakers keep their last utterances for test and the ones before
// for validation; the final `heldout_speakers` speakers are entirely unseen.
Split SplitFor(int speaker_index, int utt_index, const CorpusConfig& cfg);

std::string UtteranceId(int speaker_index, int utt_index);

struct SpeakerRecord {
  int id = 0;
  uint64_t seed = 0;
  double f0 = 0.0;
  bool heldout = false;
};

struct UtteranceRecord {
  std::string id;
  int speaker_id = 0;
  std::vector<int> content;
  std::string mel_path;  // relative to the manifest directory
  std::string visual_path;
  std::string waveform_path;
  Split split = Split::kTrain;
};

struct CorpusManifest {
  int version = 1;
  CorpusConfig config;
  MelConfig mel;  // analysis settings; the norm bounds live below
  float norm_lo = 0.0f;
  float norm_hi = 0.0f;
  std::vector<SpeakerRecord> speakers;
  std::vector<UtteranceRecord> utterances;

  std::string Serialize() const;
  static CorpusManifest Parse(const std::string& text);
};

constexpr const char* kManifestName = "manifest.tsv";

// Writes arrays under out_dir/{mel,visual,wav}/ and commits manifest.tsv
// last, so readers see a complete manifest or none. Output is a pure
// function of (cfg, mel_cfg) regardless of worker count.
CorpusManifest GenerateDataset(const CorpusConfig& cfg,
                               const std::filesystem::path& out_dir,
                               MelConfig mel_cfg = {});

// In-memory dataset.
class Corpus {
 public:
  struct Item {
    UtteranceRecord record;
    torch::Tensor visual;  // [L x d_vis]
    torch::Tensor mel;     // [n_mels x S], normalized
  };

  static Corpus Load(const std::filesystem::path& dir);

  const CorpusManifest& manifest() const { return manifest_; }
  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<Item>& items() const { return items_; }
  const Item& Find(const std::string& id) const;

  std::vector<size_t> Indices(Split split) const;
  std::vector<size_t> Indices(std::initializer_list<Split> splits) const;
  // Dense labels 0..k-1 over speakers that appear in the training split.
  std::vector<int> SeenSpeakers() const;
  MelConfig mel_config() const;

 private:
  std::filesystem::path dir_;
  CorpusManifest manifest_;
  std::vector<Item> items_;
};

// Batch assembly over corpus items.
torch::Tensor StackVisual(const Corpus& corpus, const std::vector<size_t>& idx);  // [B, L, d_vis]
torch::Tensor StackMel(const Corpus& corpus, const std::vector<size_t>& idx);     // [B, n_mels, S]
torch::Tensor StackContent(const Corpus& corpus, const std::vector<size_t>& idx); // [B, L] int64

}  // namespace v2s

#endif  // V2S_CORPUS_CORPUS_H_
