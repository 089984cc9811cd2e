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

#include <algorithm>
#include <map>
#include <memory>
#include <set>

#include <gtest/gtest.h>

#include "test_util.h"
#include "v2s/common/checkpoint.h"
#include "v2s/common/errors.h"
#include "v2s/common/hashing.h"
#include "v2s/corpus/corpus.h"

namespace v2s {
namespace {

double Pearson(const torch::Tensor& a, const torch::Tensor& b) {
  auto x = a.to(torch::kFloat64) - a.to(torch::kFloat64).mean();
  auto y = b.to(torch::kFloat64) - b.to(torch::kFloat64).mean();
  return ((x * y).sum() / (x.norm() * y.norm())).item<double>();
}

TEST(SpeakerTest, DeterministicAndUnitNorm) {
  auto a = MakeSpeaker(42);
  auto b = MakeSpeaker(42);
  EXPECT_EQ(a.f0, b.f0);
  EXPECT_EQ(a.formant_signature, b.formant_signature);
  EXPECT_EQ(a.articulation_offset, b.articulation_offset);
  EXPECT_GE(a.f0, kMinF0);
  EXPECT_LE(a.f0, kMaxF0);
  EXPECT_NEAR(torch::tensor(a.formant_signature).norm().item<double>(), 1.0, 1e-6);
  EXPECT_NEAR(torch::tensor(a.articulation_offset).norm().item<double>(), 1.0, 1e-6);
}

TEST(SpeakerTest, SixteenSpeakersHaveSeparatedPitch) {
  auto set = MakeSpeakerSet(16, 0);
  ASSERT_EQ(set.size(), 16u);
  std::set<int> ids;
  for (size_t i = 0; i < set.size(); ++i) {
    ids.insert(set[i].id);
    for (size_t j = i + 1; j < set.size(); ++j) {
      EXPECT_GE(std::abs(set[i].f0 - set[j].f0), kMinF0Gap) << i << " vs " << j;
    }
  }
  EXPECT_EQ(ids.size(), 16u);
}

class SynthTest : public ::testing::Test {
 protected:
  void SetUp() override {
    speakers_ = MakeSpeakerSet(4, 99);
    tokens_ = MakeTokenInventory(cfg_.master_seed, cfg_.vocab, cfg_.d_vis);
    content_ = RandomContent(5, cfg_.frames, cfg_.vocab);
  }
  ToyUtterance Synth(int speaker, uint64_t seed = 11) {
    return SynthUtterance(speakers_[speaker], content_, seed, tokens_, cfg_, mel_);
  }

  CorpusConfig cfg_;
  MelConfig mel_;
  std::vector<ToySpeaker> speakers_;
  TokenInventory tokens_;
  std::vector<int> content_;
};

TEST_F(SynthTest, IdenticalInputsIdenticalOutput) {
  auto a = Synth(0), b = Synth(0);
  EXPECT_TRUE(torch::equal(a.waveform.samples, b.waveform.samples));
  EXPECT_TRUE(torch::equal(a.visual, b.visual));
  EXPECT_EQ(a.visual.size(0), a.mel.frames() / 4);
  EXPECT_EQ(a.visual.size(0), static_cast<int64_t>(content_.size()));
}

TEST_F(SynthTest, BandProfileFollowsSignature) {
  for (int s = 0; s < 2; ++s) {
    auto u = Synth(s);
    const double r = Pearson(u.log_mel.mean(1), torch::tensor(speakers_[s].formant_signature));
    EXPECT_GT(r, 0.5) << "speaker " << s;
  }
}

TEST_F(SynthTest, VisualMeanRecoversOffset) {
  auto u = Synth(1);
  auto idx = torch::tensor(std::vector<int64_t>(content_.begin(), content_.end()));
  auto residual = u.visual.mean(0) - tokens_.visual.index_select(0, idx).mean(0);
  auto offset = torch::tensor(speakers_[1].articulation_offset);
  const double cos = (residual * offset).sum().item<double>() /
                     (residual.norm() * offset.norm()).item<double>();
  EXPECT_GT(cos, 0.9);
}

TEST_F(SynthTest, RejectsBadContent) {
  auto bad = content_;
  bad[3] = cfg_.vocab;
  EXPECT_THROW(SynthUtterance(speakers_[0], bad, 1, tokens_, cfg_, mel_), ValidationError);
  std::vector<int> short_content(7, 0);
  EXPECT_THROW(SynthUtterance(speakers_[0], short_content, 1, tokens_, cfg_, mel_),
               ValidationError);
}

// One small corpus shared by the dataset tests.
class DatasetTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = std::make_unique<testing::TempDir>("corpus");
    cfg_.utts_per_speaker = 12;
    manifest_ = GenerateDataset(cfg_, dir_->path() / "a");
  }
  static void TearDownTestSuite() { dir_.reset(); }

  static inline std::unique_ptr<testing::TempDir> dir_;
  static inline CorpusConfig cfg_;
  static inline CorpusManifest manifest_;
};

TEST_F(DatasetTest, RegenerationIsByteIdentical) {
  GenerateDataset(cfg_, dir_->path() / "b");
  EXPECT_EQ(ReadFileBytes(dir_->path() / "a" / kManifestName),
            ReadFileBytes(dir_->path() / "b" / kManifestName));
  const auto& rec = manifest_.utterances[17];
  EXPECT_EQ(ReadFileBytes(dir_->path() / "a" / rec.mel_path),
            ReadFileBytes(dir_->path() / "b" / rec.mel_path));
}

TEST_F(DatasetTest, SplitsAndBounds) {
  EXPECT_LT(manifest_.norm_lo, manifest_.norm_hi);
  std::map<int, std::map<Split, int>> counts;
  for (const auto& u : manifest_.utterances) counts[u.speaker_id][u.split]++;
  int unseen = 0;
  for (const auto& [spk, c] : counts) {
    if (c.count(Split::kUnseen)) {
      ++unseen;
      EXPECT_EQ(c.size(), 1u);
    } else {
      EXPECT_GE(c.at(Split::kTest), 1);
      EXPECT_GE(c.at(Split::kTrain), 1);
    }
  }
  EXPECT_EQ(unseen, cfg_.heldout_speakers);
}

TEST_F(DatasetTest, ManifestRoundTrip) {
  auto parsed = CorpusManifest::Parse(manifest_.Serialize());
  EXPECT_EQ(parsed.Serialize(), manifest_.Serialize());
  EXPECT_EQ(parsed.utterances.size(), manifest_.utterances.size());
}

TEST_F(DatasetTest, LoadFindsUtterances) {
  auto corpus = Corpus::Load(dir_->path() / "a");
  ASSERT_EQ(corpus.items().size(), manifest_.utterances.size());
  const auto& item = corpus.Find(UtteranceId(3, 2));
  EXPECT_EQ(item.record.speaker_id, 3);
  EXPECT_EQ(item.mel.size(1), 4 * cfg_.frames);
  EXPECT_THROW(corpus.Find("spk99_utt000"), ValidationError);
  EXPECT_EQ(corpus.mel_config().norm_lo, manifest_.norm_lo);
}

TEST_F(DatasetTest, SpeakerIsLinearlyDecodableFromVisualMean) {
  auto corpus = Corpus::Load(dir_->path() / "a");
  const auto train = corpus.Indices(Split::kTrain);
  const auto test = corpus.Indices({Split::kVal, Split::kTest});
  auto feats = [&](const std::vector<size_t>& idx) { return StackVisual(corpus, idx).mean(1); };
  auto labels = [&](const std::vector<size_t>& idx) {
    std::vector<int64_t> out;
    for (size_t i : idx) out.push_back(corpus.items()[i].record.speaker_id);
    return torch::tensor(out);
  };
  torch::manual_seed(0);
  torch::nn::Linear probe(cfg_.d_vis, cfg_.n_speakers);
  torch::optim::Adam opt(probe->parameters(), torch::optim::AdamOptions(0.05));
  auto x = feats(train), y = labels(train);
  for (int it = 0; it < 300; ++it) {
    auto loss = torch::cross_entropy_loss(probe(x), y);
    opt.zero_grad();
    loss.backward();
    opt.step();
  }
  torch::NoGradGuard no_grad;
  const double acc =
      (probe(feats(test)).argmax(1) == labels(test)).to(torch::kFloat64).mean().item<double>();
  EXPECT_GE(acc, 0.95);
}

TEST(DatasetErrorsTest, UnwritableDirectory) {
  CorpusConfig cfg;
  cfg.utts_per_speaker = 2;
  EXPECT_THROW(GenerateDataset(cfg, "/proc/v2s_cannot_write_here"), PersistenceError);
}

}  // namespace
}  // namespace v2s
