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

#include "v2s/pipeline/pipeline.h"

#include <charconv>
#include <optional>

#include "v2s/common/errors.h"
#include "v2s/common/hashing.h"
#include "v2s/encoders/pretrain.h"
#include "v2s/nn/transformer.h"

namespace v2s {

namespace {

constexpr const char* kConfigPrefix = "config.";

std::string Num(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string NumF(float v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

float ParseFloat(const std::string& s) {
  float v = 0.0f;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("malformed number '" + s + "' in checkpoint");
  }
  return v;
}

Checkpoint LoadStage(const std::filesystem::path& ckpt_dir, Stage stage) {
  const auto path = StagePath(ckpt_dir, stage);
  if (!std::filesystem::exists(path)) {
    throw ConfigError(std::string("missing '") + StageName(stage) + "' checkpoint at " +
                      path.string() + "; run `train --stage " + StageName(stage) + "` first");
  }
  auto ckpt = Checkpoint::Load(path);
  if (ckpt.stage() != StageName(stage)) {
    throw ConfigError(path.string() + " holds stage '" + ckpt.stage() + "'");
  }
  return ckpt;
}

void StampCommon(Checkpoint& ckpt, const RunConfig& cfg, const Corpus& corpus,
                 uint64_t seed, int64_t steps) {
  WriteConfigMetadata(ckpt, cfg);
  ckpt.metadata()["data_dir"] = std::filesystem::absolute(corpus.dir()).lexically_normal().string();
  ckpt.metadata()["seed"] = std::to_string(seed);
  ckpt.metadata()["steps"] = std::to_string(steps);
}

AvEncoders LoadEncoders(const Checkpoint& ckpt, const RunConfig& cfg) {
  auto enc = AvEncoders::Create(cfg.encoder);
  enc.Load(ckpt);
  enc.Freeze();
  return enc;
}

SpeakerGuidanceEncoder LoadOracle(const Checkpoint& ckpt, const RunConfig& cfg) {
  SpeakerGuidanceEncoder oracle(cfg.oracle);
  ckpt.LoadInto("oracle.", *oracle);
  oracle->freeze();
  return oracle;
}

PromptHeads LoadHeads(const Checkpoint& ckpt, const RunConfig& cfg) {
  PromptHeads heads(cfg.encoder.dim, cfg.prompt);
  ckpt.LoadInto("prompts.", *heads);
  FreezeParameters(*heads);
  return heads;
}

Denoiser LoadDenoiser(const Checkpoint& ckpt, const RunConfig& cfg) {
  Denoiser net(cfg.denoiser);
  ckpt.LoadInto("denoiser.", *net);
  return net;
}

void Report(std::ostream* log, Checkpoint& ckpt, const std::string& key, double value) {
  ckpt.metadata()["metric." + key] = Num(value);
  if (log) *log << "  " << key << " = " << Num(value) << "\n";
}

}  // namespace

const char* StageName(Stage stage) {
  switch (stage) {
    case Stage::kEncoders: return "encoders";
    case Stage::kSpeakerOracle: return "speaker-oracle";
    case Stage::kPrompts: return "prompts";
    case Stage::kDiffusion: return "diffusion";
  }
  return "?";
}

Stage ParseStage(const std::string& name) {
  for (Stage s : {Stage::kEncoders, Stage::kSpeakerOracle, Stage::kPrompts, Stage::kDiffusion}) {
    if (name == StageName(s)) return s;
  }
  throw ConfigError("unknown stage '" + name +
                    "' (expected encoders, speaker-oracle, prompts or diffusion)");
}

std::vector<Stage> StageDependencies(Stage stage) {
  switch (stage) {
    case Stage::kEncoders:
    case Stage::kSpeakerOracle: return {};
    case Stage::kPrompts: return {Stage::kEncoders, Stage::kSpeakerOracle};
    case Stage::kDiffusion: return {Stage::kEncoders, Stage::kSpeakerOracle, Stage::kPrompts};
  }
  return {};
}

std::filesystem::path StagePath(const std::filesystem::path& ckpt_dir, Stage stage) {
  return ckpt_dir / (std::string(StageName(stage)) + ".ckpt");
}

void WriteConfigMetadata(Checkpoint& ckpt, const RunConfig& cfg) {
  for (const auto& key : RunConfig::Keys()) ckpt.metadata()[kConfigPrefix + key] = cfg.Get(key);
  ckpt.metadata()["arch_hash"] = cfg.ArchHash();
  ckpt.metadata()["norm_lo"] = NumF(cfg.mel.norm_lo);
  ckpt.metadata()["norm_hi"] = NumF(cfg.mel.norm_hi);
}

RunConfig ConfigFromCheckpoint(const Checkpoint& ckpt) {
  RunConfig cfg = RunConfig::Preset(ckpt.Meta(std::string(kConfigPrefix) + "preset"));
  for (const auto& key : RunConfig::Keys()) {
    if (key == "preset") continue;
    cfg.Set(key, ckpt.Meta(kConfigPrefix + key));
  }
  cfg.mel.norm_lo = ParseFloat(ckpt.Meta("norm_lo"));
  cfg.mel.norm_hi = ParseFloat(ckpt.Meta("norm_hi"));
  cfg.Sync();
  cfg.Validate();
  if (cfg.ArchHash() != ckpt.Meta("arch_hash")) {
    throw ConfigError("checkpoint '" + ckpt.stage() + "' config does not match its arch hash");
  }
  return cfg;
}

void CheckArchitecture(const Checkpoint& ckpt, const RunConfig& cfg) {
  std::string conflicts;
  for (const auto& [key, value] : cfg.ArchValues()) {
    const std::string meta = kConfigPrefix + key;
    const std::string stored = ckpt.HasMeta(meta) ? ckpt.Meta(meta) : "<absent>";
    if (stored != value) conflicts += " " + key + " (" + stored + " vs " + value + ")";
  }
  if (!conflicts.empty()) {
    throw ConfigError("checkpoint '" + ckpt.stage() +
                      "' was built with a different architecture:" + conflicts);
  }
}

Checkpoint TrainStage(Stage stage, RunConfig cfg, const std::filesystem::path& data_dir,
                      const std::filesystem::path& ckpt_dir, bool resume, std::ostream* log) {
  auto corpus = Corpus::Load(data_dir);
  cfg.corpus = corpus.manifest().config;
  cfg.mel = corpus.mel_config();
  cfg.Sync();
  cfg.Validate();

  std::vector<Checkpoint> deps;
  for (Stage dep : StageDependencies(stage)) {
    deps.push_back(LoadStage(ckpt_dir, dep));
    CheckArchitecture(deps.back(), cfg);
  }
  std::optional<Checkpoint> previous;
  if (resume) {
    if (stage != Stage::kPrompts && stage != Stage::kDiffusion) {
      throw ConfigError("--resume applies to the prompts and diffusion stages");
    }
    previous = LoadStage(ckpt_dir, stage);
    CheckArchitecture(*previous, cfg);
  }
  std::filesystem::create_directories(ckpt_dir);
  const int64_t prior_steps = previous ? std::stoll(previous->Meta("steps")) : 0;

  Checkpoint ckpt(StageName(stage));
  if (log) *log << "stage " << StageName(stage) << "\n";
  switch (stage) {
    case Stage::kEncoders: {
      auto r = PretrainEncoders(corpus, cfg.encoder, cfg.encoder_train);
      r.encoders.Save(ckpt);
      StampCommon(ckpt, cfg, corpus, cfg.encoder_train.seed, r.steps);
      Report(log, ckpt, "visual_train_accuracy", r.visual_train_accuracy);
      Report(log, ckpt, "visual_heldout_accuracy", r.visual_heldout_accuracy);
      Report(log, ckpt, "audio_train_accuracy", r.audio_train_accuracy);
      Report(log, ckpt, "audio_heldout_accuracy", r.audio_heldout_accuracy);
      ckpt.metadata()["param_hash"] = r.encoders.Hash();
      break;
    }
    case Stage::kSpeakerOracle: {
      auto r = PretrainSpeakerOracle(corpus, cfg.oracle, cfg.oracle_train);
      ckpt.AddModule("oracle.", *r.oracle);
      StampCommon(ckpt, cfg, corpus, cfg.oracle_train.seed, r.steps);
      Report(log, ckpt, "train_accuracy", r.train_accuracy);
      Report(log, ckpt, "heldout_accuracy", r.heldout_accuracy);
      Report(log, ckpt, "intra_cosine", r.intra_cosine);
      Report(log, ckpt, "inter_cosine", r.inter_cosine);
      ckpt.metadata()["param_hash"] = HashModule(*r.oracle);
      break;
    }
    case Stage::kPrompts: {
      auto encoders = LoadEncoders(deps[0], cfg);
      auto oracle = LoadOracle(deps[1], cfg);
      PromptHeads init = previous ? LoadHeads(*previous, cfg) : PromptHeads(nullptr);
      auto r = TrainPrompts(corpus, encoders, oracle, cfg.prompt, cfg.prompt_train, init);
      ckpt.AddModule("prompts.", *r.heads);
      StampCommon(ckpt, cfg, corpus, cfg.prompt_train.seed, prior_steps + r.steps);
      Report(log, ckpt, "final_loss", r.final_loss);
      Report(log, ckpt, "retrieval_accuracy", r.retrieval_accuracy);
      Report(log, ckpt, "unseen_retrieval_accuracy", r.unseen_retrieval_accuracy);
      Report(log, ckpt, "audio_oracle_cosine", r.audio_oracle_cosine);
      ckpt.metadata()["frozen_hash"] = r.frozen_hash;
      break;
    }
    case Stage::kDiffusion: {
      SpeakerExtractor extractor(LoadEncoders(deps[0], cfg), LoadHeads(deps[2], cfg));
      auto oracle = LoadOracle(deps[1], cfg);
      DiffusionTrainOptions opts;
      opts.train = cfg.diffusion_train;
      opts.max_steps = cfg.diffusion_max_steps;
      opts.log_path = (ckpt_dir / "diffusion_log.csv").string();
      opts.start_step = prior_steps;
      Denoiser init = previous ? LoadDenoiser(*previous, cfg) : Denoiser(nullptr);
      auto r = TrainDiffusion(corpus, extractor, oracle, cfg.denoiser, cfg.Schedule(), opts, init);
      ckpt.AddModule("denoiser.", *r.denoiser);
      StampCommon(ckpt, cfg, corpus, cfg.diffusion_train.seed, r.steps);
      Report(log, ckpt, "initial_loss", r.initial_loss);
      Report(log, ckpt, "final_loss", r.final_loss);
      break;
    }
  }
  if (log) *log << "  steps = " << ckpt.Meta("steps") << "\n";
  ckpt.Save(StagePath(ckpt_dir, stage));
  return ckpt;
}

ModelBundle LoadBundle(const std::filesystem::path& ckpt_dir, Stage last) {
  std::vector<Checkpoint> ckpts;
  for (Stage s : {Stage::kEncoders, Stage::kSpeakerOracle, Stage::kPrompts, Stage::kDiffusion}) {
    if (static_cast<int>(s) > static_cast<int>(last)) break;
    ckpts.push_back(LoadStage(ckpt_dir, s));
  }
  ModelBundle b;
  b.config = ConfigFromCheckpoint(ckpts.back());
  for (const auto& c : ckpts) CheckArchitecture(c, b.config);
  b.data_dir = ckpts.back().Meta("data_dir");
  b.schedule = b.config.Schedule();
  b.encoders = LoadEncoders(ckpts[0], b.config);
  if (ckpts.size() > 1) b.oracle = LoadOracle(ckpts[1], b.config);
  if (ckpts.size() > 2) b.heads = LoadHeads(ckpts[2], b.config);
  if (ckpts.size() > 3) {
    b.denoiser = LoadDenoiser(ckpts[3], b.config);
    FreezeParameters(*b.denoiser);
  }
  return b;
}

SampledSet SampleUtterances(ModelBundle& bundle, const torch::Tensor& visual,
                            const std::vector<std::string>& ids, const SamplerConfig& cfg,
                            int64_t chunk, bool trace) {
  if (!bundle.denoiser || !bundle.heads) {
    throw ConfigError("sampling needs the prompts and diffusion checkpoints");
  }
  if (visual.dim() != 3 || visual.size(0) != static_cast<int64_t>(ids.size()) || chunk < 1) {
    throw ValidationError("sampling expects visual [B, L, d_vis] with one id per row");
  }
  auto extractor = bundle.Extractor();
  SampledSet out;
  std::vector<torch::Tensor> parts;
  double overflow = 0.0;
  const int64_t n = visual.size(0);
  for (int64_t begin = 0; begin < n; begin += chunk) {
    const int64_t len = std::min(chunk, n - begin);
    std::vector<uint64_t> seeds;
    for (int64_t i = begin; i < begin + len; ++i) seeds.push_back(DeriveSeed(cfg.seed, ids[i]));
    auto r = Sample(visual.narrow(0, begin, len), seeds, cfg, extractor, bundle.denoiser,
                    bundle.schedule, trace && n == 1);
    parts.push_back(r.mel);
    overflow += r.overflow_fraction * static_cast<double>(len);
    if (trace && n == 1) out.trace = std::move(r.trace);
  }
  out.mels = torch::cat(parts, 0);
  out.overflow_fraction = n > 0 ? overflow / static_cast<double>(n) : 0.0;
  return out;
}

}  // namespace v2s
