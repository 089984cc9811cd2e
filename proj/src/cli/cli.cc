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

#include "v2s/cli/cli.h"

#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>

#include "v2s/common/array_io.h"
#include "v2s/common/checkpoint.h"
#include "v2s/common/errors.h"
#include "v2s/common/threading.h"
#include "v2s/common/wav.h"
#include "v2s/config/run_config.h"
#include "v2s/corpus/corpus.h"
#include "v2s/mel/mel.h"
#include "v2s/metrics/metrics.h"
#include "v2s/pipeline/pipeline.h"

namespace v2s {

namespace fs = std::filesystem;

namespace {

RunConfig LoadConfig(const std::string& path) {
  return path.empty() ? RunConfig::Preset("toy") : RunConfig::Load(path);
}

Split ParseSplit(const std::string& name) {
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest, Split::kUnseen}) {
    if (name == SplitName(s)) return s;
  }
  throw ValidationError("unknown split '" + name + "'");
}

struct GenDataArgs {
  std::string config, out;
  std::optional<uint64_t> seed;
};

int GenData(const GenDataArgs& a, std::ostream& out) {
  auto cfg = LoadConfig(a.config);
  if (a.seed) cfg.corpus.master_seed = *a.seed;
  cfg.Validate();
  auto manifest = GenerateDataset(cfg.corpus, a.out, cfg.mel);
  out << "wrote " << manifest.utterances.size() << " utterances from "
      << manifest.speakers.size() << " speakers to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string stage, config, data, out;
  bool resume = false;
};

int Train(const TrainArgs& a, std::ostream& out) {
  auto cfg = LoadConfig(a.config);
  TrainStage(ParseStage(a.stage), cfg, a.data, a.out, a.resume, &out);
  out << "saved " << StagePath(a.out, ParseStage(a.stage)).string() << "\n";
  return 0;
}

struct SampleArgs {
  std::string ckpt_dir, data, out, split;
  std::vector<std::string> utterances, visuals;
  std::optional<double> lambda;
  std::optional<int64_t> steps;
  std::optional<uint64_t> seed;
  int64_t batch = 64;
  bool no_guidance = false, wav = false, trace = false;
};

void WriteTrace(const fs::path& path, const std::vector<TraceRow>& rows) {
  std::string text = "t,g_spk,grad_norm,state_norm\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g\n", static_cast<long long>(r.t),
                  r.g_spk, r.grad_norm, r.state_norm);
    text += buf;
  }
  WriteFileAtomic(path, text);
}

int SampleCmd(const SampleArgs& a, std::ostream& out) {
  const int sources = !a.utterances.empty() + !a.split.empty() + !a.visuals.empty();
  if (sources != 1) {
    throw ValidationError("give exactly one of --utterance, --split or --visual");
  }
  auto bundle = LoadBundle(a.ckpt_dir);
  SamplerConfig cfg = bundle.config.sampler;
  if (a.lambda) cfg.lambda = *a.lambda;
  if (a.seed) cfg.seed = *a.seed;
  if (a.steps) cfg.stride = StrideForSteps(bundle.schedule.T, *a.steps);
  if (a.no_guidance) cfg.guidance = false;
  cfg.Validate(bundle.schedule);

  std::vector<std::string> ids;
  std::vector<torch::Tensor> visual;
  if (!a.visuals.empty()) {
    for (const auto& v : a.visuals) {
      auto x = ReadF32m(v);
      if (x.size(1) != bundle.config.corpus.d_vis) {
        throw ValidationError(v + " has width " + std::to_string(x.size(1)) + ", expected " +
                              std::to_string(bundle.config.corpus.d_vis));
      }
      ids.push_back(fs::path(v).stem().string());
      visual.push_back(x);
    }
  } else {
    auto corpus = Corpus::Load(a.data.empty() ? bundle.data_dir : fs::path(a.data));
    std::vector<size_t> idx;
    if (!a.split.empty()) {
      idx = corpus.Indices(ParseSplit(a.split));
    } else {
      for (const auto& id : a.utterances) {
        const auto& item = corpus.Find(id);
        idx.push_back(static_cast<size_t>(&item - corpus.items().data()));
      }
    }
    for (size_t i : idx) {
      ids.push_back(corpus.items()[i].record.id);
      visual.push_back(corpus.items()[i].visual);
    }
  }
  if (ids.empty()) throw ValidationError("nothing to sample");
  const auto lengths_match = [&] {
    for (const auto& v : visual) {
      if (v.size(0) != visual.front().size(0)) return false;
    }
    return true;
  }();
  if (!lengths_match) throw ValidationError("visual inputs must share one length");

  fs::create_directories(a.out);
  std::string listing;
  for (const auto& id : ids) listing += id + "\n";
  WriteFileAtomic(fs::path(a.out) / "ids.txt", listing);

  const auto stacked = torch::stack(visual);
  const MelConfig& mel_cfg = bundle.config.mel;
  double overflow = 0.0;
  auto emit = [&](const SampledSet& set, size_t offset) {
    for (int64_t i = 0; i < set.mels.size(0); ++i) {
      const auto& id = ids[offset + static_cast<size_t>(i)];
      const auto mel = set.mels[i];
      WriteF32m(fs::path(a.out) / (id + ".f32m"), mel);
      if (a.wav) {
        auto w = InvertMel(MelSpectrogram{mel}, mel_cfg, bundle.config.griffin_lim_iters);
        WriteWav16(fs::path(a.out) / (id + ".wav"), w.samples, w.sample_rate);
      }
    }
    overflow += set.overflow_fraction * static_cast<double>(set.mels.size(0));
  };
  if (a.trace) {
    for (size_t i = 0; i < ids.size(); ++i) {
      auto set = SampleUtterances(bundle, stacked.narrow(0, static_cast<int64_t>(i), 1),
                                  {ids[i]}, cfg, 1, true);
      WriteTrace(fs::path(a.out) / (ids[i] + ".trace.csv"), set.trace);
      emit(set, i);
    }
  } else {
    emit(SampleUtterances(bundle, stacked, ids, cfg, a.batch), 0);
  }
  out << "sampled " << ids.size() << " utterance(s) into " << a.out
      << " (lambda " << (cfg.guided() ? cfg.lambda : 0.0) << ", stride " << cfg.stride
      << ", clamped fraction " << overflow / static_cast<double>(ids.size()) << ")\n";
  return 0;
}

struct EvaluateArgs {
  std::string ref, gen, ckpt_dir, out;
};

int EvaluateCmd(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  auto bundle = LoadBundle(a.ckpt_dir, Stage::kSpeakerOracle);
  MetricReport report;
  std::optional<ValidationError> failure;
  try {
    EvaluateCorpus(a.ref, a.gen, bundle.oracle, bundle.config.mel, &report);
  } catch (const ValidationError& e) {
    failure = e;
  }
  for (const auto& id : report.missing) err << "missing: " << id << "\n";
  if (!report.records.empty()) {
    const auto csv = report.ToCsv();
    WriteFileAtomic(a.out, csv);
    out << csv;
  }
  if (failure) throw *failure;
  return 0;
}

int PrintConfig(const std::string& preset, std::ostream& out) {
  out << RunConfig::Preset(preset).Dump();
  return 0;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Video-to-speech diffusion toolkit"};
  app.name("v2s");
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic corpus");
  gen_cmd->add_option("--config", gen.config, "Run config file (default: toy preset)");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Override corpus.seed");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one pipeline stage");
  train_cmd->add_option("--stage", train.stage, "encoders|speaker-oracle|prompts|diffusion")
      ->required();
  train_cmd->add_option("--config", train.config, "Run config file (default: toy preset)");
  train_cmd->add_option("--data", train.data, "Corpus directory")->required();
  train_cmd->add_option("--out", train.out, "Checkpoint directory")->required();
  train_cmd->add_flag("--resume", train.resume, "Continue from this stage's checkpoint");

  SampleArgs sample;
  auto* sample_cmd = app.add_subcommand("sample", "Generate mels from visual input");
  sample_cmd->add_option("--ckpt-dir", sample.ckpt_dir, "Checkpoint directory")->required();
  sample_cmd->add_option("--utterance", sample.utterances, "Corpus utterance id (repeatable)");
  sample_cmd->add_option("--split", sample.split, "Sample a whole corpus split");
  sample_cmd->add_option("--visual", sample.visuals, "Visual feature .f32m file (repeatable)");
  sample_cmd->add_option("--data", sample.data, "Corpus directory (default: from checkpoint)");
  sample_cmd->add_option("--lambda", sample.lambda, "Guidance scale");
  sample_cmd->add_option("--steps", sample.steps, "Approximate number of reverse steps");
  sample_cmd->add_option("--seed", sample.seed, "Sampling seed");
  sample_cmd->add_option("--batch", sample.batch, "Utterances per sampling batch");
  sample_cmd->add_option("--out", sample.out, "Output directory")->required();
  sample_cmd->add_flag("--no-guidance", sample.no_guidance, "Disable speaker guidance");
  sample_cmd->add_flag("--wav", sample.wav, "Also write Griffin-Lim audio");
  sample_cmd->add_flag("--trace", sample.trace, "Write a per-timestep trace CSV");

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score generated mels against references");
  eval_cmd->add_option("--ref", eval.ref, "Reference corpus or mel directory")->required();
  eval_cmd->add_option("--gen", eval.gen, "Generated mel directory")->required();
  eval_cmd->add_option("--ckpt-dir", eval.ckpt_dir, "Checkpoint directory")->required();
  eval_cmd->add_option("--out", eval.out, "Report CSV path")->required();

  std::string preset = "toy";
  auto* config_cmd = app.add_subcommand("print-config", "Print every config key");
  config_cmd->add_option("--preset", preset, "toy|paper");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kValidation);
  }

  InitThreading();
  try {
    if (*gen_cmd) return GenData(gen, out);
    if (*train_cmd) return Train(train, out);
    if (*sample_cmd) return SampleCmd(sample, out);
    if (*eval_cmd) return EvaluateCmd(eval, out, err);
    if (*config_cmd) return PrintConfig(preset, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const c10::Error& e) {
    err << "error: " << e.what_without_backtrace() << "\n";
    return static_cast<int>(ExitCode::kNumerical);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kValidation);
  }
  return 0;
}

}  // namespace v2s
