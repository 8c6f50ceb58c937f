/*
 * Copyright 2026 The GEL Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "gel/cli.h"

#include <algorithm>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "gel/episode.h"
#include "gel/error.h"
#include "gel/pipeline.h"
#include "gel/report.h"
#include "gel/training.h"

namespace gel {
namespace {

struct GenDataOptions {
  SyntheticSpec spec;
  std::uint64_t seed = 7;
  std::string out = "bank.gelb";
};

// Geometry, loss and strategy flags shared by train / eval / ablate / gradcheck.
struct ModelOptions {
  int n_way = 5;
  int k_shot = 1;
  int q_query = 15;
  int topk = 4;
  std::optional<double> temperature;
  double lambda = 0.1;
  double m_known = -1.0;
  double m_unknown = 1.0;
  std::string hinge = "squared";
  std::string distance = "squared";
  std::string combine = "fixed";
  std::optional<int> dim;
  std::optional<int> m;

  ModelConfig Config() const {
    ModelConfig c;
    c.pixel = {static_cast<std::size_t>(topk), temperature.value_or(static_cast<double>(topk))};
    c.margins = {m_known, m_unknown, lambda};
    return c;
  }

  AblationFlags Flags() const {
    AblationFlags f;
    f.combine = ParseCombineVariant(combine);
    f.use_pixel_branch = f.combine != CombineVariant::kGlobalOnly;
    f.hinge = ParseHinge(hinge);
    f.distance = ParseDistance(distance);
    return f;
  }

  static HingeKind ParseHinge(const std::string& s) {
    if (s == "squared") return HingeKind::kSquared;
    if (s == "linear") return HingeKind::kLinear;
    throw Error(ErrorCode::kInvalidArgument, "unknown hinge '" + s + "'");
  }
  static DistanceKind ParseDistance(const std::string& s) {
    if (s == "squared") return DistanceKind::kSquaredEuclidean;
    if (s == "plain") return DistanceKind::kEuclidean;
    throw Error(ErrorCode::kInvalidArgument, "unknown distance '" + s + "'");
  }
};

struct SplitOptions {
  std::optional<int> train_classes;
  int val_classes = 10;
};

struct TrainOptions {
  std::string bank;
  std::string out = "model.gelc";
  std::string history;
  std::uint64_t seed = 0;
  int tasks = 6000;
  double lr = 1e-3;
  double decay = 0.1;
  int period = 2000;
  int eval_every = 500;
  int val_episodes = 100;
  std::string ablate;
};

struct EvalOptions {
  std::string bank;
  std::string checkpoint;
  std::string from_scores;
  std::string out;
  std::string split = "test";
  int episodes = 600;
  int bins = static_cast<int>(kDefaultHistogramBins);
  std::string ablate;
};

struct GradCheckOptions {
  std::uint64_t seed = 0;
  double h = 1e-5;
  double tol = 1e-4;
  double sep = 4.0;
};

void AddModelOptions(CLI::App* app, ModelOptions& o, bool with_geometry) {
  app->add_option("--n-way", o.n_way, "classes per episode")->check(CLI::PositiveNumber);
  app->add_option("--k-shot", o.k_shot, "support samples per class")->check(CLI::PositiveNumber);
  app->add_option("--q-query", o.q_query, "queries per class")->check(CLI::PositiveNumber);
  app->add_option("--topk", o.topk, "class pixels kept per query pixel")
      ->check(CLI::PositiveNumber);
  app->add_option("--temperature", o.temperature, "pixel similarity temperature (default: topk)");
  app->add_option("--lambda", o.lambda, "energy loss weight");
  app->add_option("--mk", o.m_known, "known-query energy margin");
  app->add_option("--mu", o.m_unknown, "unknown-query energy margin");
  app->add_option("--hinge", o.hinge, "squared|linear")
      ->check(CLI::IsMember({"squared", "linear"}));
  app->add_option("--distance", o.distance, "squared|plain Euclidean")
      ->check(CLI::IsMember({"squared", "plain"}));
  app->add_option("--combine,--strategy", o.combine,
                  "fixed|learnable|task-adaptive|global-only|delay");
  if (with_geometry) {
    app->add_option("--dim", o.dim, "expected channel count");
    app->add_option("--m", o.m, "expected spatial side");
  }
}

void AddSplitOptions(CLI::App* app, SplitOptions& s) {
  app->add_option("--train-classes", s.train_classes,
                  "leading classes used for training (default: all but 20)");
  app->add_option("--val-classes", s.val_classes,
                  "classes after the training block used for validation");
}

BankSplit Split(const Bank& bank, const SplitOptions& s) {
  const int total = static_cast<int>(bank.size());
  const int train = s.train_classes.value_or(total - 20);
  if (train < 0 || s.val_classes < 0 || train + s.val_classes > total) {
    throw Error(ErrorCode::kInsufficientData, "bank has " + std::to_string(total) +
                                                  " classes; cannot split " +
                                                  std::to_string(train) + " train + " +
                                                  std::to_string(s.val_classes) + " validation");
  }
  return SplitBank(bank, static_cast<std::size_t>(train), static_cast<std::size_t>(s.val_classes));
}

void EchoConfig(const CLI::App* sub, std::ostream& out) {
  std::istringstream lines(sub->config_to_str(true, false));
  out << "# " << sub->get_name() << " resolved configuration\n";
  for (std::string line; std::getline(lines, line);) {
    if (!line.empty()) out << "#   " << line << '\n';
  }
}

void CheckExpectedGeometry(const ModelOptions& o, std::size_t m, std::size_t dim) {
  if ((o.dim && static_cast<std::size_t>(*o.dim) != dim) ||
      (o.m && static_cast<std::size_t>(*o.m) != m)) {
    throw Error(ErrorCode::kGeometryMismatch,
                "bank has m=" + std::to_string(m) + " dim=" + std::to_string(dim) +
                    " but flags ask for m=" + std::to_string(o.m.value_or(static_cast<int>(m))) +
                    " dim=" + std::to_string(o.dim.value_or(static_cast<int>(dim))));
  }
}

TrainConfig MakeTrainConfig(const TrainOptions& t, const ModelOptions& o) {
  TrainConfig cfg;
  cfg.n_way = o.n_way;
  cfg.k_shot = o.k_shot;
  cfg.q_query = o.q_query;
  cfg.lr_main = t.lr;
  cfg.schedule = {t.decay, t.period};
  cfg.total_tasks = t.tasks;
  cfg.seed = t.seed;
  cfg.eval_every = t.eval_every;
  cfg.val_episodes = t.val_episodes;
  return cfg;
}

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

std::uint64_t TestEpisodeSeed(std::uint64_t seed) { return Mix64(seed ^ 0x74657374ULL); }

int CmdGenData(const GenDataOptions& o, std::ostream& out) {
  Rng rng(o.seed);
  const Bank bank = GenerateSynthetic(o.spec, rng);
  SaveBank(bank, o.out);
  out << "wrote " << bank.size() << " classes x " << o.spec.samples_per_class << " samples ("
      << o.spec.m << "x" << o.spec.m << "x" << o.spec.dim << ") to " << o.out << '\n';
  return kExitOk;
}

int CmdTrain(const TrainOptions& t, const ModelOptions& o, const SplitOptions& s,
             std::ostream& out) {
  const Bank bank = LoadBank(t.bank);
  const auto [m, dim] = BankGeometry(bank);
  CheckExpectedGeometry(o, m, dim);
  const BankSplit split = Split(bank, s);
  AblationFlags flags = t.ablate.empty() ? o.Flags() : AblationFlags::FromRowName(t.ablate);
  const TrainResult result =
      RunTraining(split.train, split.validation, MakeTrainConfig(t, o), o.Config(), flags);
  SaveCheckpoint(result.best, t.out);
  const std::string history = t.history.empty() ? t.out + ".history.jsonl" : t.history;
  WriteHistoryJsonl(result.history, history);
  out << std::setw(8) << "task" << std::setw(12) << "lr" << std::setw(12) << "loss" << std::setw(12)
      << "val_auroc" << std::setw(12) << "val_acc" << '\n';
  for (const HistoryEntry& h : result.history) {
    out << std::setw(8) << h.task << std::setw(12) << h.lr << std::setw(12) << h.train.total
        << std::setw(12) << h.val_auroc << std::setw(12) << h.val_acc << '\n';
  }
  out << "checkpoint (step " << result.best.step << ") -> " << t.out << "\nhistory -> " << history
      << '\n';
  return kExitOk;
}

int EmitReports(const std::vector<EvalReport>& reports, const std::string& path,
                std::ostream& out) {
  out << FormatAggregateTable(reports);
  for (const EvalReport& r : reports) {
    out << r.label << ": pooled histogram IoU " << std::fixed << std::setprecision(4)
        << r.pooled_iou << std::defaultfloat << '\n';
  }
  if (!path.empty()) {
    WriteReportJsonl(reports, path);
    out << "report -> " << path << '\n';
  }
  return kExitOk;
}

int CmdEval(const EvalOptions& e, const TrainOptions& t, const ModelOptions& o,
            const SplitOptions& s, std::ostream& out) {
  const auto bins = static_cast<std::size_t>(e.bins);
  if (!e.from_scores.empty()) {
    return EmitReports(ReadReportJsonl(e.from_scores, bins), e.out, out);
  }
  if (e.bank.empty()) throw Error(ErrorCode::kInvalidArgument, "--bank is required");
  const Bank bank = LoadBank(e.bank);
  const auto [m, dim] = BankGeometry(bank);
  CheckExpectedGeometry(o, m, dim);
  const BankSplit split = Split(bank, s);
  const Bank* target = &split.test;
  if (e.split == "val") target = &split.validation;
  if (e.split == "train") target = &split.train;
  if (e.split == "all") target = &bank;

  std::vector<EvalReport> reports;
  if (!e.ablate.empty()) {
    const TrainConfig cfg = MakeTrainConfig(t, o);
    const std::vector<Episode> episodes =
        SampleEpisodes(*target, o.n_way, o.k_shot, o.q_query, static_cast<std::size_t>(e.episodes),
                       TestEpisodeSeed(t.seed));
    for (const std::string& row : SplitList(e.ablate)) {
      const AblationFlags flags = AblationFlags::FromRowName(row);
      const TrainResult tr = RunTraining(split.train, split.validation, cfg, o.Config(), flags);
      reports.push_back(
          BuildReport(row, ScoreEpisodes(tr.best.params, episodes, o.Config(), flags), bins));
    }
  } else {
    if (e.checkpoint.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "--checkpoint is required (or use --ablate)");
    }
    const Checkpoint ckpt = LoadCheckpoint(e.checkpoint);
    CheckGeometry(ckpt, m, dim);
    const std::vector<Episode> episodes = SampleEpisodes(
        *target, static_cast<int>(ckpt.geometry.n_way), static_cast<int>(ckpt.geometry.k_shot),
        static_cast<int>(ckpt.geometry.q_query), static_cast<std::size_t>(e.episodes),
        TestEpisodeSeed(t.seed));
    reports.push_back(
        BuildReport("model", ScoreEpisodes(ckpt.params, episodes, ckpt.config, ckpt.flags), bins));
  }
  return EmitReports(reports, e.out, out);
}

int CmdGradCheck(const GradCheckOptions& g, const ModelOptions& o, std::ostream& out) {
  SyntheticSpec spec;
  spec.n_classes = 2 * o.n_way;
  spec.samples_per_class = o.k_shot + o.q_query;
  spec.m = o.m.value_or(2);
  spec.dim = o.dim.value_or(8);
  spec.cluster_separation = g.sep;
  Rng rng(g.seed);
  const Bank bank = GenerateSynthetic(spec, rng);
  const Episode ep = SampleEpisode(bank, o.n_way, o.k_shot, o.q_query, rng);
  const AblationFlags flags = o.Flags();
  ModelParams params = ModelParams::Init(static_cast<std::size_t>(spec.dim), flags.combine, rng);
  const GradCheckReport report = GradCheck(params, ep, o.Config(), flags, g.h);

  out << std::left << std::setw(28) << "group" << std::right << std::setw(9) << "checked"
      << std::setw(9) << "skipped" << std::setw(14) << "max_rel_err" << std::setw(14)
      << "max_|grad|" << '\n';
  out << std::scientific << std::setprecision(3);
  for (const GradCheckGroup& row : report.groups) {
    out << std::left << std::setw(28) << row.name << std::right << std::setw(9) << row.checked
        << std::setw(9) << row.skipped << std::setw(14) << row.max_rel_error << std::setw(14)
        << row.max_abs_grad << '\n';
  }
  out << "loss " << report.loss << ", max relative error " << report.max_rel_error << ", tolerance "
      << g.tol << '\n'
      << std::defaultfloat;
  if (!report.Passed(g.tol)) {
    out << "FAIL: gradient check exceeds tolerance\n";
    return kExitTolerance;
  }
  out << "PASS\n";
  return kExitOk;
}

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo:
    case ErrorCode::kBadMagic:
    case ErrorCode::kVersionMismatch:
    case ErrorCode::kTruncated:
      return kExitIo;
    default:
      return kExitValidation;
  }
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Glocal energy-based few-shot open-set recognition on feature maps", "gel"};
  app.set_config("--config", "", "TOML/INI file with option values; flags override it");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic GELB feature bank");
  gen_cmd->add_option("--classes", gen.spec.n_classes, "number of classes");
  gen_cmd->add_option("--per-class", gen.spec.samples_per_class, "samples per class");
  gen_cmd->add_option("--m", gen.spec.m, "spatial side length")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--dim", gen.spec.dim, "channel count")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--sep", gen.spec.cluster_separation, "class-mean radius")
      ->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--local-patch", gen.spec.local_patch, "embed a class patch pixel");
  gen_cmd->add_option("--patch-strength", gen.spec.patch_strength, "patch direction length");
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--out", gen.out, "output GELB path");

  ModelOptions train_model;
  TrainOptions train;
  SplitOptions train_split;
  auto* train_cmd = app.add_subcommand("train", "episodic SGD training");
  train_cmd->add_option("--bank", train.bank, "GELB feature bank")->required();
  train_cmd->add_option("--out", train.out, "output GELC checkpoint");
  train_cmd->add_option("--history", train.history, "history JSONL (default: <out>.history.jsonl)");
  train_cmd->add_option("--seed", train.seed, "training seed");
  train_cmd->add_option("--tasks", train.tasks, "training tasks")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--lr", train.lr, "initial learning rate");
  train_cmd->add_option("--decay", train.decay, "learning-rate decay factor");
  train_cmd->add_option("--period", train.period, "tasks between decays");
  train_cmd->add_option("--eval-every", train.eval_every, "tasks between validations");
  train_cmd->add_option("--val-episodes", train.val_episodes, "validation episodes");
  train_cmd->add_option("--ablate", train.ablate,
                        "train one ablation row: baseline|energy|pixel|full");
  AddModelOptions(train_cmd, train_model, true);
  AddSplitOptions(train_cmd, train_split);

  // eval and ablate share one option set; ablate defaults to the full sweep.
  ModelOptions eval_model;
  TrainOptions eval_train;
  EvalOptions eval;
  SplitOptions eval_split;
  auto add_eval = [&](CLI::App* cmd) {
    cmd->add_option("--bank", eval.bank, "GELB feature bank");
    cmd->add_option("--checkpoint", eval.checkpoint, "GELC checkpoint to evaluate");
    cmd->add_option("--from-scores", eval.from_scores,
                    "recompute metrics from a previous report's episode records");
    cmd->add_option("--out", eval.out, "report JSONL path");
    cmd->add_option("--split", eval.split, "test|val|train|all")
        ->check(CLI::IsMember({"test", "val", "train", "all"}));
    cmd->add_option("--episodes", eval.episodes, "test episodes")->check(CLI::Range(2, 1000000));
    cmd->add_option("--bins", eval.bins, "histogram bins")->check(CLI::Range(2, 100000));
    cmd->add_option("--seed", eval_train.seed, "episode and training seed");
    cmd->add_option("--tasks", eval_train.tasks, "training tasks per ablation row");
    cmd->add_option("--lr", eval_train.lr, "initial learning rate");
    cmd->add_option("--decay", eval_train.decay, "learning-rate decay factor");
    cmd->add_option("--period", eval_train.period, "tasks between decays");
    cmd->add_option("--eval-every", eval_train.eval_every, "tasks between validations");
    cmd->add_option("--val-episodes", eval_train.val_episodes, "validation episodes");
    AddModelOptions(cmd, eval_model, true);
    AddSplitOptions(cmd, eval_split);
  };
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint over sampled tasks");
  add_eval(eval_cmd);
  eval_cmd->add_option("--ablate", eval.ablate,
                       "comma-separated rows to train and evaluate: baseline,energy,pixel,full");
  auto* ablate_cmd =
      app.add_subcommand("ablate", "train and evaluate ablation rows (eval --ablate)");
  add_eval(ablate_cmd);
  std::string ablate_rows = "baseline,energy,pixel,full";
  ablate_cmd->add_option("--rows", ablate_rows, "comma-separated rows");

  ModelOptions grad_model;
  grad_model.n_way = 3;
  grad_model.k_shot = 2;
  grad_model.q_query = 2;
  grad_model.topk = 2;
  GradCheckOptions grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  grad_cmd->add_option("--seed", grad.seed, "seed for data and parameters");
  grad_cmd->add_option("--step", grad.h, "central-difference step");
  grad_cmd->add_option("--tol", grad.tol, "maximum relative error");
  grad_cmd->add_option("--sep", grad.sep, "synthetic class separation");
  AddModelOptions(grad_cmd, grad_model, true);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    EchoConfig(sub, out);
    if (sub == gen_cmd) return CmdGenData(gen, out);
    if (sub == train_cmd) return CmdTrain(train, train_model, train_split, out);
    if (sub == eval_cmd) return CmdEval(eval, eval_train, eval_model, eval_split, out);
    if (sub == ablate_cmd) {
      eval.ablate = ablate_rows;
      return CmdEval(eval, eval_train, eval_model, eval_split, out);
    }
    if (sub == grad_cmd) return CmdGradCheck(grad, grad_model, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return ExitCodeFor(e.code());
  }
  return kExitUsage;
}

}  // namespace gel
