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

#include "gel/report.h"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "gel/error.h"
#include "json.hpp"

namespace gel {

using nlohmann::json;

EvalReport BuildReport(std::string label, std::vector<ScoredEpisode> scored, std::size_t bins) {
  EvalReport r;
  r.label = std::move(label);
  r.bins = bins;
  r.scored = std::move(scored);
  r.results = EvaluateScored(r.scored, bins);
  r.aggregate = Aggregate(r.results);

  ScoreSet pooled;
  for (const ScoredEpisode& s : r.scored) {
    const ScoreSet norm = NormalizeScores(s.scores);
    pooled.known.insert(pooled.known.end(), norm.known.begin(), norm.known.end());
    pooled.unknown.insert(pooled.unknown.end(), norm.unknown.begin(), norm.unknown.end());
  }
  // Each episode already spans [0, 1] with maximum 1, so the histogram's own
  // normalization leaves the pool unchanged.
  r.histogram = ScoreHistogram(pooled, bins);
  r.pooled_iou = HistogramIou(pooled, bins);
  return r;
}

namespace {

json Summary(const MetricSummary& s) { return {{"mean", s.mean}, {"ci95", s.half_width}}; }

std::ofstream OpenOut(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

void WriteReportJsonl(const std::vector<EvalReport>& reports, const std::string& path) {
  std::ofstream out = OpenOut(path);
  for (const EvalReport& rep : reports) {
    for (std::size_t i = 0; i < rep.scored.size(); ++i) {
      const ScoredEpisode& s = rep.scored[i];
      const EpisodeResult& m = rep.results[i];
      json rec = {{"record", "episode"},
                  {"label", rep.label},
                  {"index", i},
                  {"known_scores", s.scores.known},
                  {"unknown_scores", s.scores.unknown},
                  {"predicted", s.predicted},
                  {"labels", s.truth},
                  {"acc", m.acc},
                  {"auroc", m.auroc},
                  {"aupr", m.aupr},
                  {"fpr95", m.fpr95},
                  {"f1", m.f1}};
      if (m.iou) rec["iou"] = *m.iou;
      out << rec.dump() << '\n';
    }
    const AggregateResult& a = rep.aggregate;
    json metrics = {{"acc", Summary(a.acc)},
                    {"auroc", Summary(a.auroc)},
                    {"aupr", Summary(a.aupr)},
                    {"fpr95", Summary(a.fpr95)},
                    {"f1", Summary(a.f1)}};
    if (a.iou) metrics["iou"] = Summary(*a.iou);
    out << json{{"record", "aggregate"},
                {"label", rep.label},
                {"episodes", a.episodes},
                {"metrics", metrics}}
               .dump()
        << '\n';
    out << json{{"record", "histogram"},
                {"label", rep.label},
                {"bins", rep.bins},
                {"known_density", rep.histogram.known_density},
                {"unknown_density", rep.histogram.unknown_density},
                {"iou", rep.pooled_iou}}
               .dump()
        << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

std::vector<EvalReport> ReadReportJsonl(const std::string& path, std::size_t bins) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::vector<std::string> order;
  std::map<std::string, std::vector<ScoredEpisode>> by_label;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
      if (rec.at("record") != "episode") continue;
      ScoredEpisode s;
      s.scores.known = rec.at("known_scores").get<std::vector<double>>();
      s.scores.unknown = rec.at("unknown_scores").get<std::vector<double>>();
      s.predicted = rec.at("predicted").get<std::vector<int>>();
      s.truth = rec.at("labels").get<std::vector<int>>();
      const std::string label = rec.at("label").get<std::string>();
      if (!by_label.count(label)) order.push_back(label);
      by_label[label].push_back(std::move(s));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument,
                  path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::vector<EvalReport> reports;
  for (const std::string& label : order) {
    reports.push_back(BuildReport(label, std::move(by_label[label]), bins));
  }
  return reports;
}

std::string FormatAggregateTable(const std::vector<EvalReport>& reports) {
  std::ostringstream s;
  s << std::left << std::setw(12) << "row" << std::right << std::setw(8) << "tasks";
  for (const char* name : {"ACC", "AUROC", "F1", "FPR95", "AUPR", "IoU"}) {
    s << std::setw(18) << name;
  }
  s << '\n';
  auto cell = [&](const MetricSummary& m) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(2) << 100.0 * m.mean << " +- " << 100.0 * m.half_width;
    s << std::setw(18) << c.str();
  };
  for (const EvalReport& r : reports) {
    const AggregateResult& a = r.aggregate;
    s << std::left << std::setw(12) << r.label << std::right << std::setw(8) << a.episodes;
    cell(a.acc);
    cell(a.auroc);
    cell(a.f1);
    cell(a.fpr95);
    cell(a.aupr);
    if (a.iou) {
      cell(*a.iou);
    } else {
      s << std::setw(18) << "-";
    }
    s << '\n';
  }
  return s.str();
}

void WriteHistoryJsonl(const std::vector<HistoryEntry>& history, const std::string& path) {
  std::ofstream out = OpenOut(path);
  for (const HistoryEntry& h : history) {
    out << json{{"record", "history"},
                {"task", h.task},
                {"lr", h.lr},
                {"loss_closed", h.train.closed_set},
                {"loss_energy", h.train.energy},
                {"loss_total", h.train.total},
                {"val_auroc", h.val_auroc},
                {"val_acc", h.val_acc}}
               .dump()
        << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

}  // namespace gel
