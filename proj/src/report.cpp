#include "xview/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace xview {

using nlohmann::json;

json scores_json(const RetrievalScores& s) {
  return {{"r1", s.r1}, {"r5", s.r5}, {"r10", s.r10}, {"ap", s.ap}};
}

json view_scores_json(const ViewScores& s) {
  return {{"drone_to_satellite", scores_json(s.drone_to_satellite)},
          {"satellite_to_drone", scores_json(s.satellite_to_drone)}};
}

json epoch_json(const EpochRecord& rec, Ablation ablation) {
  json j;
  j["type"] = "epoch";
  j["epoch"] = rec.epoch;
  j["ablation"] = to_string(ablation);
  j["enabled"] = {{"dhml", rec.enabled.dhml}, {"icel", rec.enabled.icel}, {"ple", rec.enabled.ple}};
  j["loss"] = {{"cv", rec.loss.cv}, {"dhml", rec.loss.dhml}, {"icel", rec.loss.icel},
               {"total", rec.loss.total}};
  j["clusters"] = {{"drone", rec.clusters.drone}, {"satellite", rec.clusters.satellite}};
  j["noise"] = {{"drone", rec.drone_noise}, {"satellite", rec.satellite_noise}};
  j["ple_agreement"] = rec.ple_agreement ? json(*rec.ple_agreement) : json(nullptr);
  j["beta"] = {{"drone", rec.beta_drone}, {"satellite", rec.beta_satellite}};
  j["icel_k_clamped"] = rec.icel_clamped;
  j["scores"] = rec.scores ? view_scores_json(*rec.scores) : json(nullptr);
  return j;
}

json timing_json(const EpochRecord& rec) {
  return {{"epoch", rec.epoch}, {"wall_seconds", rec.wall_seconds}};
}

json summary_json(const TrainingRun& run, Ablation ablation) {
  json j;
  j["type"] = "summary";
  j["ablation"] = to_string(ablation);
  j["epochs"] = run.epochs.size();
  j["initial"] = run.initial ? view_scores_json(*run.initial) : json(nullptr);
  const auto best = best_epoch(run.epochs);
  if (best) {
    j["best_epoch"] = run.epochs[*best].epoch;
    j["best"] = view_scores_json(*run.epochs[*best].scores);
  } else {
    j["best_epoch"] = nullptr;
    j["best"] = nullptr;
  }
  const EpochRecord* last = run.epochs.empty() ? nullptr : &run.epochs.back();
  j["final"] = last && last->scores ? view_scores_json(*last->scores) : json(nullptr);
  if (last) j["final_loss"] = last->loss.total;
  return j;
}

json manifest_json(const std::string& command, const std::vector<ResolvedSetting>& settings,
                   const CorpusSource& source, const std::string& output_dir, std::uint64_t seed) {
  json j;
  j["tool"] = "xview";
  j["version"] = XVIEW_VERSION;
  j["command"] = command;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  json corpus = {{"source", source.kind}};
  if (source.kind == "files") {
    corpus["drone"] = source.drone_path;
    corpus["satellite"] = source.satellite_path;
  }
  j["corpus"] = corpus;
  json cfg = json::object();
  for (const auto& s : settings) cfg[s.key] = {{"value", s.value}, {"source", to_string(s.source)}};
  j["settings"] = cfg;
  return j;
}

std::vector<std::size_t> histogram(const std::vector<double>& values, int bins, double lo, double hi) {
  require(bins >= 1 && hi > lo, ErrorCode::kInvalidArgument, "histogram: need bins >= 1 and hi > lo");
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  const double width = (hi - lo) / bins;
  for (double v : values) {
    int b = static_cast<int>(std::floor((v - lo) / width));
    b = std::clamp(b, 0, bins - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  return counts;
}

std::string ablation_table(const std::vector<std::pair<Ablation, TrainingRun>>& runs) {
  std::string out =
      "config    dhml icel ple  L_total    clusters(d/s)  R@1(d->s) AP(d->s)  R@1(s->d) AP(s->d)\n";
  char line[256];
  for (const auto& [ablation, run] : runs) {
    const Components c = components_for(ablation);
    if (run.epochs.empty()) continue;
    const EpochRecord& last = run.epochs.back();
    const ViewScores s = last.scores.value_or(ViewScores{});
    std::snprintf(line, sizeof(line), "%-9s %-4s %-4s %-4s %-10.5f %6d/%-6d   %-9.4f %-9.4f %-9.4f %-9.4f\n",
                  to_string(ablation), c.dhml ? "yes" : "no", c.icel ? "yes" : "no",
                  c.ple ? "yes" : "no", last.loss.total, last.clusters.drone,
                  last.clusters.satellite, s.drone_to_satellite.r1, s.drone_to_satellite.ap,
                  s.satellite_to_drone.r1, s.satellite_to_drone.ap);
    out += line;
  }
  return out;
}

}  // namespace xview
