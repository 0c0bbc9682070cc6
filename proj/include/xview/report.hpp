#pragma once

// JSON records for run artifacts. Metrics records carry no wall-clock so
// that seeded runs produce byte-identical metrics files; timings go to a
// separate record.

#include <json.hpp>
#include <string>
#include <vector>

#include "xview/config.hpp"
#include "xview/train.hpp"

namespace xview {

nlohmann::json scores_json(const RetrievalScores& s);
nlohmann::json view_scores_json(const ViewScores& s);
nlohmann::json epoch_json(const EpochRecord& rec, Ablation ablation);
nlohmann::json timing_json(const EpochRecord& rec);
nlohmann::json summary_json(const TrainingRun& run, Ablation ablation);

struct CorpusSource {
  std::string kind;  // "synthetic" or "files"
  std::string drone_path;
  std::string satellite_path;
};

nlohmann::json manifest_json(const std::string& command, const std::vector<ResolvedSetting>& settings,
                             const CorpusSource& source, const std::string& output_dir,
                             std::uint64_t seed);

// Equal-width bins over [lo, hi]; hi falls in the last bin, values outside
// the range are clamped to the edge bins. Counts sum to values.size().
std::vector<std::size_t> histogram(const std::vector<double>& values, int bins, double lo, double hi);

// One line per ablation level; columns are final-epoch values.
std::string ablation_table(const std::vector<std::pair<Ablation, TrainingRun>>& runs);

}  // namespace xview
