#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xview/memory.hpp"
#include "xview/numcore.hpp"

namespace xview {

struct SyntheticSpec {
  Index num_locations = 64;
  Index latent_dim = 16;
  Index input_dim = 32;
  Index drone_per_loc = 8;
  Index sat_per_loc = 1;
  double noise_std = 0.05;
  // Cosine between matching columns of the two view maps. 1 makes the
  // maps identical; below 1 the satellite map tilts into directions the
  // drone map never uses (requires input_dim >= 2 * latent_dim).
  double view_overlap = 0.35;
  std::uint64_t seed = 7;
};

// What training may see: raw inputs of both views, nothing else.
struct TwoViewData {
  Matrix drone;
  Matrix satellite;
};

// Location id per instance. Evaluation only.
struct GroundTruth {
  std::vector<int> drone;
  std::vector<int> satellite;
};

class Corpus {
 public:
  Corpus() = default;
  Corpus(TwoViewData data, std::optional<GroundTruth> truth);

  const TwoViewData& views() const { return data_; }
  bool has_ground_truth() const { return truth_.has_value(); }
  // Throws when the corpus was loaded without labels.
  const GroundTruth& ground_truth_for_evaluation() const;

 private:
  TwoViewData data_;
  std::optional<GroundTruth> truth_;
};

// Orthonormal-column view maps (input_dim x latent_dim).
struct ViewMaps {
  Matrix drone;
  Matrix satellite;
};

ViewMaps make_view_maps(const SyntheticSpec& spec, Rng& rng);

Corpus generate(const SyntheticSpec& spec);

// "DMFV" feature file, one per view.
struct FeatureFile {
  View view = View::kDrone;
  Matrix features;
  std::optional<std::vector<int>> labels;
};

void write_feature_file(const std::string& path, const FeatureFile& file);
FeatureFile read_feature_file(const std::string& path);
void write_feature_stream(std::ostream& out, const FeatureFile& file);
FeatureFile read_feature_stream(std::istream& in);

// Both views; ground truth is attached only when both files carry labels.
Corpus load_features(const std::string& drone_path, const std::string& sat_path);
void save_corpus(const Corpus& corpus, const std::string& drone_path, const std::string& sat_path);

}  // namespace xview
