#pragma once

#include <span>
#include <vector>

#include "xview/clustering.hpp"
#include "xview/numcore.hpp"

namespace xview {

struct PerturbConfig {
  double sigma = 0.01;
  Index depth = 10;          // ranking depth K
  Index smoothing_keep = 5;  // entries kept per row of the smoothing mask
  // Each query row is repeated this many times before perturbation and
  // smoothing, mirroring the replication used for clustering; the label of
  // an original is the majority over its replicas.
  Index replication = 1;
};

// Per query instance, the gallery labels of the top-K ranked gallery rows.
using RankLabels = std::vector<std::vector<int>>;

struct RefinedLabels {
  Matrix label_matrix;      // rows x C smoothed scores
  std::vector<int> hard;    // argmax per row, lowest index on ties
  bool clamped = false;     // fewer rows than the keep count
};

// f + eps with eps ~ N(0, sigma^2), rows renormalized. sigma == 0 returns
// the input unchanged.
Matrix perturb(const Matrix& features, double sigma, Rng& rng);

// Noise-labelled gallery rows are skipped. Depth is clamped to the number
// of labelled gallery rows.
RankLabels cross_view_rank_labels(const Matrix& query, const Matrix& gallery,
                                  std::span<const int> gallery_labels, Index depth);

// Label with the largest multiplicity in the prefix-k multiset
// intersection of the two lists, over all k (ties: smaller label). Falls
// back to the first entry of the original list when every intersection is
// empty.
int consistency_vote(std::span<const int> original, std::span<const int> perturbed,
                     Index depth);

// Rows of `refined` are one-hot over num_classes columns.
Matrix one_hot(std::span<const int> labels, Index num_classes);

// Sum of the two intra-view similarity matrices, binarized to its `keep`
// largest entries per row, multiplied into the one-hot refined labels.
RefinedLabels smooth_labels(const Matrix& features, const Matrix& features_perturbed,
                            const Matrix& refined_one_hot, Index keep);

struct PleResult {
  std::vector<int> votes;     // per original query row, before smoothing
  std::vector<int> refined;   // per original query row, after smoothing
  Index num_classes = 0;
  bool clamped = false;
};

// Full pipeline: perturb, rank both feature pairs, vote, smooth.
// Labels live in the gallery's label space.
PleResult refine_cross_view_labels(const Matrix& query, const Matrix& gallery,
                                   const PseudoLabels& gallery_labels,
                                   const PerturbConfig& config, Rng& rng);

// Satellite queries against the drone gallery.
inline PleResult run_ple(const Matrix& sat_features, const Matrix& drone_features,
                         const PseudoLabels& drone_labels, const PerturbConfig& config,
                         Rng& rng) {
  return refine_cross_view_labels(sat_features, drone_features, drone_labels, config, rng);
}

// Fraction of query rows whose refined label names a gallery cluster whose
// majority ground-truth id equals the query's ground truth.
double ple_agreement(std::span<const int> refined, const PseudoLabels& gallery_labels,
                     std::span<const int> gallery_truth, std::span<const int> query_truth);

}  // namespace xview
