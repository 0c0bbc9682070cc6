#include "xview/ple.hpp"

#include <algorithm>
#include <map>

namespace xview {

Matrix perturb(const Matrix& features, double sigma, Rng& rng) {
  require(sigma >= 0.0, ErrorCode::kInvalidArgument, "perturb: sigma must be non-negative");
  if (sigma == 0.0) return features;
  Matrix out = features + random_normal(features.rows(), features.cols(), sigma, rng);
  return l2_normalize_rows(out);
}

RankLabels cross_view_rank_labels(const Matrix& query, const Matrix& gallery,
                                  std::span<const int> gallery_labels, Index depth) {
  require(static_cast<Index>(gallery_labels.size()) == gallery.rows(), ErrorCode::kShapeMismatch,
          "rank labels: gallery label count mismatch");
  require(depth >= 1, ErrorCode::kInvalidArgument, "rank labels: depth must be >= 1");
  IndexList labelled;
  for (Index i = 0; i < gallery.rows(); ++i)
    if (gallery_labels[static_cast<std::size_t>(i)] >= 0) labelled.push_back(i);
  require(!labelled.empty(), ErrorCode::kInvalidArgument, "rank labels: empty gallery");

  Matrix kept(static_cast<Index>(labelled.size()), gallery.cols());
  for (std::size_t i = 0; i < labelled.size(); ++i) kept.row(static_cast<Index>(i)) = gallery.row(labelled[i]);
  const Index k = std::min<Index>(depth, kept.rows());
  const Matrix sims = pairwise_sim(query, kept);

  RankLabels out(static_cast<std::size_t>(query.rows()));
  for (Index m = 0; m < query.rows(); ++m) {
    const IndexList top = top_k_indices(sims.row(m).transpose(), k);
    auto& labels = out[static_cast<std::size_t>(m)];
    labels.reserve(top.size());
    for (Index t : top) labels.push_back(gallery_labels[static_cast<std::size_t>(labelled[static_cast<std::size_t>(t)])]);
  }
  return out;
}

int consistency_vote(std::span<const int> original, std::span<const int> perturbed, Index depth) {
  require(depth >= 1 && static_cast<Index>(original.size()) >= depth &&
              static_cast<Index>(perturbed.size()) >= depth,
          ErrorCode::kInvalidArgument, "consistency_vote: lists shorter than depth");
  std::map<int, int> count_orig;
  std::map<int, int> count_pert;
  int best_label = original[0];
  int best_count = 0;
  for (Index k = 0; k < depth; ++k) {
    ++count_orig[original[static_cast<std::size_t>(k)]];
    ++count_pert[perturbed[static_cast<std::size_t>(k)]];
    // Multiplicity of each label in the prefix-(k+1) intersection.
    for (const auto& [label, co] : count_orig) {
      const auto it = count_pert.find(label);
      if (it == count_pert.end()) continue;
      const int c = std::min(co, it->second);
      if (c > best_count || (c == best_count && label < best_label)) {
        best_count = c;
        best_label = label;
      }
    }
  }
  return best_count > 0 ? best_label : original[0];
}

Matrix one_hot(std::span<const int> labels, Index num_classes) {
  Matrix out = Matrix::Zero(static_cast<Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < num_classes, ErrorCode::kInvalidArgument,
            "one_hot: label out of range");
    out(static_cast<Index>(i), labels[i]) = 1.0;
  }
  return out;
}

RefinedLabels smooth_labels(const Matrix& features, const Matrix& features_perturbed,
                            const Matrix& refined_one_hot, Index keep) {
  require(features.rows() == features_perturbed.rows() &&
              features.rows() == refined_one_hot.rows(),
          ErrorCode::kShapeMismatch, "smooth_labels: row count mismatch");
  require(keep >= 1, ErrorCode::kInvalidArgument, "smooth_labels: keep must be >= 1");
  RefinedLabels out;
  const Index rows = features.rows();
  if (keep > rows) {
    keep = rows;
    out.clamped = true;
  }
  const Matrix p = pairwise_sim(features, features) + pairwise_sim(features_perturbed, features_perturbed);
  out.label_matrix = Matrix::Zero(rows, refined_one_hot.cols());
  out.hard.resize(static_cast<std::size_t>(rows));
  for (Index m = 0; m < rows; ++m) {
    for (Index j : top_k_indices(p.row(m).transpose(), keep))
      out.label_matrix.row(m) += refined_one_hot.row(j);
    Index arg = 0;
    for (Index c = 1; c < out.label_matrix.cols(); ++c)
      if (out.label_matrix(m, c) > out.label_matrix(m, arg)) arg = c;
    out.hard[static_cast<std::size_t>(m)] = static_cast<int>(arg);
  }
  return out;
}

PleResult refine_cross_view_labels(const Matrix& query, const Matrix& gallery,
                                   const PseudoLabels& gallery_labels,
                                   const PerturbConfig& config, Rng& rng) {
  require(config.depth >= 1, ErrorCode::kConfig, "ple: depth must be >= 1");
  require(config.replication >= 1, ErrorCode::kConfig, "ple: replication must be >= 1");
  require(gallery_labels.num_clusters >= 1, ErrorCode::kInvalidArgument,
          "ple: gallery has no clusters");
  const Replicated rep = replicate_features(query, config.replication);
  const Matrix query_pert = perturb(rep.features, config.sigma, rng);
  const Matrix gallery_pert = perturb(gallery, config.sigma, rng);

  const RankLabels orig = cross_view_rank_labels(rep.features, gallery, gallery_labels.labels, config.depth);
  const RankLabels pert = cross_view_rank_labels(query_pert, gallery_pert, gallery_labels.labels, config.depth);
  const Index depth = static_cast<Index>(orig.front().size());

  std::vector<int> votes(orig.size());
  for (std::size_t m = 0; m < orig.size(); ++m) votes[m] = consistency_vote(orig[m], pert[m], depth);

  const RefinedLabels smoothed = smooth_labels(rep.features, query_pert,
                                               one_hot(votes, gallery_labels.num_clusters),
                                               config.smoothing_keep);
  PleResult out;
  out.num_classes = gallery_labels.num_clusters;
  out.clamped = smoothed.clamped || depth < config.depth;
  out.votes.resize(static_cast<std::size_t>(query.rows()));
  out.refined.resize(static_cast<std::size_t>(query.rows()));
  const auto r = static_cast<std::size_t>(config.replication);
  for (std::size_t m = 0; m < out.refined.size(); ++m) {
    std::map<int, int> tally_vote;
    std::map<int, int> tally_hard;
    for (std::size_t j = m * r; j < (m + 1) * r; ++j) {
      ++tally_vote[votes[j]];
      ++tally_hard[smoothed.hard[j]];
    }
    // std::map iterates ascending, so max_element keeps the smaller label.
    auto by_count = [](const auto& a, const auto& b) { return a.second < b.second; };
    out.votes[m] = std::max_element(tally_vote.begin(), tally_vote.end(), by_count)->first;
    out.refined[m] = std::max_element(tally_hard.begin(), tally_hard.end(), by_count)->first;
  }
  return out;
}

double ple_agreement(std::span<const int> refined, const PseudoLabels& gallery_labels,
                     std::span<const int> gallery_truth, std::span<const int> query_truth) {
  require(refined.size() == query_truth.size() && gallery_truth.size() == gallery_labels.size(),
          ErrorCode::kShapeMismatch, "ple_agreement: size mismatch");
  if (refined.empty()) return 0.0;
  std::vector<std::map<int, int>> tallies(static_cast<std::size_t>(gallery_labels.num_clusters));
  for (std::size_t i = 0; i < gallery_labels.size(); ++i)
    if (gallery_labels[i] >= 0) ++tallies[static_cast<std::size_t>(gallery_labels[i])][gallery_truth[i]];
  std::vector<int> majority(tallies.size(), -1);
  for (std::size_t c = 0; c < tallies.size(); ++c) {
    int best = -1;
    for (const auto& [truth, n] : tallies[c])
      if (n > best) {
        best = n;
        majority[c] = truth;
      }
  }
  std::size_t hits = 0;
  for (std::size_t m = 0; m < refined.size(); ++m) {
    const int r = refined[m];
    if (r >= 0 && r < static_cast<int>(majority.size()) && majority[static_cast<std::size_t>(r)] == query_truth[m]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(refined.size());
}

}  // namespace xview
