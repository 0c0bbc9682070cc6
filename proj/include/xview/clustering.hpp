#pragma once

#include <utility>
#include <vector>

#include "xview/numcore.hpp"

namespace xview {

inline constexpr int kNoise = -1;

struct PseudoLabels {
  std::vector<int> labels;  // kNoise or [0, num_clusters)
  int num_clusters = 0;

  std::size_t size() const { return labels.size(); }
  int operator[](std::size_t i) const { return labels[i]; }
  // Member indices of every cluster, ascending.
  std::vector<IndexList> members() const;
  std::size_t noise_count() const;
};

// Throws unless every label is in range and every cluster is non-empty.
void validate(const PseudoLabels& labels);

// Cosine-distance DBSCAN. A point is a neighbor when 1 - cos <= eps; the
// neighborhood includes the point itself.
struct DbscanParams {
  double eps = 0.4;
  Index min_pts = 4;
};

// Cluster ids follow the order of each cluster's lowest-indexed core point.
// A border point joins the cluster of its lowest-indexed core neighbor.
PseudoLabels dbscan(const Matrix& features, const DbscanParams& params);

struct Replicated {
  Matrix features;
  IndexList source;  // row i of features came from row source[i]
};

// Each row repeated `factor` times, contiguous and order-preserving.
Replicated replicate_features(const Matrix& features, Index factor);

// Labels of replicated rows mapped back to the originals (first replica).
PseudoLabels collapse_replicas(const PseudoLabels& replica_labels,
                               Index original_rows, Index factor);

// Per-cluster mean of member rows, L2-normalized. Noise is ignored.
Matrix compute_centroids(const Matrix& features, const PseudoLabels& labels);

struct ClusterCounts {
  int drone = 0;
  int satellite = 0;
  friend bool operator==(const ClusterCounts&, const ClusterCounts&) = default;
};

class ClusterHistory {
 public:
  void record(const PseudoLabels& drone, const PseudoLabels& satellite);
  void record(ClusterCounts counts) { epochs_.push_back(counts); }
  std::size_t size() const { return epochs_.size(); }
  const std::vector<ClusterCounts>& epochs() const { return epochs_; }

 private:
  std::vector<ClusterCounts> epochs_;
};

std::vector<ClusterCounts> cluster_count_trace(const ClusterHistory& history);

}  // namespace xview
