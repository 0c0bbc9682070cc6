#include "xview/clustering.hpp"

#include <deque>

namespace xview {

std::vector<IndexList> PseudoLabels::members() const {
  std::vector<IndexList> out(static_cast<std::size_t>(num_clusters));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != kNoise) out[static_cast<std::size_t>(labels[i])].push_back(static_cast<Index>(i));
  return out;
}

std::size_t PseudoLabels::noise_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kNoise));
}

void validate(const PseudoLabels& pl) {
  require(pl.num_clusters >= 0, ErrorCode::kInvalidArgument, "negative cluster count");
  std::vector<int> sizes(static_cast<std::size_t>(pl.num_clusters), 0);
  for (int l : pl.labels) {
    require(l == kNoise || (l >= 0 && l < pl.num_clusters), ErrorCode::kInvalidArgument,
            "pseudo label out of range");
    if (l != kNoise) ++sizes[static_cast<std::size_t>(l)];
  }
  for (int s : sizes)
    require(s > 0, ErrorCode::kInvalidArgument, "pseudo label cluster has no members");
}

namespace {

// Neighbor lists (ascending, self included) under cosine distance.
std::vector<IndexList> neighborhoods(const Matrix& unit, double eps) {
  const Index n = unit.rows();
  const double min_sim = 1.0 - eps;
  std::vector<IndexList> out(static_cast<std::size_t>(n));
  constexpr Index kBlock = 256;
  for (Index start = 0; start < n; start += kBlock) {
    const Index rows = std::min(kBlock, n - start);
    const Matrix sims = unit.middleRows(start, rows) * unit.transpose();
    for (Index r = 0; r < rows; ++r) {
      IndexList& nb = out[static_cast<std::size_t>(start + r)];
      for (Index j = 0; j < n; ++j)
        if (sims(r, j) >= min_sim || j == start + r) nb.push_back(j);
    }
  }
  return out;
}

}  // namespace

PseudoLabels dbscan(const Matrix& features, const DbscanParams& params) {
  require(params.eps > 0.0, ErrorCode::kInvalidArgument, "dbscan: eps must be positive");
  require(params.min_pts >= 1, ErrorCode::kInvalidArgument, "dbscan: min_pts must be >= 1");
  require(features.rows() >= 1, ErrorCode::kInvalidArgument, "dbscan: empty input");

  const Index n = features.rows();
  const auto nbrs = neighborhoods(l2_normalize_rows(features), params.eps);
  std::vector<char> core(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    core[static_cast<std::size_t>(i)] =
        static_cast<Index>(nbrs[static_cast<std::size_t>(i)].size()) >= params.min_pts;

  PseudoLabels out;
  out.labels.assign(static_cast<std::size_t>(n), kNoise);

  // Core points connected through core-core adjacency share a cluster.
  for (Index seed = 0; seed < n; ++seed) {
    const auto s = static_cast<std::size_t>(seed);
    if (!core[s] || out.labels[s] != kNoise) continue;
    const int id = out.num_clusters++;
    std::deque<Index> frontier{seed};
    out.labels[s] = id;
    while (!frontier.empty()) {
      const Index p = frontier.front();
      frontier.pop_front();
      for (Index q : nbrs[static_cast<std::size_t>(p)]) {
        const auto qi = static_cast<std::size_t>(q);
        if (core[qi] && out.labels[qi] == kNoise) {
          out.labels[qi] = id;
          frontier.push_back(q);
        }
      }
    }
  }

  for (Index i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    if (core[ii]) continue;
    for (Index q : nbrs[ii]) {
      if (core[static_cast<std::size_t>(q)]) {
        out.labels[ii] = out.labels[static_cast<std::size_t>(q)];
        break;
      }
    }
  }
  return out;
}

Replicated replicate_features(const Matrix& features, Index factor) {
  require(factor >= 1, ErrorCode::kInvalidArgument, "replicate_features: factor must be >= 1");
  Replicated out;
  out.features.resize(features.rows() * factor, features.cols());
  out.source.reserve(static_cast<std::size_t>(features.rows() * factor));
  for (Index i = 0; i < features.rows(); ++i) {
    for (Index r = 0; r < factor; ++r) {
      out.features.row(i * factor + r) = features.row(i);
      out.source.push_back(i);
    }
  }
  return out;
}

PseudoLabels collapse_replicas(const PseudoLabels& replica_labels, Index original_rows,
                               Index factor) {
  require(static_cast<Index>(replica_labels.size()) == original_rows * factor,
          ErrorCode::kShapeMismatch, "collapse_replicas: size mismatch");
  std::vector<int> first(static_cast<std::size_t>(original_rows));
  for (Index i = 0; i < original_rows; ++i)
    first[static_cast<std::size_t>(i)] = replica_labels[static_cast<std::size_t>(i * factor)];

  // Compact ids so clusters made only of dropped replicas disappear.
  std::vector<int> remap(static_cast<std::size_t>(replica_labels.num_clusters), kNoise);
  PseudoLabels out;
  out.labels.assign(static_cast<std::size_t>(original_rows), kNoise);
  for (Index i = 0; i < original_rows; ++i) {
    const int l = first[static_cast<std::size_t>(i)];
    if (l == kNoise) continue;
    int& m = remap[static_cast<std::size_t>(l)];
    if (m == kNoise) m = out.num_clusters++;
    out.labels[static_cast<std::size_t>(i)] = m;
  }
  return out;
}

Matrix compute_centroids(const Matrix& features, const PseudoLabels& labels) {
  require(static_cast<Index>(labels.size()) == features.rows(), ErrorCode::kShapeMismatch,
          "compute_centroids: label count mismatch");
  validate(labels);
  Matrix sums = Matrix::Zero(labels.num_clusters, features.cols());
  std::vector<Index> counts(static_cast<std::size_t>(labels.num_clusters), 0);
  for (Index i = 0; i < features.rows(); ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l == kNoise) continue;
    sums.row(l) += features.row(i);
    ++counts[static_cast<std::size_t>(l)];
  }
  for (Index k = 0; k < sums.rows(); ++k)
    sums.row(k) /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
  return l2_normalize_rows(sums);
}

void ClusterHistory::record(const PseudoLabels& drone, const PseudoLabels& satellite) {
  epochs_.push_back({drone.num_clusters, satellite.num_clusters});
}

std::vector<ClusterCounts> cluster_count_trace(const ClusterHistory& history) {
  require(history.size() > 0, ErrorCode::kInvalidArgument,
          "cluster_count_trace: empty history");
  return history.epochs();
}

}  // namespace xview
