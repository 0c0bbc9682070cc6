#pragma once

#include <span>
#include <vector>

#include "xview/numcore.hpp"

namespace xview {

enum class View { kDrone = 0, kSatellite = 1 };

const char* to_string(View v);

struct LossGrad {
  double loss = 0.0;
  Vector grad;  // d loss / d query
};

// Per-view loss over a minibatch: mean loss and per-query gradient rows
// (already divided by the batch size).
struct BatchLoss {
  double loss = 0.0;
  Matrix grad;
};

// -log softmax(bank q / tau)[positive]; the bank is a constant.
LossGrad cluster_nce(const Eigen::Ref<const Vector>& query, const Matrix& bank,
                     Index positive, double tau);

// Cluster centroid dictionary with momentum updates.
class ClusterMemory {
 public:
  ClusterMemory() = default;
  ClusterMemory(Matrix centroids, View view, double alpha, bool renormalize = true);

  const Matrix& centroids() const { return centroids_; }
  View view() const { return view_; }
  double alpha() const { return alpha_; }
  bool renormalize() const { return renormalize_; }
  Index size() const { return centroids_.rows(); }

  // phi <- alpha phi + (1 - alpha) q, then renormalized when enabled.
  void momentum_update(Index cluster_id, const Eigen::Ref<const Vector>& q);

  // Sequential updates in batch row order.
  void update_batch(const Matrix& queries, std::span<const Index> cluster_ids);

 private:
  Matrix centroids_;
  View view_ = View::kDrone;
  double alpha_ = 0.2;
  bool renormalize_ = true;
};

struct MemoryConfig {
  double alpha = 0.2;
  bool renormalize = true;
};

ClusterMemory init_memory(const Matrix& centroids, View view, const MemoryConfig& config);

LossGrad contrastive_loss(const Eigen::Ref<const Vector>& query, const ClusterMemory& mem,
                          Index positive_id, double tau);

// Batch mean of cluster_nce against a fixed bank.
BatchLoss batch_nce(const Matrix& queries, std::span<const Index> positives,
                    const Matrix& bank, double tau);

struct CrossViewLoss {
  double total = 0.0;  // drone + satellite
  BatchLoss drone;
  BatchLoss satellite;
};

// Baseline dual-path loss: mean drone loss plus mean satellite loss, each
// against its own view's memory.
CrossViewLoss batch_loss_cv(const Matrix& drone_batch, std::span<const Index> drone_ids,
                            const Matrix& sat_batch, std::span<const Index> sat_ids,
                            const ClusterMemory& mem_d, const ClusterMemory& mem_s,
                            double tau);

}  // namespace xview
