#pragma once

#include <span>

#include "xview/memory.hpp"

namespace xview {

// Long-term momentum rule. kLiteral uses weights (0.5 - alpha) on the
// history and alpha on the query; kNormalized rescales both by 1/0.5 so
// they sum to one. With row renormalization the two give the same
// direction, they differ only in the pre-normalization magnitude.
enum class LongTermRule { kLiteral, kNormalized };

struct DualMemoryConfig {
  double alpha = 0.2;
  double w_long = 0.5;
  double w_short = 0.5;
  LongTermRule rule = LongTermRule::kLiteral;
};

// Short-term, long-term and fused centroid banks for one view.
class DualMemory {
 public:
  DualMemory() = default;
  DualMemory(const Matrix& centroids, const DualMemoryConfig& config);

  const Matrix& short_term() const { return short_; }
  const Matrix& long_term() const { return long_; }
  const Matrix& fused() const { return fused_; }
  const DualMemoryConfig& config() const { return config_; }
  Index size() const { return long_.rows(); }

  void update_long_term(Index cluster_id, const Eigen::Ref<const Vector>& q);

  // sigmoid of the mean Euclidean distance between each query and the
  // long-term centroid of its cluster.
  double compute_beta(const Matrix& queries, std::span<const Index> cluster_ids) const;

  // For every listed cluster: short <- beta long + (1 - beta) short.
  void update_short_term(double beta, std::span<const Index> clusters);

  void refresh_fused();

  // One minibatch: beta and the short-term blend read the long-term bank as
  // it stood before the batch, then long-term updates run per query in
  // row order, then the fused bank is rebuilt. Returns beta.
  double update_batch(const Matrix& queries, std::span<const Index> cluster_ids);

 private:
  Matrix short_;
  Matrix long_;
  Matrix fused_;
  DualMemoryConfig config_;
};

DualMemory init_dual(const Matrix& centroids, const DualMemoryConfig& config);

// L_cv(view) + lambda_cv * (-log softmax(fused q / tau)[positive]).
LossGrad dhml_loss(const Eigen::Ref<const Vector>& query, const DualMemory& dm,
                   Index positive_id, double tau, double lambda_cv, const LossGrad& cv_term);

BatchLoss batch_loss_dhml(const Matrix& queries, std::span<const Index> positives,
                          const DualMemory& dm, double tau, double lambda_cv,
                          const BatchLoss& cv_term);

}  // namespace xview
