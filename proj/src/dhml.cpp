#include "xview/dhml.hpp"

#include <set>

namespace xview {

namespace {

template <typename Row>
void renormalize(Row&& row) {
  const double n = row.norm();
  require(n > 0.0, ErrorCode::kDegenerate, "dual memory: centroid collapsed to zero");
  row /= n;
}

}  // namespace

DualMemory::DualMemory(const Matrix& centroids, const DualMemoryConfig& config)
    : short_(centroids), long_(centroids), config_(config) {
  require(centroids.rows() >= 1, ErrorCode::kInvalidArgument, "dual memory: no centroids");
  require(config.w_long >= 0.0 && config.w_short >= 0.0, ErrorCode::kConfig,
          "dual memory: fusion weights must be non-negative");
  require(config.w_long + config.w_short > 0.0, ErrorCode::kConfig,
          "dual memory: fusion weights are both zero");
  require(config.alpha >= 0.0 && config.alpha <= 1.0, ErrorCode::kConfig,
          "dual memory: alpha must lie in [0, 1]");
  if (config.rule == LongTermRule::kLiteral)
    require(config.alpha < 0.5, ErrorCode::kConfig,
            "dual memory: the literal long-term rule needs alpha < 0.5");
  refresh_fused();
}

void DualMemory::update_long_term(Index cluster_id, const Eigen::Ref<const Vector>& q) {
  require(cluster_id >= 0 && cluster_id < long_.rows(), ErrorCode::kInvalidArgument,
          "update_long_term: cluster id out of range");
  require(q.size() == long_.cols(), ErrorCode::kShapeMismatch,
          "update_long_term: query dimension mismatch");
  double w_hist = 0.5 - config_.alpha;
  double w_query = config_.alpha;
  if (config_.rule == LongTermRule::kNormalized) {
    w_hist /= 0.5;
    w_query /= 0.5;
  }
  auto row = long_.row(cluster_id);
  row = w_hist * row + w_query * q.transpose();
  renormalize(row);
}

double DualMemory::compute_beta(const Matrix& queries, std::span<const Index> cluster_ids) const {
  require(queries.rows() > 0, ErrorCode::kInvalidArgument, "compute_beta: empty batch");
  require(static_cast<Index>(cluster_ids.size()) == queries.rows(), ErrorCode::kShapeMismatch,
          "compute_beta: id count mismatch");
  double total = 0.0;
  for (Index i = 0; i < queries.rows(); ++i) {
    const Index k = cluster_ids[static_cast<std::size_t>(i)];
    require(k >= 0 && k < long_.rows(), ErrorCode::kInvalidArgument,
            "compute_beta: cluster id out of range");
    total += (queries.row(i) - long_.row(k)).norm();
  }
  return sigmoid(total / static_cast<double>(queries.rows()));
}

void DualMemory::update_short_term(double beta, std::span<const Index> clusters) {
  require(beta >= 0.0 && beta <= 1.0, ErrorCode::kInvalidArgument,
          "update_short_term: beta must lie in [0, 1]");
  for (Index k : clusters) {
    require(k >= 0 && k < short_.rows(), ErrorCode::kInvalidArgument,
            "update_short_term: cluster id out of range");
    auto row = short_.row(k);
    row = beta * long_.row(k) + (1.0 - beta) * row;
    renormalize(row);
  }
}

void DualMemory::refresh_fused() {
  fused_ = config_.w_long * long_ + config_.w_short * short_;
  for (Index k = 0; k < fused_.rows(); ++k) renormalize(fused_.row(k));
}

double DualMemory::update_batch(const Matrix& queries, std::span<const Index> cluster_ids) {
  const double beta = compute_beta(queries, cluster_ids);
  const std::set<Index> present(cluster_ids.begin(), cluster_ids.end());
  const IndexList clusters(present.begin(), present.end());
  update_short_term(beta, clusters);
  for (Index i = 0; i < queries.rows(); ++i)
    update_long_term(cluster_ids[static_cast<std::size_t>(i)], queries.row(i).transpose());
  refresh_fused();
  return beta;
}

DualMemory init_dual(const Matrix& centroids, const DualMemoryConfig& config) {
  return DualMemory(centroids, config);
}

LossGrad dhml_loss(const Eigen::Ref<const Vector>& query, const DualMemory& dm,
                   Index positive_id, double tau, double lambda_cv, const LossGrad& cv_term) {
  const LossGrad fused = cluster_nce(query, dm.fused(), positive_id, tau);
  LossGrad out;
  out.loss = cv_term.loss + lambda_cv * fused.loss;
  out.grad = cv_term.grad + lambda_cv * fused.grad;
  return out;
}

BatchLoss batch_loss_dhml(const Matrix& queries, std::span<const Index> positives,
                          const DualMemory& dm, double tau, double lambda_cv,
                          const BatchLoss& cv_term) {
  const BatchLoss fused = batch_nce(queries, positives, dm.fused(), tau);
  BatchLoss out;
  out.loss = cv_term.loss + lambda_cv * fused.loss;
  out.grad = cv_term.grad + lambda_cv * fused.grad;
  return out;
}

}  // namespace xview
