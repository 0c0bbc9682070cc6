#include "xview/memory.hpp"

namespace xview {

const char* to_string(View v) { return v == View::kDrone ? "drone" : "satellite"; }

LossGrad cluster_nce(const Eigen::Ref<const Vector>& query, const Matrix& bank,
                     Index positive, double tau) {
  require(tau > 0.0, ErrorCode::kInvalidArgument, "contrastive loss: tau must be positive");
  require(positive >= 0 && positive < bank.rows(), ErrorCode::kInvalidArgument,
          "contrastive loss: positive id out of range");
  require(query.size() == bank.cols(), ErrorCode::kShapeMismatch,
          "contrastive loss: query dimension mismatch");
  const Vector logits = unit_sims(query, bank) / tau;
  const Vector p = softmax(logits);
  LossGrad out;
  out.loss = log_sum_exp(logits) - logits(positive);
  // d/dq = (sum_k p_k phi_k - phi_+) / tau
  out.grad = (bank.transpose() * p - bank.row(positive).transpose()) / tau;
  return out;
}

ClusterMemory::ClusterMemory(Matrix centroids, View view, double alpha, bool renormalize)
    : centroids_(std::move(centroids)), view_(view), alpha_(alpha), renormalize_(renormalize) {
  require(centroids_.rows() >= 1, ErrorCode::kInvalidArgument, "cluster memory: no centroids");
  require(alpha_ >= 0.0 && alpha_ <= 1.0, ErrorCode::kConfig,
          "cluster memory: alpha must lie in [0, 1]");
}

void ClusterMemory::momentum_update(Index cluster_id, const Eigen::Ref<const Vector>& q) {
  require(cluster_id >= 0 && cluster_id < centroids_.rows(), ErrorCode::kInvalidArgument,
          "momentum_update: cluster id out of range");
  require(q.size() == centroids_.cols(), ErrorCode::kShapeMismatch,
          "momentum_update: query dimension mismatch");
  auto row = centroids_.row(cluster_id);
  row = alpha_ * row + (1.0 - alpha_) * q.transpose();
  if (renormalize_) {
    const double n = row.norm();
    require(n > 0.0, ErrorCode::kDegenerate, "momentum_update: centroid collapsed to zero");
    row /= n;
  }
}

void ClusterMemory::update_batch(const Matrix& queries, std::span<const Index> cluster_ids) {
  require(static_cast<Index>(cluster_ids.size()) == queries.rows(), ErrorCode::kShapeMismatch,
          "update_batch: id count mismatch");
  for (Index i = 0; i < queries.rows(); ++i)
    momentum_update(cluster_ids[static_cast<std::size_t>(i)], queries.row(i).transpose());
}

ClusterMemory init_memory(const Matrix& centroids, View view, const MemoryConfig& config) {
  return ClusterMemory(centroids, view, config.alpha, config.renormalize);
}

LossGrad contrastive_loss(const Eigen::Ref<const Vector>& query, const ClusterMemory& mem,
                          Index positive_id, double tau) {
  return cluster_nce(query, mem.centroids(), positive_id, tau);
}

BatchLoss batch_nce(const Matrix& queries, std::span<const Index> positives,
                    const Matrix& bank, double tau) {
  require(static_cast<Index>(positives.size()) == queries.rows(), ErrorCode::kShapeMismatch,
          "batch loss: label count mismatch");
  require(queries.rows() > 0, ErrorCode::kInvalidArgument, "batch loss: empty batch");
  const double inv_b = 1.0 / static_cast<double>(queries.rows());
  BatchLoss out;
  out.grad.resize(queries.rows(), queries.cols());
  for (Index i = 0; i < queries.rows(); ++i) {
    const Index pos = positives[static_cast<std::size_t>(i)];
    require(pos >= 0, ErrorCode::kInvalidArgument, "batch loss: query carries the noise label");
    const LossGrad lg = cluster_nce(queries.row(i).transpose(), bank, pos, tau);
    out.loss += lg.loss * inv_b;
    out.grad.row(i) = lg.grad.transpose() * inv_b;
  }
  return out;
}

CrossViewLoss batch_loss_cv(const Matrix& drone_batch, std::span<const Index> drone_ids,
                            const Matrix& sat_batch, std::span<const Index> sat_ids,
                            const ClusterMemory& mem_d, const ClusterMemory& mem_s,
                            double tau) {
  CrossViewLoss out;
  out.drone = batch_nce(drone_batch, drone_ids, mem_d.centroids(), tau);
  out.satellite = batch_nce(sat_batch, sat_ids, mem_s.centroids(), tau);
  out.total = out.drone.loss + out.satellite.loss;
  return out;
}

}  // namespace xview
