#pragma once

#include <span>

#include "xview/memory.hpp"

namespace xview {

// Snapshot of per-instance embeddings for one view, fixed for an epoch.
struct InstanceMemory {
  Matrix features;  // unit-norm rows; row i is instance i
  View view = View::kDrone;
  Index size() const { return features.rows(); }
};

InstanceMemory build_instance_memory(const Matrix& embeddings, View view);

inline constexpr Index kNoExclusion = -1;

struct NeighborhoodSet {
  IndexList omega;  // ascending
  IndexList nk1;    // top-k1, descending similarity
  IndexList nk2;    // top-k2, descending similarity
  bool clamped = false;  // k2 was reduced to the available candidates
};

struct IcelWeights {
  double lambda_k1 = 1.0;
  double lambda_k2 = 1.0;
  double gamma = 0.8;
  double tau = 0.05;
  Index k1 = 5;
  Index k2 = 20;
};

// Similarities are plain dot products: queries and memory rows are unit-norm,
// so they equal cosine similarity.

// { v : S(q, f_v) > gamma * max_v S(q, f_v) }, skipping `exclude`.
IndexList threshold_neighborhood(const Eigen::Ref<const Vector>& q, const InstanceMemory& mem,
                                 double gamma, Index exclude = kNoExclusion);

struct TopKPair {
  IndexList nk1;
  IndexList nk2;
};

TopKPair topk_neighborhoods(const Eigen::Ref<const Vector>& q, const InstanceMemory& mem,
                            Index k1, Index k2, Index exclude = kNoExclusion);

// -sum_{v in omega} log softmax_omega(S / tau)[v]; zero for an empty set.
LossGrad loss_omega(const Eigen::Ref<const Vector>& q, const InstanceMemory& mem,
                    std::span<const Index> omega, double tau);

// KL(p || uniform) with p = softmax of raw similarities over the set.
LossGrad loss_consistency_k2(const Eigen::Ref<const Vector>& q, const InstanceMemory& mem,
                             std::span<const Index> nk2);

// -KL(p || uniform) over the k1 set.
LossGrad loss_mutual_info_k1(const Eigen::Ref<const Vector>& q, const InstanceMemory& mem,
                             std::span<const Index> nk1);

// Neighborhood selection used by icel_total. k2 (and k1 with it) is clamped
// to the number of candidates when the memory is too small.
NeighborhoodSet select_neighborhoods(const Eigen::Ref<const Vector>& q,
                                     const InstanceMemory& mem, const IcelWeights& w,
                                     Index exclude);

// L_omega + lambda_k1 L_k1 + lambda_k2 L_k2 for one query and direction.
struct DirectionalTerm {
  double omega = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;
  double total = 0.0;
  Vector grad;
};

DirectionalTerm directional_loss(const Eigen::Ref<const Vector>& q, const InstanceMemory& mem,
                                 const NeighborhoodSet& sets, const IcelWeights& w);

// Cross-view links from refined pseudo-labels. Instances sharing a refined
// label with the query are added to the cross-view omega set.
struct RefinedLinks {
  std::span<const int> drone_labels;    // per drone instance, clustering label
  std::span<const int> sat_refined;     // per satellite instance, drone label space
  // Optional reverse direction; leave empty when unused.
  std::span<const int> sat_labels;      // per satellite instance, clustering label
  std::span<const int> drone_refined;   // per drone instance, satellite label space
};

struct IcelLoss {
  double total = 0.0;
  double dd = 0.0, ds = 0.0, ss = 0.0, sd = 0.0;
  Matrix grad_d;  // per drone query, batch-averaged
  Matrix grad_s;
  bool clamped = false;
};

// Four directional terms (drone->drone, drone->satellite, satellite->
// satellite, satellite->drone), each averaged over its batch and summed.
// `*_instances` hold the corpus index of each query so intra-view
// selections can exclude the query itself.
IcelLoss icel_total(const Matrix& drone_batch, std::span<const Index> drone_instances,
                    const Matrix& sat_batch, std::span<const Index> sat_instances,
                    const InstanceMemory& mem_d, const InstanceMemory& mem_s,
                    const IcelWeights& weights, const RefinedLinks* links = nullptr);

}  // namespace xview
