#include "xview/icel.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <map>
#include <vector>

namespace xview {

namespace {

constexpr double kMinusInf = -std::numeric_limits<double>::infinity();

Vector masked_sims(const Eigen::Ref<const Vector>& q, const InstanceMemory& mem, Index exclude) {
  require(mem.size() > 0, ErrorCode::kInvalidArgument, "instance memory is empty");
  Vector s = unit_sims(q, mem.features);
  if (exclude != kNoExclusion) {
    require(exclude >= 0 && exclude < mem.size(), ErrorCode::kInvalidArgument,
            "excluded index out of range");
    s(exclude) = kMinusInf;
  }
  return s;
}

Index candidates(const InstanceMemory& mem, Index exclude) {
  return mem.size() - (exclude == kNoExclusion ? 0 : 1);
}

IndexList omega_from_sims(const Vector& s, double gamma) {
  require(gamma > 0.0 && gamma < 1.0, ErrorCode::kInvalidArgument,
          "threshold neighborhood: gamma must lie in (0, 1)");
  IndexList out;
  const double m = s.maxCoeff();
  if (m == kMinusInf) return out;
  const double threshold = gamma * m;
  for (Index v = 0; v < s.size(); ++v)
    if (s(v) > threshold) out.push_back(v);
  return out;
}

Vector gather(const Vector& s, std::span<const Index> idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = s(idx[i]);
  return out;
}

// Gradient in q of a loss whose derivative in the selected similarities is
// `d_sims` (one entry per selected row).
Vector project_back(const InstanceMemory& mem, std::span<const Index> idx, const Vector& d_sims) {
  Vector g = Vector::Zero(mem.features.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    g += d_sims(static_cast<Index>(i)) * mem.features.row(idx[i]).transpose();
  return g;
}

// sum p log p over softmax(sims) and its derivative in sims.
struct NegEntropy {
  double value;
  Vector d_sims;
};

NegEntropy neg_entropy(const Vector& sims) {
  const Vector p = softmax(sims);
  const Vector logp = sims.array() - log_sum_exp(sims);
  const double h = p.dot(logp);
  NegEntropy out;
  out.value = h;
  out.d_sims = (p.array() * (logp.array() - h)).matrix();
  return out;
}

}  // namespace

InstanceMemory build_instance_memory(const Matrix& embeddings, View view) {
  require(embeddings.rows() > 0, ErrorCode::kInvalidArgument, "instance memory: empty set");
  return InstanceMemory{embeddings, view};
}

IndexList threshold_neighborhood(const Eigen::Ref<const Vector>& q, const InstanceMemory& mem,
                                 double gamma, Index exclude) {
  return omega_from_sims(masked_sims(q, mem, exclude), gamma);
}

TopKPair topk_neighborhoods(const Eigen::Ref<const Vector>& q, const InstanceMemory& mem,
                            Index k1, Index k2, Index exclude) {
  const Vector s = masked_sims(q, mem, exclude);
  require(k1 >= 1 && k1 <= k2 && k2 <= candidates(mem, exclude), ErrorCode::kInvalidArgument,
          "topk_neighborhoods: need 1 <= k1 <= k2 <= candidates");
  TopKPair out;
  out.nk2 = top_k_indices(s, k2);
  out.nk1.assign(out.nk2.begin(), out.nk2.begin() + k1);
  return out;
}

LossGrad loss_omega(const Eigen::Ref<const Vector>& q, const InstanceMemory& mem,
                    std::span<const Index> omega, double tau) {
  require(tau > 0.0, ErrorCode::kInvalidArgument, "loss_omega: tau must be positive");
  LossGrad out;
  out.grad = Vector::Zero(q.size());
  if (omega.empty()) return out;
  const Vector logits = gather(unit_sims(q, mem.features), omega) / tau;
  const double n = static_cast<double>(omega.size());
  out.loss = n * log_sum_exp(logits) - logits.sum();
  const Vector d_logits = (n * softmax(logits)).array() - 1.0;
  out.grad = project_back(mem, omega, d_logits / tau);
  return out;
}

LossGrad loss_consistency_k2(const Eigen::Ref<const Vector>& q, const InstanceMemory& mem,
                             std::span<const Index> nk2) {
  require(!nk2.empty(), ErrorCode::kInvalidArgument, "loss_consistency_k2: k2 must be >= 1");
  const NegEntropy ne = neg_entropy(gather(unit_sims(q, mem.features), nk2));
  LossGrad out;
  out.loss = ne.value + std::log(static_cast<double>(nk2.size()));
  out.grad = project_back(mem, nk2, ne.d_sims);
  return out;
}

LossGrad loss_mutual_info_k1(const Eigen::Ref<const Vector>& q, const InstanceMemory& mem,
                             std::span<const Index> nk1) {
  require(!nk1.empty(), ErrorCode::kInvalidArgument, "loss_mutual_info_k1: k1 must be >= 1");
  const NegEntropy ne = neg_entropy(gather(unit_sims(q, mem.features), nk1));
  LossGrad out;
  out.loss = -(ne.value + std::log(static_cast<double>(nk1.size())));
  out.grad = -project_back(mem, nk1, ne.d_sims);
  return out;
}

NeighborhoodSet select_neighborhoods(const Eigen::Ref<const Vector>& q,
                                     const InstanceMemory& mem, const IcelWeights& w,
                                     Index exclude) {
  require(w.k1 >= 1 && w.k1 <= w.k2, ErrorCode::kConfig, "icel: need 1 <= k1 <= k2");
  const Vector s = masked_sims(q, mem, exclude);
  const Index avail = candidates(mem, exclude);
  require(avail >= 1, ErrorCode::kInvalidArgument, "icel: no neighbor candidates");
  NeighborhoodSet out;
  Index k2 = w.k2;
  if (k2 > avail) {
    k2 = avail;
    out.clamped = true;
  }
  const Index k1 = std::min(w.k1, k2);
  out.omega = omega_from_sims(s, w.gamma);
  out.nk2 = top_k_indices(s, k2);
  out.nk1.assign(out.nk2.begin(), out.nk2.begin() + k1);
  return out;
}

DirectionalTerm directional_loss(const Eigen::Ref<const Vector>& q, const InstanceMemory& mem,
                                 const NeighborhoodSet& sets, const IcelWeights& w) {
  const LossGrad lo = loss_omega(q, mem, sets.omega, w.tau);
  const LossGrad l1 = loss_mutual_info_k1(q, mem, sets.nk1);
  const LossGrad l2 = loss_consistency_k2(q, mem, sets.nk2);
  DirectionalTerm out;
  out.omega = lo.loss;
  out.k1 = l1.loss;
  out.k2 = l2.loss;
  out.total = lo.loss + w.lambda_k1 * l1.loss + w.lambda_k2 * l2.loss;
  out.grad = lo.grad + w.lambda_k1 * l1.grad + w.lambda_k2 * l2.grad;
  return out;
}

namespace {

// Members of each label, ascending.
std::map<int, IndexList> group_by_label(std::span<const int> labels) {
  std::map<int, IndexList> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) out[labels[i]].push_back(static_cast<Index>(i));
  return out;
}

void merge_into(IndexList& omega, const IndexList& extra) {
  IndexList merged;
  merged.reserve(omega.size() + extra.size());
  std::set_union(omega.begin(), omega.end(), extra.begin(), extra.end(),
                 std::back_inserter(merged));
  omega = std::move(merged);
}

struct ViewPass {
  double intra = 0.0;
  double cross = 0.0;
  Matrix grad;
  bool clamped = false;
};

// Query label per instance, and the other view's instances grouped by the
// same label space.
struct Link {
  std::span<const int> query_labels;
  std::map<int, IndexList> other_by_label;
};

ViewPass run_view(const Matrix& batch, std::span<const Index> instances,
                  const InstanceMemory& same, const InstanceMemory& other,
                  const IcelWeights& w, const std::vector<Link>& links) {
  require(static_cast<Index>(instances.size()) == batch.rows(), ErrorCode::kShapeMismatch,
          "icel: instance index count mismatch");
  require(batch.rows() > 0, ErrorCode::kInvalidArgument, "icel: empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.rows());
  ViewPass out;
  out.grad.resize(batch.rows(), batch.cols());
  for (Index i = 0; i < batch.rows(); ++i) {
    const Vector q = batch.row(i).transpose();
    const Index self = instances[static_cast<std::size_t>(i)];

    const NeighborhoodSet intra_sets = select_neighborhoods(q, same, w, self);
    NeighborhoodSet cross_sets = select_neighborhoods(q, other, w, kNoExclusion);
    for (const Link& link : links) {
      const int label = link.query_labels[static_cast<std::size_t>(self)];
      if (auto it = link.other_by_label.find(label); label >= 0 && it != link.other_by_label.end())
        merge_into(cross_sets.omega, it->second);
    }
    const DirectionalTerm intra = directional_loss(q, same, intra_sets, w);
    const DirectionalTerm cross = directional_loss(q, other, cross_sets, w);
    out.intra += intra.total * inv_b;
    out.cross += cross.total * inv_b;
    out.grad.row(i) = (intra.grad + cross.grad).transpose() * inv_b;
    out.clamped = out.clamped || intra_sets.clamped || cross_sets.clamped;
  }
  return out;
}

}  // namespace

IcelLoss icel_total(const Matrix& drone_batch, std::span<const Index> drone_instances,
                    const Matrix& sat_batch, std::span<const Index> sat_instances,
                    const InstanceMemory& mem_d, const InstanceMemory& mem_s,
                    const IcelWeights& weights, const RefinedLinks* links) {
  std::vector<Link> drone_links;
  std::vector<Link> sat_links;
  if (links != nullptr) {
    auto sized = [](std::span<const int> v, const InstanceMemory& m) {
      return static_cast<Index>(v.size()) == m.size();
    };
    require(sized(links->drone_labels, mem_d) && sized(links->sat_refined, mem_s),
            ErrorCode::kShapeMismatch, "icel: refined link sizes do not match memories");
    drone_links.push_back({links->drone_labels, group_by_label(links->sat_refined)});
    sat_links.push_back({links->sat_refined, group_by_label(links->drone_labels)});
    if (!links->drone_refined.empty()) {
      require(sized(links->drone_refined, mem_d) && sized(links->sat_labels, mem_s),
              ErrorCode::kShapeMismatch, "icel: reverse link sizes do not match memories");
      drone_links.push_back({links->drone_refined, group_by_label(links->sat_labels)});
      sat_links.push_back({links->sat_labels, group_by_label(links->drone_refined)});
    }
  }
  const ViewPass d = run_view(drone_batch, drone_instances, mem_d, mem_s, weights, drone_links);
  const ViewPass s = run_view(sat_batch, sat_instances, mem_s, mem_d, weights, sat_links);
  IcelLoss out;
  out.dd = d.intra;
  out.ds = d.cross;
  out.ss = s.intra;
  out.sd = s.cross;
  out.total = (out.dd + out.ds) + (out.ss + out.sd);
  out.grad_d = d.grad;
  out.grad_s = s.grad;
  out.clamped = d.clamped || s.clamped;
  return out;
}

}  // namespace xview
