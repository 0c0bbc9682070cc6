#include "xview/train.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace xview {

const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::kBaseline: return "baseline";
    case Ablation::kDhml: return "dhml";
    case Ablation::kIcel: return "icel";
    case Ablation::kFull: return "full";
  }
  return "full";
}

Ablation parse_ablation(const std::string& name) {
  if (name == "baseline") return Ablation::kBaseline;
  if (name == "dhml") return Ablation::kDhml;
  if (name == "icel") return Ablation::kIcel;
  if (name == "full") return Ablation::kFull;
  fail(ErrorCode::kConfig, "unknown ablation '" + name + "' (baseline|dhml|icel|full)");
}

Components components_for(Ablation a) {
  switch (a) {
    case Ablation::kBaseline: return {false, false, false};
    case Ablation::kDhml: return {true, false, false};
    case Ablation::kIcel: return {true, true, false};
    case Ablation::kFull: return {true, true, true};
  }
  return {};
}

void validate(const TrainConfig& c) {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::kConfig, what);
  };
  check(c.dims.input > 0 && c.dims.hidden > 0 && c.dims.embed > 0, "encoder dims must be positive");
  check(c.alpha >= 0.0 && c.alpha <= 1.0, "alpha must lie in [0, 1]");
  check(c.lr >= 0.0, "lr must be non-negative");
  check(c.lr_decay > 0.0, "lr_decay must be positive");
  check(c.epochs >= 0, "epochs must be non-negative");
  check(c.p_clusters >= 1 && c.z_instances >= 1, "p and z must be positive");
  check(c.p_clusters * c.z_instances == c.batch, "p * z must equal batch");
  check(c.iters_per_epoch >= 1, "iters_per_epoch must be positive");
  check(c.replication >= 1, "replication must be >= 1");
  check(c.tau > 0.0, "tau must be positive");
  check(c.lambda_cv >= 0.0, "lambda_cv must be non-negative");
  check(c.w_long >= 0.0 && c.w_short >= 0.0 && c.w_long + c.w_short > 0.0,
        "fusion weights must be non-negative and not both zero");
  if (c.long_term_rule == LongTermRule::kLiteral)
    check(c.alpha < 0.5, "the literal long-term rule needs alpha < 0.5");
  check(c.gamma > 0.0 && c.gamma < 1.0, "gamma must lie in (0, 1)");
  check(c.k1 >= 1 && c.k1 <= c.k2, "need 1 <= k1 <= k2");
  check(c.lambda_k1 >= 0.0 && c.lambda_k2 >= 0.0, "icel weights must be non-negative");
  check(c.sigma >= 0.0, "sigma must be non-negative");
  check(c.ple_depth >= 1 && c.ple_keep >= 1 && c.ple_replication >= 1,
        "ple depth, keep and replication must be positive");
  check(c.dbscan.eps > 0.0 && c.dbscan.min_pts >= 1, "dbscan eps must be positive, min_pts >= 1");
}

ViewBatch pk_sample_view(const PseudoLabels& labels, Index p, Index z, Rng& rng) {
  require(p >= 1 && z >= 1, ErrorCode::kInvalidArgument, "pk_sample: p and z must be positive");
  const auto members = labels.members();
  if (static_cast<Index>(members.size()) < p)
    fail(ErrorCode::kInvalidArgument, "pk_sample: fewer clusters than p");

  IndexList ids(members.size());
  std::iota(ids.begin(), ids.end(), Index{0});
  for (Index i = 0; i < p; ++i) {
    const auto j = static_cast<std::size_t>(i) +
                   static_cast<std::size_t>(rng.below(ids.size() - static_cast<std::size_t>(i)));
    std::swap(ids[static_cast<std::size_t>(i)], ids[j]);
  }

  ViewBatch out;
  for (Index i = 0; i < p; ++i) {
    const Index cluster = ids[static_cast<std::size_t>(i)];
    IndexList pool = members[static_cast<std::size_t>(cluster)];
    const bool with_replacement = static_cast<Index>(pool.size()) < z;
    for (Index t = 0; t < z; ++t) {
      Index pick;
      if (with_replacement) {
        pick = pool[static_cast<std::size_t>(rng.below(pool.size()))];
      } else {
        const auto j = static_cast<std::size_t>(t) +
                       static_cast<std::size_t>(rng.below(pool.size() - static_cast<std::size_t>(t)));
        std::swap(pool[static_cast<std::size_t>(t)], pool[j]);
        pick = pool[static_cast<std::size_t>(t)];
      }
      out.instances.push_back(pick);
      out.clusters.push_back(cluster);
    }
  }
  return out;
}

PkBatch pk_sample(const PseudoLabels& drone, const PseudoLabels& satellite, Index p, Index z,
                  Rng& rng) {
  PkBatch out;
  out.drone = pk_sample_view(drone, p, z, rng);
  out.satellite = pk_sample_view(satellite, p, z, rng);
  return out;
}

TotalLoss total_loss(const Matrix& drone_q, const ViewBatch& drone, const Matrix& sat_q,
                     const ViewBatch& satellite, const EpochMemories& mem,
                     const TrainConfig& config) {
  const Components comp = config.components();
  TotalLoss out;

  const CrossViewLoss cv = batch_loss_cv(drone_q, drone.clusters, sat_q, satellite.clusters,
                                         mem.cluster_d, mem.cluster_s, config.tau);
  out.terms.cv = cv.total;
  out.grad_d = config.coef_cv * cv.drone.grad;
  out.grad_s = config.coef_cv * cv.satellite.grad;

  if (comp.dhml) {
    const BatchLoss d = batch_loss_dhml(drone_q, drone.clusters, mem.dual_d, config.tau,
                                        config.lambda_cv, cv.drone);
    const BatchLoss s = batch_loss_dhml(sat_q, satellite.clusters, mem.dual_s, config.tau,
                                        config.lambda_cv, cv.satellite);
    out.terms.dhml = d.loss + s.loss;
    out.grad_d += config.coef_dhml * d.grad;
    out.grad_s += config.coef_dhml * s.grad;
  }

  if (comp.icel) {
    IcelWeights w;
    w.lambda_k1 = config.lambda_k1;
    w.lambda_k2 = config.lambda_k2;
    w.gamma = config.gamma;
    w.tau = config.tau;
    w.k1 = config.k1;
    w.k2 = config.k2;
    RefinedLinks links;
    const bool linked = comp.ple && !mem.sat_refined.empty();
    if (linked) {
      links.drone_labels = mem.drone_labels;
      links.sat_refined = mem.sat_refined;
      if (!mem.drone_refined.empty()) {
        links.sat_labels = mem.sat_labels;
        links.drone_refined = mem.drone_refined;
      }
    }
    const IcelLoss icel = icel_total(drone_q, drone.instances, sat_q, satellite.instances,
                                     mem.inst_d, mem.inst_s, w, linked ? &links : nullptr);
    out.terms.icel = icel.total;
    out.grad_d += config.coef_icel * icel.grad_d;
    out.grad_s += config.coef_icel * icel.grad_s;
    out.clamped = icel.clamped;
  }

  out.terms.total = config.coef_cv * out.terms.cv + config.coef_dhml * out.terms.dhml +
                    config.coef_icel * out.terms.icel;
  return out;
}

namespace {

Matrix gather_rows(const Matrix& m, const IndexList& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace

EncoderLoss encoder_loss(const EncoderParams& params, const TwoViewData& data,
                         const PkBatch& batch, const EpochMemories& memories,
                         const TrainConfig& config) {
  const Encoded d = forward(params, gather_rows(data.drone, batch.drone.instances));
  const Encoded s = forward(params, gather_rows(data.satellite, batch.satellite.instances));
  EncoderLoss out;
  out.loss = total_loss(d.embedding, batch.drone, s.embedding, batch.satellite, memories, config);
  out.grads = backward(params, d.tape, out.loss.grad_d);
  out.grads += backward(params, s.tape, out.loss.grad_s);
  out.drone_q = d.embedding;
  out.sat_q = s.embedding;
  return out;
}

Evaluator::Evaluator(const Corpus& corpus) : corpus_(corpus) {
  (void)corpus_.ground_truth_for_evaluation();
}

ViewScores Evaluator::evaluate_embeddings(const Matrix& drone, const Matrix& satellite) const {
  const GroundTruth& gt = corpus_.ground_truth_for_evaluation();
  ViewScores out;
  out.drone_to_satellite = evaluate_retrieval(drone, satellite, gt.drone, gt.satellite);
  out.satellite_to_drone = evaluate_retrieval(satellite, drone, gt.satellite, gt.drone);
  return out;
}

ViewScores Evaluator::evaluate(const EncoderParams& params) const {
  return evaluate_embeddings(encode(params, corpus_.views().drone),
                             encode(params, corpus_.views().satellite));
}

double Evaluator::ple_agreement(std::span<const int> sat_refined,
                                const PseudoLabels& drone_labels) const {
  const GroundTruth& gt = corpus_.ground_truth_for_evaluation();
  return xview::ple_agreement(sat_refined, drone_labels, gt.drone, gt.satellite);
}

Evaluator::SimilarityPairs Evaluator::cross_view_similarities(const EncoderParams& params) const {
  const GroundTruth& gt = corpus_.ground_truth_for_evaluation();
  const Matrix sims = pairwise_sim(encode(params, corpus_.views().drone),
                                   encode(params, corpus_.views().satellite));
  SimilarityPairs out;
  for (Index i = 0; i < sims.rows(); ++i)
    for (Index j = 0; j < sims.cols(); ++j)
      (gt.drone[static_cast<std::size_t>(i)] == gt.satellite[static_cast<std::size_t>(j)]
           ? out.positive
           : out.negative)
          .push_back(sims(i, j));
  return out;
}

ClusteredViews cluster_views(const Matrix& drone_emb, const Matrix& sat_emb,
                             const TrainConfig& config) {
  ClusteredViews out;
  out.drone = dbscan(drone_emb, config.dbscan);
  const Replicated rep = replicate_features(sat_emb, config.replication);
  out.satellite = collapse_replicas(dbscan(rep.features, config.dbscan), sat_emb.rows(),
                                    config.replication);
  return out;
}

Trainer::Trainer(const TwoViewData& data, const TrainConfig& config, EncoderParams params)
    : data_(data), config_(config), params_(std::move(params)), rng_(config.seed), lr_(config.lr) {
  validate(config_);
  require(params_.dims().input == data_.drone.cols() && data_.drone.cols() == data_.satellite.cols(),
          ErrorCode::kShapeMismatch, "trainer: encoder input does not match corpus dimension");
}

EpochMemories Trainer::build_memories(const Matrix& drone_emb, const Matrix& sat_emb,
                                      const PseudoLabels& drone_labels,
                                      const PseudoLabels& sat_labels) {
  const MemoryConfig mc{config_.alpha, config_.renormalize_memory};
  const DualMemoryConfig dc{config_.alpha, config_.w_long, config_.w_short, config_.long_term_rule};
  const Matrix cd = compute_centroids(drone_emb, drone_labels);
  const Matrix cs = compute_centroids(sat_emb, sat_labels);
  return EpochMemories{
      init_memory(cd, View::kDrone, mc),
      init_memory(cs, View::kSatellite, mc),
      init_dual(cd, dc),
      init_dual(cs, dc),
      build_instance_memory(drone_emb, View::kDrone),
      build_instance_memory(sat_emb, View::kSatellite),
      drone_labels.labels,
      sat_labels.labels,
      {},
      {},
  };
}

EpochRecord Trainer::run_epoch(const Evaluator* evaluator) {
  const auto start = std::chrono::steady_clock::now();
  const Components comp = config_.components();
  EpochRecord rec;
  rec.epoch = ++epoch_;
  rec.enabled = comp;

  // (1) features with the current weights
  const Matrix drone_emb = encode(params_, data_.drone);
  const Matrix sat_emb = encode(params_, data_.satellite);

  // (2) pseudo-labels
  const ClusteredViews clusters = cluster_views(drone_emb, sat_emb, config_);
  if (clusters.drone.num_clusters == 0 || clusters.satellite.num_clusters == 0)
    fail(ErrorCode::kDegenerate,
         "epoch " + std::to_string(rec.epoch) + ": clustering produced no clusters (drone " +
             std::to_string(clusters.drone.num_clusters) + ", satellite " +
             std::to_string(clusters.satellite.num_clusters) + "); try a larger dbscan eps");
  history_.record(clusters.drone, clusters.satellite);
  rec.clusters = history_.epochs().back();
  rec.drone_noise = clusters.drone.noise_count();
  rec.satellite_noise = clusters.satellite.noise_count();

  // (3) memories
  memories_ = build_memories(drone_emb, sat_emb, clusters.drone, clusters.satellite);

  // (4) refined cross-view labels
  if (comp.ple) {
    PerturbConfig pc{config_.sigma, config_.ple_depth, config_.ple_keep, config_.ple_replication};
    Rng ple_rng = rng_.split();
    memories_.sat_refined = run_ple(sat_emb, drone_emb, clusters.drone, pc, ple_rng).refined;
    if (config_.ple_symmetric) {
      PerturbConfig rev = pc;
      rev.replication = 1;
      memories_.drone_refined =
          refine_cross_view_labels(drone_emb, sat_emb, clusters.satellite, rev, ple_rng).refined;
    }
    if (evaluator != nullptr)
      rec.ple_agreement = evaluator->ple_agreement(memories_.sat_refined, clusters.drone);
  }

  // (5) minibatches
  const Index p_d = std::min<Index>(config_.p_clusters, clusters.drone.num_clusters);
  const Index p_s = std::min<Index>(config_.p_clusters, clusters.satellite.num_clusters);
  LossTerms sums;
  double beta_d = 0.0, beta_s = 0.0;
  for (Index it = 0; it < config_.iters_per_epoch; ++it) {
    PkBatch batch;
    batch.drone = pk_sample_view(clusters.drone, p_d, config_.z_instances, rng_);
    batch.satellite = pk_sample_view(clusters.satellite, p_s, config_.z_instances, rng_);

    const EncoderLoss el = encoder_loss(params_, data_, batch, memories_, config_);
    const LossTerms& t = el.loss.terms;
    if (!std::isfinite(t.total))
      fail(ErrorCode::kNumeric, "epoch " + std::to_string(rec.epoch) + ": non-finite loss");
    rec.icel_clamped = rec.icel_clamped || el.loss.clamped;

    params_ = sgd_step(params_, el.grads, lr_);

    memories_.cluster_d.update_batch(el.drone_q, batch.drone.clusters);
    memories_.cluster_s.update_batch(el.sat_q, batch.satellite.clusters);
    if (comp.dhml) {
      beta_d += memories_.dual_d.update_batch(el.drone_q, batch.drone.clusters);
      beta_s += memories_.dual_s.update_batch(el.sat_q, batch.satellite.clusters);
    }
    sums.cv += t.cv;
    sums.dhml += t.dhml;
    sums.icel += t.icel;
    sums.total += t.total;
  }
  const double inv = 1.0 / static_cast<double>(config_.iters_per_epoch);
  rec.loss = {sums.cv * inv, sums.dhml * inv, sums.icel * inv, sums.total * inv};
  rec.beta_drone = beta_d * inv;
  rec.beta_satellite = beta_s * inv;
  lr_ *= config_.lr_decay;

  // (6) evaluation
  if (evaluator != nullptr) rec.scores = evaluator->evaluate(params_);
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

TrainingRun train(const Corpus& corpus, TrainConfig config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.dims.input = corpus.views().drone.cols();
  validate(config);
  Rng init_rng = Rng(config.seed).split();
  TrainingRun run;
  run.params = init_params(init_rng, config.dims);

  std::optional<Evaluator> evaluator;
  if (corpus.has_ground_truth()) {
    evaluator.emplace(corpus);
    run.initial = evaluator->evaluate(run.params);
  }
  Trainer trainer(corpus.views(), config, run.params);
  for (int e = 0; e < config.epochs; ++e) {
    run.epochs.push_back(trainer.run_epoch(evaluator ? &*evaluator : nullptr));
    if (on_epoch) on_epoch(run.epochs.back());
  }
  run.params = trainer.params();
  return run;
}

std::optional<std::size_t> best_epoch(const std::vector<EpochRecord>& epochs) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    if (!epochs[i].scores) continue;
    if (!best || epochs[i].scores->drone_to_satellite.r1 >
                     epochs[*best].scores->drone_to_satellite.r1)
      best = i;
  }
  return best;
}

}  // namespace xview
