#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xview/clustering.hpp"
#include "xview/datagen.hpp"
#include "xview/dhml.hpp"
#include "xview/encoder.hpp"
#include "xview/icel.hpp"
#include "xview/memory.hpp"
#include "xview/ple.hpp"
#include "xview/retrieval.hpp"

namespace xview {

// Component sets for ablation runs. Each level includes the previous one.
enum class Ablation { kBaseline, kDhml, kIcel, kFull };

const char* to_string(Ablation a);
Ablation parse_ablation(const std::string& name);

struct Components {
  bool dhml = true;
  bool icel = true;
  bool ple = true;
};

Components components_for(Ablation a);

struct TrainConfig {
  EncoderDims dims;

  double alpha = 0.2;
  double lr = 0.001;
  double lr_decay = 1.0;  // multiplicative per epoch; 1 keeps the rate constant
  int epochs = 30;
  Index batch = 64;
  Index p_clusters = 16;
  Index z_instances = 4;
  Index iters_per_epoch = 40;
  Index replication = 50;

  double tau = 0.05;
  bool renormalize_memory = true;

  double lambda_cv = 1.0;
  double w_long = 0.5;
  double w_short = 0.5;
  LongTermRule long_term_rule = LongTermRule::kLiteral;

  double gamma = 0.8;
  Index k1 = 5;
  Index k2 = 20;
  double lambda_k1 = 1.0;
  double lambda_k2 = 1.0;

  double sigma = 0.01;
  Index ple_depth = 10;
  Index ple_keep = 5;
  Index ple_replication = 50;
  bool ple_symmetric = false;

  DbscanParams dbscan{0.4, 4};

  // Per-term multipliers on L_cv + L_dhml + L_icel.
  double coef_cv = 1.0;
  double coef_dhml = 1.0;
  double coef_icel = 1.0;

  Ablation ablation = Ablation::kFull;
  std::uint64_t seed = 1;

  Components components() const { return components_for(ablation); }
};

// Throws ErrorCode::kConfig on inconsistent settings (e.g. p * z != batch).
void validate(const TrainConfig& config);

struct ViewBatch {
  IndexList instances;  // corpus row per query
  IndexList clusters;   // pseudo-label per query
};

struct PkBatch {
  ViewBatch drone;
  ViewBatch satellite;
};

// p clusters per view without replacement, z members each (with replacement
// only when the cluster is smaller than z). Noise is never drawn.
ViewBatch pk_sample_view(const PseudoLabels& labels, Index p, Index z, Rng& rng);
PkBatch pk_sample(const PseudoLabels& drone, const PseudoLabels& satellite, Index p, Index z,
                  Rng& rng);

// Every memory the losses read during one epoch. Built from the epoch-start
// features and never carried over to the next epoch.
struct EpochMemories {
  ClusterMemory cluster_d;
  ClusterMemory cluster_s;
  DualMemory dual_d;
  DualMemory dual_s;
  InstanceMemory inst_d;
  InstanceMemory inst_s;
  std::vector<int> drone_labels;   // per drone instance
  std::vector<int> sat_labels;     // per satellite instance
  std::vector<int> sat_refined;    // refined satellite labels (drone label space)
  std::vector<int> drone_refined;  // symmetric refinement (satellite label space)
};

struct LossTerms {
  double cv = 0.0;
  double dhml = 0.0;
  double icel = 0.0;
  double total = 0.0;
};

struct TotalLoss {
  LossTerms terms;
  Matrix grad_d;  // d total / d drone query embeddings
  Matrix grad_s;
  bool clamped = false;
};

// L_total = coef_cv L_cv + coef_dhml L_dhml + coef_icel L_icel over query
// embeddings; memories are constants.
TotalLoss total_loss(const Matrix& drone_q, const ViewBatch& drone, const Matrix& sat_q,
                     const ViewBatch& satellite, const EpochMemories& memories,
                     const TrainConfig& config);

struct EncoderLoss {
  TotalLoss loss;
  EncoderGrads grads;
  Matrix drone_q;
  Matrix sat_q;
};

// Forward the batch rows through the encoder, evaluate total_loss and
// backpropagate into the shared parameters.
EncoderLoss encoder_loss(const EncoderParams& params, const TwoViewData& data,
                         const PkBatch& batch, const EpochMemories& memories,
                         const TrainConfig& config);

struct ViewScores {
  RetrievalScores drone_to_satellite;
  RetrievalScores satellite_to_drone;
};

// Has access to ground truth; training code never does.
class Evaluator {
 public:
  explicit Evaluator(const Corpus& corpus);

  ViewScores evaluate(const EncoderParams& params) const;
  ViewScores evaluate_embeddings(const Matrix& drone, const Matrix& satellite) const;
  double ple_agreement(std::span<const int> sat_refined, const PseudoLabels& drone_labels) const;

  struct SimilarityPairs {
    std::vector<double> positive;
    std::vector<double> negative;
  };
  SimilarityPairs cross_view_similarities(const EncoderParams& params) const;

 private:
  const Corpus& corpus_;
};

struct EpochRecord {
  int epoch = 0;
  Components enabled;
  LossTerms loss;  // means over the epoch's minibatches
  ClusterCounts clusters;
  std::size_t drone_noise = 0;
  std::size_t satellite_noise = 0;
  std::optional<double> ple_agreement;
  double beta_drone = 0.0;  // mean adaptive coefficient
  double beta_satellite = 0.0;
  bool icel_clamped = false;
  std::optional<ViewScores> scores;
  double wall_seconds = 0.0;
};

class Trainer {
 public:
  Trainer(const TwoViewData& data, const TrainConfig& config, EncoderParams params);

  // Extract, cluster, build memories, refine labels, train on minibatches,
  // then evaluate when an evaluator is given.
  EpochRecord run_epoch(const Evaluator* evaluator = nullptr);

  const EncoderParams& params() const { return params_; }
  const ClusterHistory& history() const { return history_; }
  const EpochMemories& last_memories() const { return memories_; }
  int epochs_run() const { return epoch_; }

 private:
  EpochMemories build_memories(const Matrix& drone_emb, const Matrix& sat_emb,
                               const PseudoLabels& drone_labels, const PseudoLabels& sat_labels);

  const TwoViewData& data_;
  TrainConfig config_;
  EncoderParams params_;
  Rng rng_;
  ClusterHistory history_;
  EpochMemories memories_;
  int epoch_ = 0;
  double lr_;
};

struct ClusteredViews {
  PseudoLabels drone;
  PseudoLabels satellite;  // per original satellite row
};

// Drone rows clustered directly, satellite rows clustered after replication.
ClusteredViews cluster_views(const Matrix& drone_emb, const Matrix& sat_emb,
                             const TrainConfig& config);

struct TrainingRun {
  std::optional<ViewScores> initial;  // untrained encoder; needs ground truth
  std::vector<EpochRecord> epochs;
  EncoderParams params;
};

// Initial weights come from a child stream of `config.seed`. The encoder
// input width is taken from the corpus. Evaluation runs only when the
// corpus carries ground truth.
TrainingRun train(const Corpus& corpus, TrainConfig config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// Epoch with the highest drone->satellite R@1; earliest wins ties.
std::optional<std::size_t> best_epoch(const std::vector<EpochRecord>& epochs);

}  // namespace xview
