#include <set>

#include "support.hpp"
#include "xview/train.hpp"

using namespace xview;

namespace {

PseudoLabels labels_of(std::vector<int> v) {
  PseudoLabels pl;
  pl.labels = std::move(v);
  for (int l : pl.labels) pl.num_clusters = std::max(pl.num_clusters, l + 1);
  return pl;
}

// Small corpus and settings that train in well under a second.
struct Small {
  Corpus corpus;
  TrainConfig config;
};

Small small_setup() {
  SyntheticSpec spec;
  spec.num_locations = 8;
  spec.drone_per_loc = 4;
  Small s{generate(spec), {}};
  s.config.dims.hidden = 24;
  s.config.dims.embed = 12;
  s.config.epochs = 2;
  s.config.p_clusters = 4;
  s.config.z_instances = 2;
  s.config.batch = 8;
  s.config.iters_per_epoch = 5;
  s.config.replication = 10;
  s.config.ple_replication = 10;
  s.config.k1 = 2;
  s.config.k2 = 5;
  s.config.tau = 0.3;
  s.config.lr = 0.3;
  s.config.gamma = 0.95;
  s.config.coef_icel = 0.01;
  s.config.dbscan = {0.15, 4};
  return s;
}

// Memories over random unit embeddings: 4 clusters per view, d = 8.
struct Fixture {
  TwoViewData data;
  EncoderParams params;
  EpochMemories mem;
  PkBatch batch;
};

Fixture make_fixture(Rng& rng) {
  Fixture f;
  const EncoderDims dims{5, 7, 8};
  f.data.drone = test::random_matrix(12, 5, rng);
  f.data.satellite = test::random_matrix(8, 5, rng);
  f.params = init_params(rng, dims);
  f.params.b1 = test::random_matrix(7, 1, rng, 0.1).col(0);
  f.params.b2 = test::random_matrix(8, 1, rng, 0.1).col(0);
  const Matrix ed = encode(f.params, f.data.drone);
  const Matrix es = encode(f.params, f.data.satellite);

  std::vector<int> dl, sl;
  for (int i = 0; i < 12; ++i) dl.push_back(i % 4);
  for (int i = 0; i < 8; ++i) sl.push_back(i % 4);
  const MemoryConfig mc{0.2, true};
  const DualMemoryConfig dc{0.2, 0.5, 0.5, LongTermRule::kLiteral};
  const Matrix cd = test::random_unit_rows(4, 8, rng);
  const Matrix cs = test::random_unit_rows(4, 8, rng);
  DualMemory dd = init_dual(cd, dc), ds = init_dual(cs, dc);
  dd.update_long_term(0, test::random_unit(8, rng));
  ds.update_long_term(2, test::random_unit(8, rng));
  dd.refresh_fused();
  ds.refresh_fused();
  f.mem = EpochMemories{init_memory(cd, View::kDrone, mc), init_memory(cs, View::kSatellite, mc),
                        dd, ds,
                        build_instance_memory(ed, View::kDrone), build_instance_memory(es, View::kSatellite),
                        dl, sl, {1, 0, 3, 3, 2, 1, 0, 2}, {}};
  f.batch.drone = {{0, 4, 1, 5, 2, 10}, {0, 0, 1, 1, 2, 2}};
  f.batch.satellite = {{0, 4, 1, 5, 3, 7}, {0, 0, 1, 1, 3, 3}};
  return f;
}

TrainConfig fixture_config(Ablation a) {
  TrainConfig c;
  c.dims = {5, 7, 8};
  c.tau = 0.3;
  c.gamma = 0.5;
  c.k1 = 2;
  c.k2 = 4;
  c.ablation = a;
  return c;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("pk_sample examples and invariants") {
  Rng rng(91);
  const PseudoLabels d = labels_of({0, 0, 1, 1, 1, kNoise, 2, 3, 3, 3, 3});
  const PseudoLabels s = labels_of({0, 1, 2, 3});

  const PkBatch one = pk_sample(d, s, 1, 1, rng);
  CHECK(one.drone.instances.size() == 1);
  CHECK(one.satellite.instances.size() == 1);

  for (int t = 0; t < 200; ++t) {
    const PkBatch b = pk_sample(d, s, 3, 2, rng);
    REQUIRE(b.drone.instances.size() == 6);
    std::set<Index> groups;
    for (std::size_t i = 0; i < 6; ++i) {
      const Index inst = b.drone.instances[i];
      CHECK(d.labels[static_cast<std::size_t>(inst)] != kNoise);
      CHECK(d.labels[static_cast<std::size_t>(inst)] == b.drone.clusters[i]);
      if (i % 2 == 0) groups.insert(b.drone.clusters[i]);
      else CHECK(b.drone.clusters[i] == b.drone.clusters[i - 1]);
    }
    CHECK(groups.size() == 3);
    // Clusters with at least z members are drawn without replacement.
    for (std::size_t g = 0; g < 6; g += 2)
      if (b.drone.clusters[g] != 2) CHECK(b.drone.instances[g] != b.drone.instances[g + 1]);
  }
  CHECK_THROWS_AS(pk_sample(d, s, 5, 1, rng), Error);
}

TEST_CASE("pk_sample selects clusters uniformly") {
  Rng rng(92);
  const PseudoLabels labels = labels_of({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  const int draws = 10000;
  std::vector<int> hits(10, 0);
  for (int t = 0; t < draws; ++t)
    for (Index c : pk_sample_view(labels, 3, 1, rng).clusters) ++hits[static_cast<std::size_t>(c)];
  // Each cluster is chosen with probability 3/10 per draw.
  const double p = 0.3, mean = draws * p, sd = std::sqrt(draws * p * (1 - p));
  for (int h : hits) CHECK(std::abs(h - mean) <= 3.0 * sd);
}

TEST_CASE("total_loss composition") {
  Rng rng(93);
  const Fixture f = make_fixture(rng);
  const Matrix qd = encode(f.params, f.data.drone.topRows(6));
  const Matrix qs = encode(f.params, f.data.satellite.topRows(6));

  const TotalLoss base = total_loss(qd, f.batch.drone, qs, f.batch.satellite, f.mem,
                                    fixture_config(Ablation::kBaseline));
  CHECK(base.terms.total == base.terms.cv);
  CHECK(base.terms.dhml == 0.0);
  CHECK(base.terms.icel == 0.0);

  TrainConfig no_lambda = fixture_config(Ablation::kDhml);
  no_lambda.lambda_cv = 0.0;
  const TotalLoss twice = total_loss(qd, f.batch.drone, qs, f.batch.satellite, f.mem, no_lambda);
  CHECK(twice.terms.total == doctest::Approx(2.0 * base.terms.cv).epsilon(1e-15));
  CHECK((twice.grad_d - 2.0 * base.grad_d).cwiseAbs().maxCoeff() <= 1e-15);

  const TotalLoss full = total_loss(qd, f.batch.drone, qs, f.batch.satellite, f.mem,
                                    fixture_config(Ablation::kFull));
  const TotalLoss icel = total_loss(qd, f.batch.drone, qs, f.batch.satellite, f.mem,
                                    fixture_config(Ablation::kIcel));
  CHECK(std::isfinite(full.terms.total));
  CHECK(full.terms.icel != icel.terms.icel);  // refined links widen omega
  CHECK(full.terms.total == doctest::Approx(full.terms.cv + full.terms.dhml + full.terms.icel));
}

TEST_CASE("full-loss encoder gradient matches finite differences") {
  for (Ablation a : {Ablation::kBaseline, Ablation::kDhml, Ablation::kIcel, Ablation::kFull}) {
    Rng rng(94);
    const Fixture f = make_fixture(rng);
    const TrainConfig cfg = fixture_config(a);
    const EncoderLoss el = encoder_loss(f.params, f.data, f.batch, f.mem, cfg);
    const EncoderDims dims = f.params.dims();
    const Vector numeric = test::numeric_gradient(
        [&](const Vector& x) {
          return encoder_loss(unflatten(x, dims), f.data, f.batch, f.mem, cfg).loss.terms.total;
        },
        flatten(f.params), 1e-6);
    CHECK(test::relative_error(flatten(el.grads), numeric) <= 1e-4);
  }
}

TEST_CASE("validate rejects inconsistent settings") {
  TrainConfig c;
  c.dims.input = 32;
  CHECK_NOTHROW(validate(c));
  c.batch = 60;
  try {
    validate(c);
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
  }
  c = TrainConfig{};
  c.dims.input = 32;
  c.alpha = 0.6;
  CHECK_THROWS_AS(validate(c), Error);
  c.long_term_rule = LongTermRule::kNormalized;
  CHECK_NOTHROW(validate(c));
  CHECK(parse_ablation("icel") == Ablation::kIcel);
  CHECK_THROWS_AS(parse_ablation("everything"), Error);
  CHECK_FALSE(components_for(Ablation::kBaseline).dhml);
  CHECK(components_for(Ablation::kFull).ple);
}

TEST_CASE("training is deterministic per seed") {
  const Small s = small_setup();
  const TrainingRun a = train(s.corpus, s.config);
  const TrainingRun b = train(s.corpus, s.config);
  REQUIRE(a.epochs.size() == 2);
  CHECK(flatten(a.params) == flatten(b.params));
  for (std::size_t e = 0; e < 2; ++e) {
    CHECK(a.epochs[e].loss.total == b.epochs[e].loss.total);
    CHECK(a.epochs[e].clusters == b.epochs[e].clusters);
    CHECK(a.epochs[e].scores->drone_to_satellite.ap == b.epochs[e].scores->drone_to_satellite.ap);
    CHECK(a.epochs[e].ple_agreement == b.epochs[e].ple_agreement);
    CHECK(std::isfinite(a.epochs[e].loss.total));
  }
  TrainConfig other = s.config;
  other.seed = 2;
  CHECK(flatten(train(s.corpus, other).params) != flatten(a.params));
}

TEST_CASE("zero learning rate leaves the metrics unchanged") {
  Small s = small_setup();
  s.config.lr = 0.0;
  const TrainingRun run = train(s.corpus, s.config);
  REQUIRE(run.initial.has_value());
  for (const EpochRecord& r : run.epochs) {
    CHECK(r.scores->drone_to_satellite.r1 == run.initial->drone_to_satellite.r1);
    CHECK(r.scores->satellite_to_drone.ap == run.initial->satellite_to_drone.ap);
  }
}

TEST_CASE("ablations toggle components and clustering failure aborts") {
  Small s = small_setup();
  s.config.epochs = 1;
  s.config.ablation = Ablation::kBaseline;
  const TrainingRun base = train(s.corpus, s.config);
  CHECK_FALSE(base.epochs[0].enabled.dhml);
  CHECK(base.epochs[0].loss.dhml == 0.0);
  CHECK_FALSE(base.epochs[0].ple_agreement.has_value());

  s.config.dbscan.eps = 1e-12;
  try {
    train(s.corpus, s.config);
    FAIL("expected a clustering failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerate);
  }
}

TEST_CASE("unlabeled corpora train without evaluation") {
  const Small s = small_setup();
  const Corpus bare(s.corpus.views(), std::nullopt);
  const TrainingRun run = train(bare, s.config);
  CHECK_FALSE(run.initial.has_value());
  CHECK_FALSE(run.epochs[0].scores.has_value());
  CHECK_FALSE(best_epoch(run.epochs).has_value());
}

TEST_CASE("best_epoch picks the highest R@1, earliest on ties") {
  std::vector<EpochRecord> recs(4);
  const double r1[] = {0.2, 0.5, 0.5, 0.4};
  for (std::size_t i = 0; i < 4; ++i) {
    ViewScores v;
    v.drone_to_satellite.r1 = r1[i];
    recs[i].scores = v;
  }
  CHECK(best_epoch(recs) == std::optional<std::size_t>(1));
  CHECK_FALSE(best_epoch({}).has_value());
}

}  // TEST_SUITE
