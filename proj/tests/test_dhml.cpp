#include "support.hpp"
#include "xview/dhml.hpp"

using namespace xview;

namespace {

Matrix rows2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

void check_unit_rows(const Matrix& m) {
  for (Index k = 0; k < m.rows(); ++k) CHECK(std::abs(m.row(k).norm() - 1.0) <= 1e-12);
}

}  // namespace

TEST_SUITE("dhml") {

TEST_CASE("init_dual copies centroids into both banks") {
  Rng rng(41);
  const Matrix c = test::random_unit_rows(4, 3, rng);
  const DualMemory dm = init_dual(c, {});
  CHECK(dm.short_term() == c);
  CHECK(dm.long_term() == c);
  CHECK(max_abs(dm.fused() - c) <= 1e-15);
  CHECK(init_dual(c, {}).fused() == dm.fused());
  CHECK_THROWS_AS(init_dual(Matrix(0, 3), {}), Error);
}

TEST_CASE("long-term update examples") {
  DualMemory dm(rows2(1, 0, 0, 1), {});
  dm.update_long_term(0, vec2(0, 1));
  CHECK(dm.long_term()(0, 0) == doctest::Approx(0.83205029).epsilon(1e-8));
  CHECK(dm.long_term()(0, 1) == doctest::Approx(0.55470020).epsilon(1e-8));

  DualMemoryConfig normalized;
  normalized.rule = LongTermRule::kNormalized;
  DualMemory dn(rows2(1, 0, 0, 1), normalized);
  dn.update_long_term(0, vec2(0, 1));
  CHECK(max_abs(dn.long_term() - dm.long_term()) <= 1e-15);

  DualMemory same(rows2(0.6, 0.8, 0, 1), {});
  same.update_long_term(0, vec2(0.6, 0.8));
  CHECK(max_abs(same.long_term().row(0) - rows2(0.6, 0.8, 0, 1).row(0)) <= 1e-15);

  DualMemoryConfig zero;
  zero.alpha = 0.0;
  DualMemory frozen(rows2(0.6, 0.8, 0, 1), zero);
  frozen.update_long_term(0, vec2(1, 0));
  CHECK(max_abs(frozen.long_term() - rows2(0.6, 0.8, 0, 1)) <= 1e-15);
}

TEST_CASE("alpha at or above one half is rejected under the literal rule") {
  DualMemoryConfig cfg;
  cfg.alpha = 0.5;
  try {
    DualMemory dm(rows2(1, 0, 0, 1), cfg);
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
  }
  cfg.rule = LongTermRule::kNormalized;
  CHECK_NOTHROW(DualMemory(rows2(1, 0, 0, 1), cfg));
}

TEST_CASE("compute_beta") {
  const DualMemory dm(rows2(1, 0, 0, 1), {});
  const IndexList ids{0, 1};
  CHECK(dm.compute_beta(rows2(1, 0, 0, 1), ids) == 0.5);

  // Distances ln3 + d and ln3 - d average to ln 3.
  const double l3 = std::log(3.0);
  Matrix q(2, 2);
  q << 1 + l3 + 0.1, 0, 0, 1 + l3 - 0.1;
  CHECK(dm.compute_beta(q, ids) == doctest::Approx(0.75).epsilon(1e-14));

  Matrix farther = q;
  farther(1, 1) += 0.2;
  CHECK(dm.compute_beta(farther, ids) > dm.compute_beta(q, ids));

  Matrix swapped(2, 2);
  swapped.row(0) = q.row(1);
  swapped.row(1) = q.row(0);
  CHECK(dm.compute_beta(swapped, IndexList{1, 0}) == doctest::Approx(dm.compute_beta(q, ids)).epsilon(1e-15));
  CHECK_THROWS_AS(dm.compute_beta(Matrix(0, 2), IndexList{}), Error);
}

TEST_CASE("update_short_term and refresh_fused") {
  DualMemory dm(rows2(1, 0, 0, 1), {});
  dm.update_long_term(0, vec2(0, 1));
  const Matrix before = dm.short_term();
  const IndexList first{0};
  dm.update_short_term(0.0, first);
  CHECK(dm.short_term() == before);
  dm.update_short_term(1.0, first);
  CHECK(max_abs(dm.short_term().row(0) - dm.long_term().row(0)) <= 1e-15);
  CHECK(dm.short_term().row(1) == before.row(1));

  DualMemory fixed(rows2(1, 0, 0, 1), {});
  fixed.update_short_term(0.37, IndexList{0, 1});
  CHECK(max_abs(fixed.short_term() - rows2(1, 0, 0, 1)) <= 1e-15);

  DualMemoryConfig only_long;
  only_long.w_long = 1.0;
  only_long.w_short = 0.0;
  DualMemory lone(rows2(1, 0, 0, 1), only_long);
  lone.update_long_term(0, vec2(0, 1));
  lone.refresh_fused();
  CHECK(max_abs(lone.fused() - lone.long_term()) <= 1e-15);

  DualMemoryConfig zero_w;
  zero_w.w_long = 0.0;
  zero_w.w_short = 0.0;
  CHECK_THROWS_AS(DualMemory(rows2(1, 0, 0, 1), zero_w), Error);
}

TEST_CASE("fused bank of orthogonal long and short rows") {
  // The normalized rule with alpha = 0.5 replaces long by q, leaving
  // long = (1,0) and short = (0,1).
  DualMemoryConfig cfg;
  cfg.alpha = 0.5;
  cfg.rule = LongTermRule::kNormalized;
  DualMemory dm(rows2(0, 1, 0, 1), cfg);
  dm.update_long_term(0, vec2(1, 0));
  REQUIRE(max_abs(dm.long_term().row(0) - rows2(1, 0, 0, 0).row(0)) <= 1e-15);
  dm.refresh_fused();
  CHECK(dm.fused()(0, 0) == doctest::Approx(0.70710678).epsilon(1e-8));
  CHECK(dm.fused()(0, 1) == doctest::Approx(0.70710678).epsilon(1e-8));
  check_unit_rows(dm.fused());
}

TEST_CASE("update_batch ordering and invariants") {
  Rng rng(42);
  for (LongTermRule rule : {LongTermRule::kLiteral, LongTermRule::kNormalized}) {
    DualMemoryConfig cfg;
    cfg.rule = rule;
    const Matrix c = test::random_unit_rows(5, 6, rng);
    DualMemory dm(c, cfg), manual(c, cfg);
    for (int step = 0; step < 40; ++step) {
      const Matrix q = test::random_unit_rows(4, 6, rng);
      IndexList ids;
      for (int i = 0; i < 4; ++i) ids.push_back(static_cast<Index>(rng.below(5)));
      const double beta = dm.update_batch(q, ids);
      CHECK(beta > 0.0);
      CHECK(beta < 1.0);

      CHECK(manual.compute_beta(q, ids) == beta);
      std::vector<Index> present(ids.begin(), ids.end());
      std::sort(present.begin(), present.end());
      present.erase(std::unique(present.begin(), present.end()), present.end());
      manual.update_short_term(beta, present);
      for (Index i = 0; i < 4; ++i) manual.update_long_term(ids[static_cast<std::size_t>(i)], q.row(i).transpose());
      manual.refresh_fused();
      CHECK(manual.short_term() == dm.short_term());
      CHECK(manual.long_term() == dm.long_term());
      CHECK(manual.fused() == dm.fused());

      check_unit_rows(dm.short_term());
      check_unit_rows(dm.long_term());
      check_unit_rows(dm.fused());
    }
  }
}

TEST_CASE("fixed point when every query equals its centroid") {
  Rng rng(43);
  for (LongTermRule rule : {LongTermRule::kLiteral, LongTermRule::kNormalized}) {
    DualMemoryConfig cfg;
    cfg.rule = rule;
    const Matrix c = test::random_unit_rows(3, 4, rng);
    DualMemory dm(c, cfg);
    const IndexList ids{2, 0, 1, 0};
    Matrix q(4, 4);
    for (Index i = 0; i < 4; ++i) q.row(i) = c.row(ids[static_cast<std::size_t>(i)]);
    CHECK(dm.update_batch(q, ids) == 0.5);
    CHECK(max_abs(dm.long_term() - c) <= 1e-14);
    CHECK(max_abs(dm.short_term() - c) <= 1e-14);
    CHECK(max_abs(dm.fused() - c) <= 1e-14);
  }
}

TEST_CASE("dhml_loss") {
  Rng rng(44);
  const Matrix c = test::random_unit_rows(4, 5, rng);
  DualMemory dm(c, {});
  dm.update_batch(test::random_unit_rows(3, 5, rng), IndexList{0, 1, 3});
  const ClusterMemory mem(c, View::kDrone, 0.2);

  const Matrix q = test::random_unit_rows(6, 5, rng);
  const IndexList pos{0, 1, 2, 3, 1, 0};
  const BatchLoss cv = batch_nce(q, pos, mem.centroids(), 0.3);
  const BatchLoss zero = batch_loss_dhml(q, pos, dm, 0.3, 0.0, cv);
  CHECK(zero.loss == cv.loss);
  CHECK(zero.grad == cv.grad);

  Matrix one(1, 5);
  one.row(0) = c.row(0);
  const DualMemory single(one, {});
  const LossGrad none{0.0, Vector::Zero(5)};
  CHECK(dhml_loss(q.row(0).transpose(), single, 0, 0.3, 1.0, none).loss == doctest::Approx(0.0));
  CHECK_THROWS_AS(dhml_loss(q.row(0).transpose(), dm, 0, 0.0, 1.0, none), Error);
  CHECK_THROWS_AS(dhml_loss(q.row(0).transpose(), dm, 4, 0.3, 1.0, none), Error);

  for (int t = 0; t < 20; ++t) {
    const Vector x = test::random_unit(5, rng);
    const Index p = static_cast<Index>(rng.below(4));
    const double lambda = rng.uniform() * 2.0;
    auto full = [&](const Vector& v) {
      const LossGrad base = contrastive_loss(v, mem, p, 0.3);
      return dhml_loss(v, dm, p, 0.3, lambda, base);
    };
    const Vector numeric = test::numeric_gradient([&](const Vector& v) { return full(v).loss; }, x);
    CHECK(test::relative_error(full(x).grad, numeric) <= 1e-6);
  }

  const BatchLoss batch = batch_loss_dhml(q, pos, dm, 0.3, 0.7, cv);
  const Vector flat = Eigen::Map<const Vector>(q.data(), q.size());
  const Vector numeric = test::numeric_gradient(
      [&](const Vector& x) {
        const Matrix m = Eigen::Map<const Matrix>(x.data(), 6, 5);
        const BatchLoss b = batch_nce(m, pos, mem.centroids(), 0.3);
        return batch_loss_dhml(m, pos, dm, 0.3, 0.7, b).loss;
      },
      flat);
  const Vector analytic = Eigen::Map<const Vector>(batch.grad.data(), batch.grad.size());
  CHECK(test::relative_error(analytic, numeric) <= 1e-6);
}

}  // TEST_SUITE
