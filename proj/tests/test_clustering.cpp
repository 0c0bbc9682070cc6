#include <map>
#include <set>

#include "support.hpp"
#include "xview/clustering.hpp"

using namespace xview;

namespace {

Matrix circle_points(std::initializer_list<double> degrees) {
  Matrix m(static_cast<Index>(degrees.size()), 2);
  Index i = 0;
  for (double d : degrees) {
    const double r = d * M_PI / 180.0;
    m(i, 0) = std::cos(r);
    m(i, 1) = std::sin(r);
    ++i;
  }
  return m;
}

// Textbook DBSCAN: visit points in index order, expand each unvisited core
// point with a queue. Border points keep the first cluster that reaches them.
struct Textbook {
  std::vector<int> labels;
  std::vector<char> core;
  std::vector<std::vector<int>> neighbors;
};

Textbook textbook_dbscan(const Matrix& x, double eps, int min_pts) {
  const int n = static_cast<int>(x.rows());
  Textbook t;
  t.neighbors.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double dot = 0, ni = 0, nj = 0;
      for (Index k = 0; k < x.cols(); ++k) {
        dot += x(i, k) * x(j, k);
        ni += x(i, k) * x(i, k);
        nj += x(j, k) * x(j, k);
      }
      if (i == j || 1.0 - dot / std::sqrt(ni * nj) <= eps) t.neighbors[static_cast<std::size_t>(i)].push_back(j);
    }
  t.core.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    t.core[static_cast<std::size_t>(i)] = static_cast<int>(t.neighbors[static_cast<std::size_t>(i)].size()) >= min_pts;
  t.labels.assign(static_cast<std::size_t>(n), -2);  // -2 unvisited
  int next = 0;
  for (int i = 0; i < n; ++i) {
    if (t.labels[static_cast<std::size_t>(i)] != -2) continue;
    if (!t.core[static_cast<std::size_t>(i)]) {
      t.labels[static_cast<std::size_t>(i)] = -1;
      continue;
    }
    const int id = next++;
    std::vector<int> queue{i};
    t.labels[static_cast<std::size_t>(i)] = id;
    for (std::size_t h = 0; h < queue.size(); ++h) {
      const int p = queue[h];
      if (!t.core[static_cast<std::size_t>(p)]) continue;
      for (int q : t.neighbors[static_cast<std::size_t>(p)]) {
        int& lq = t.labels[static_cast<std::size_t>(q)];
        if (lq == -2 || lq == -1) {
          const bool fresh = lq == -2;
          lq = id;
          if (fresh) queue.push_back(q);
        }
      }
    }
  }
  return t;
}

// Clusters with many near-duplicates, a few loose points, random spread.
Matrix random_blobs(Rng& rng, Index n, Index dim) {
  const Index centers = 1 + static_cast<Index>(rng.below(5));
  const Matrix c = test::random_unit_rows(centers, dim, rng);
  const double spread = 0.05 + 0.3 * rng.uniform();
  Matrix x(n, dim);
  for (Index i = 0; i < n; ++i)
    x.row(i) = c.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(centers)))) +
               spread * test::random_matrix(1, dim, rng);
  return l2_normalize_rows(x);
}

}  // namespace

TEST_SUITE("clustering") {

TEST_CASE("unit-circle example: two clusters and one noise point") {
  const Matrix x = circle_points({0, 2, 3, 90, 92, 93, 180});
  const PseudoLabels pl = dbscan(x, {0.05, 2});
  CHECK(pl.num_clusters == 2);
  CHECK(pl.labels == std::vector<int>{0, 0, 0, 1, 1, 1, kNoise});
  CHECK(pl.noise_count() == 1);
}

TEST_CASE("identical points form one cluster; isolated points are noise") {
  const Matrix same = Matrix::Ones(5, 3);
  const PseudoLabels a = dbscan(same, {0.01, 5});
  CHECK(a.num_clusters == 1);
  CHECK(a.noise_count() == 0);

  const Matrix distinct = circle_points({0, 30, 60, 90});
  const PseudoLabels b = dbscan(distinct, {1e-9, 2});
  CHECK(b.num_clusters == 0);
  CHECK(b.noise_count() == 4);
}

TEST_CASE("dbscan rejects invalid parameters") {
  const Matrix x = Matrix::Ones(2, 2);
  CHECK_THROWS_AS(dbscan(x, {0.0, 2}), Error);
  CHECK_THROWS_AS(dbscan(x, {0.1, 0}), Error);
  CHECK_THROWS_AS(dbscan(Matrix(0, 2), {0.1, 2}), Error);
}

TEST_CASE("border point goes to its lowest-indexed core neighbor") {
  // Group B = {-6, -3, 0, 2} deg, group A = {20, 22, 24, 26} deg, border
  // point at 11 deg reaching the cores at 2 deg (index 4) and 20 deg
  // (index 1). B owns the lowest core overall (index 0), so a breadth-first
  // sweep would hand the border point to B; the rule picks A.
  const Matrix x = circle_points({-6, 20, -3, 0, 2, 22, 24, 26, 11});
  const double eps = 1.0 - std::cos(9.5 * M_PI / 180.0);
  const PseudoLabels pl = dbscan(x, {eps, 4});
  REQUIRE(pl.num_clusters == 2);
  CHECK(pl.labels == std::vector<int>{0, 1, 0, 0, 0, 1, 1, 1, 1});
}

TEST_CASE("dbscan matches a textbook implementation on random instances") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 4 + static_cast<Index>(rng.below(61));
    const Matrix x = random_blobs(rng, n, 2 + static_cast<Index>(rng.below(6)));
    const double eps = 0.02 + 0.3 * rng.uniform();
    const int min_pts = 1 + static_cast<int>(rng.below(6));
    const PseudoLabels pl = dbscan(x, {eps, min_pts});
    const Textbook t = textbook_dbscan(x, eps, min_pts);
    validate(pl);

    // Same noise set and the same partition of core points, with ids in
    // order of first core point.
    std::map<int, int> relabel;
    int next = 0;
    for (Index i = 0; i < n; ++i) {
      const auto s = static_cast<std::size_t>(i);
      CHECK((pl.labels[s] == kNoise) == (t.labels[s] == -1));
      if (!t.core[s]) continue;
      auto [it, inserted] = relabel.emplace(t.labels[s], next);
      if (inserted) ++next;
      CHECK(pl.labels[s] == it->second);
    }
    CHECK(pl.num_clusters == next);
    // Border rule.
    for (Index i = 0; i < n; ++i) {
      const auto s = static_cast<std::size_t>(i);
      if (t.core[s] || t.labels[s] == -1) continue;
      int lowest = -1;
      for (int q : t.neighbors[s])
        if (t.core[static_cast<std::size_t>(q)]) {
          lowest = q;
          break;
        }
      REQUIRE(lowest >= 0);
      CHECK(pl.labels[s] == pl.labels[static_cast<std::size_t>(lowest)]);
    }
    CHECK(dbscan(x, {eps, min_pts}).labels == pl.labels);
  }
}

TEST_CASE("replicate_features and collapse_replicas") {
  Matrix x(2, 2);
  x << 1, 2, 3, 4;
  const Replicated one = replicate_features(x, 1);
  CHECK(one.features == x);
  const Replicated r = replicate_features(x, 3);
  REQUIRE(r.features.rows() == 6);
  for (Index i = 0; i < 6; ++i) CHECK(r.features.row(i) == x.row(i / 3));
  CHECK(r.source == IndexList{0, 0, 0, 1, 1, 1});
  CHECK_THROWS_AS(replicate_features(x, 0), Error);

  PseudoLabels rep;
  rep.labels = {kNoise, kNoise, kNoise, 0, 0, 0};
  rep.num_clusters = 1;
  const PseudoLabels back = collapse_replicas(rep, 2, 3);
  CHECK(back.labels == std::vector<int>{kNoise, 0});
  CHECK(back.num_clusters == 1);
}

TEST_CASE("replicated singleton clusters on the circle") {
  // One satellite per location: replication lets each form its own cluster.
  const Matrix x = circle_points({0, 90, 180});
  CHECK(dbscan(x, {0.1, 4}).num_clusters == 0);
  const Replicated r = replicate_features(x, 50);
  const PseudoLabels pl = collapse_replicas(dbscan(r.features, {0.1, 4}), 3, 50);
  CHECK(pl.labels == std::vector<int>{0, 1, 2});
  const Matrix c = compute_centroids(x, pl);
  CHECK((c - x).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("compute_centroids") {
  Matrix x(3, 2);
  x << 1, 0, 0, 1, 0.6, 0.8;
  PseudoLabels pl;
  pl.labels = {0, 0, 1};
  pl.num_clusters = 2;
  const Matrix c = compute_centroids(x, pl);
  CHECK(c(0, 0) == doctest::Approx(0.70710678).epsilon(1e-8));
  CHECK(c(0, 1) == doctest::Approx(0.70710678).epsilon(1e-8));
  CHECK(c.row(1).isApprox(x.row(2)));

  PseudoLabels empty;
  empty.labels = {0, 0, 0};
  empty.num_clusters = 2;
  CHECK_THROWS_AS(compute_centroids(x, empty), Error);

  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 30, k = 4;
    const Matrix f = test::random_unit_rows(n, 5, rng);
    PseudoLabels lab;
    lab.num_clusters = static_cast<int>(k);
    for (Index i = 0; i < n; ++i)
      lab.labels.push_back(i < k ? static_cast<int>(i) : static_cast<int>(rng.below(k + 1)) - 1);
    const Matrix got = compute_centroids(f, lab);
    for (int c2 = 0; c2 < lab.num_clusters; ++c2) {
      Vector sum = Vector::Zero(5);
      for (Index i = 0; i < n; ++i)
        if (lab.labels[static_cast<std::size_t>(i)] == c2) sum += f.row(i).transpose();
      sum /= sum.norm();
      CHECK((got.row(c2).transpose() - sum).cwiseAbs().maxCoeff() <= 1e-12);
    }
    // Replicating every row leaves the centroid set unchanged.
    const Replicated r = replicate_features(f, 3);
    PseudoLabels rl;
    rl.num_clusters = lab.num_clusters;
    for (Index s : r.source) rl.labels.push_back(lab.labels[static_cast<std::size_t>(s)]);
    CHECK((compute_centroids(r.features, rl) - got).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("cluster count trace") {
  ClusterHistory h;
  CHECK_THROWS_AS(cluster_count_trace(h), Error);
  PseudoLabels d, s;
  d.labels = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, kNoise, kNoise};
  d.num_clusters = 10;
  s.labels = {0, 1, 2, 3, 4, 5, 6, kNoise};
  s.num_clusters = 7;
  h.record(d, s);
  const auto trace = cluster_count_trace(h);
  REQUIRE(trace.size() == 1);
  CHECK(trace[0] == ClusterCounts{10, 7});
}

}  // TEST_SUITE
