#pragma once

// Dense numeric kernels shared by every module: row-major matrices,
// cosine similarity, tempered softmax, deterministic top-k and a
// seedable random source whose stream is identical on every platform.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "xview/error.hpp"

namespace xview {

template <typename Scalar>
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using ColVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = RowMatrix<double>;
using Vector = ColVector<double>;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

// Cosine similarity a.b / (|a| |b|). Zero-norm inputs are an error.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_sim(const Eigen::MatrixBase<DerivedA>& a,
                                     const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  require(a.size() == b.size(), ErrorCode::kShapeMismatch,
          "cosine_sim: dimension mismatch");
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  require(na > Scalar(0) && nb > Scalar(0), ErrorCode::kDegenerate,
          "cosine_sim: zero-norm input");
  Scalar dot(0);
  for (Index i = 0; i < a.size(); ++i) dot += a.derived().coeff(i) * b.derived().coeff(i);
  const Scalar s = dot / (na * nb);
  return std::clamp(s, Scalar(-1), Scalar(1));
}

template <typename Derived>
RowMatrix<typename Derived::Scalar> l2_normalize_rows(
    const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  RowMatrix<Scalar> out = a;
  for (Index i = 0; i < out.rows(); ++i) {
    const Scalar n = out.row(i).norm();
    require(n > Scalar(0), ErrorCode::kDegenerate,
            "l2_normalize_rows: zero-norm row");
    out.row(i) /= n;
  }
  return out;
}

// out(i, j) = cosine_sim(a.row(i), b.row(j)).
template <typename DerivedA, typename DerivedB>
RowMatrix<typename DerivedA::Scalar> pairwise_sim(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  require(a.cols() == b.cols(), ErrorCode::kShapeMismatch,
          "pairwise_sim: column mismatch");
  const auto na = l2_normalize_rows(a);
  const auto nb = l2_normalize_rows(b);
  RowMatrix<typename DerivedA::Scalar> out = na * nb.transpose();
  return out;
}

// Dot-product similarities of one query against every row of a bank whose
// rows are already unit-norm. Used on the hot paths where normalization is
// an invariant of the inputs.
Vector unit_sims(const Eigen::Ref<const Vector>& query, const Matrix& bank);

// Softmax of v / temperature with max subtraction.
Vector softmax(const Eigen::Ref<const Vector>& v, double temperature = 1.0);

// log(sum(exp(v))) with max subtraction.
double log_sum_exp(const Eigen::Ref<const Vector>& v);

// Indices of the k largest entries, sorted by descending value then
// ascending index.
IndexList top_k_indices(const Eigen::Ref<const Vector>& v, Index k);

// Full ranking, same ordering rule as top_k_indices.
IndexList rank_descending(const Eigen::Ref<const Vector>& v);

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Random source backed by std::mt19937_64, whose output sequence is fixed
// by the standard. The uniform and normal transforms are implemented here
// (not via <random> distributions) so derived streams are also portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer on [0, n); rejection sampling removes modulo bias.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller; the second variate is cached.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Child generator with an independent stream.
  Rng split() { return Rng(next_u64() ^ 0x9e3779b97f4a7c15ULL); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Matrix random_normal(Index rows, Index cols, double stddev, Rng& rng);

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace xview
