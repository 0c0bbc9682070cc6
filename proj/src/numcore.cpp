#include "xview/numcore.hpp"

#include <algorithm>
#include <numeric>

namespace xview {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kDegenerate: return "degenerate input";
    case ErrorCode::kConfig: return "configuration error";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kBadVersion: return "unsupported version";
    case ErrorCode::kTruncated: return "truncated file";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kNumeric: return "numeric failure";
  }
  return "unknown";
}

Vector unit_sims(const Eigen::Ref<const Vector>& query, const Matrix& bank) {
  require(query.size() == bank.cols(), ErrorCode::kShapeMismatch,
          "unit_sims: dimension mismatch");
  Vector out(bank.rows());
  for (Index i = 0; i < bank.rows(); ++i) {
    double dot = 0.0;
    for (Index j = 0; j < bank.cols(); ++j) dot += bank(i, j) * query(j);
    out(i) = dot;
  }
  return out;
}

Vector softmax(const Eigen::Ref<const Vector>& v, double temperature) {
  require(temperature > 0.0, ErrorCode::kInvalidArgument,
          "softmax: temperature must be positive");
  require(v.size() > 0, ErrorCode::kInvalidArgument, "softmax: empty input");
  const double m = v.maxCoeff();
  Vector e(v.size());
  double total = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    e(i) = std::exp((v(i) - m) / temperature);
    total += e(i);
  }
  return e / total;
}

double log_sum_exp(const Eigen::Ref<const Vector>& v) {
  require(v.size() > 0, ErrorCode::kInvalidArgument, "log_sum_exp: empty input");
  const double m = v.maxCoeff();
  double total = 0.0;
  for (Index i = 0; i < v.size(); ++i) total += std::exp(v(i) - m);
  return m + std::log(total);
}

namespace {

struct DescendingThenIndex {
  const Eigen::Ref<const Vector>& v;
  bool operator()(Index a, Index b) const {
    if (v(a) != v(b)) return v(a) > v(b);
    return a < b;
  }
};

}  // namespace

IndexList top_k_indices(const Eigen::Ref<const Vector>& v, Index k) {
  require(k >= 1 && k <= v.size(), ErrorCode::kInvalidArgument,
          "top_k_indices: k out of range");
  IndexList idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), DescendingThenIndex{v});
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

IndexList rank_descending(const Eigen::Ref<const Vector>& v) {
  IndexList idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::sort(idx.begin(), idx.end(), DescendingThenIndex{v});
  return idx;
}

std::uint64_t Rng::below(std::uint64_t n) {
  require(n > 0, ErrorCode::kInvalidArgument, "Rng::below: empty range");
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Matrix random_normal(Index rows, Index cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, stddev);
  return m;
}

}  // namespace xview
