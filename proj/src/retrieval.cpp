#include "xview/retrieval.hpp"

#include <algorithm>

namespace xview {

std::vector<IndexList> rank_gallery(const Matrix& queries, const Matrix& gallery) {
  require(gallery.rows() > 0, ErrorCode::kInvalidArgument, "retrieval: empty gallery");
  const Matrix sims = pairwise_sim(queries, gallery);
  std::vector<IndexList> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  for (Index i = 0; i < queries.rows(); ++i) out.push_back(rank_descending(sims.row(i).transpose()));
  return out;
}

namespace {

void check_ids(const Matrix& queries, const Matrix& gallery, std::span<const int> qid,
               std::span<const int> gid) {
  require(static_cast<Index>(qid.size()) == queries.rows() &&
              static_cast<Index>(gid.size()) == gallery.rows(),
          ErrorCode::kShapeMismatch, "retrieval: id count mismatch");
}

double recall_from_ranks(const std::vector<IndexList>& ranks, std::span<const int> qid,
                         std::span<const int> gid, Index k) {
  require(k >= 1, ErrorCode::kInvalidArgument, "recall_at_k: k must be >= 1");
  if (ranks.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < ranks.size(); ++q) {
    const auto depth = std::min<std::size_t>(static_cast<std::size_t>(k), ranks[q].size());
    for (std::size_t r = 0; r < depth; ++r) {
      if (gid[static_cast<std::size_t>(ranks[q][r])] == qid[q]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

}  // namespace

double recall_at_k(const Matrix& queries, const Matrix& gallery, std::span<const int> query_ids,
                   std::span<const int> gallery_ids, Index k) {
  check_ids(queries, gallery, query_ids, gallery_ids);
  return recall_from_ranks(rank_gallery(queries, gallery), query_ids, gallery_ids, k);
}

double average_precision(const RelevanceList& ranked) {
  double sum = 0.0;
  std::size_t found = 0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (!ranked[r]) continue;
    ++found;
    sum += static_cast<double>(found) / static_cast<double>(r + 1);
  }
  require(found > 0, ErrorCode::kInvalidArgument, "average_precision: query has no relevant item");
  return sum / static_cast<double>(found);
}

double mean_average_precision(const std::vector<RelevanceList>& ranked) {
  require(!ranked.empty(), ErrorCode::kInvalidArgument, "mean_average_precision: no queries");
  double total = 0.0;
  for (const auto& r : ranked) total += average_precision(r);
  return total / static_cast<double>(ranked.size());
}

RetrievalScores evaluate_retrieval(const Matrix& queries, const Matrix& gallery,
                                   std::span<const int> query_ids,
                                   std::span<const int> gallery_ids) {
  check_ids(queries, gallery, query_ids, gallery_ids);
  const auto ranks = rank_gallery(queries, gallery);
  RetrievalScores s;
  s.r1 = recall_from_ranks(ranks, query_ids, gallery_ids, 1);
  s.r5 = recall_from_ranks(ranks, query_ids, gallery_ids, 5);
  s.r10 = recall_from_ranks(ranks, query_ids, gallery_ids, 10);
  std::vector<RelevanceList> relevance;
  relevance.reserve(ranks.size());
  for (std::size_t q = 0; q < ranks.size(); ++q) {
    RelevanceList rel(ranks[q].size());
    for (std::size_t r = 0; r < ranks[q].size(); ++r)
      rel[r] = gallery_ids[static_cast<std::size_t>(ranks[q][r])] == query_ids[q];
    relevance.push_back(std::move(rel));
  }
  s.ap = mean_average_precision(relevance);
  return s;
}

}  // namespace xview
