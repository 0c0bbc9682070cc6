#pragma once

#include <span>
#include <vector>

#include "xview/numcore.hpp"

namespace xview {

// Gallery indices per query, cosine similarity descending, index ascending
// on ties.
std::vector<IndexList> rank_gallery(const Matrix& queries, const Matrix& gallery);

// Fraction of queries with at least one same-id item in their top k.
double recall_at_k(const Matrix& queries, const Matrix& gallery, std::span<const int> query_ids,
                   std::span<const int> gallery_ids, Index k);

// Relevance flags of one query's ranked gallery.
using RelevanceList = std::vector<char>;

// Mean over relevant items of precision at their rank.
double average_precision(const RelevanceList& ranked);

// Mean of per-query AP; every query needs a relevant item.
double mean_average_precision(const std::vector<RelevanceList>& ranked);

struct RetrievalScores {
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
  double ap = 0.0;
};

RetrievalScores evaluate_retrieval(const Matrix& queries, const Matrix& gallery,
                                   std::span<const int> query_ids,
                                   std::span<const int> gallery_ids);

}  // namespace xview
