#pragma once

#include "stepalign/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace stepalign {

double top1_accuracy(const std::vector<int>& preds, const std::vector<int>& gts);
double average_index_error(const std::vector<int>& preds, const std::vector<int>& gts);

struct RetrievalQuery {
  Direction direction = Direction::I2V;
  std::string query_id;
  std::vector<std::string> candidates;
  std::vector<double> scores;
  std::vector<bool> positive;  // per candidate

  bool has_positive() const;
};

/// Candidate order by descending score, ties broken by ascending id.
std::vector<std::size_t> rank_candidates(const RetrievalQuery& q);

/// 1 if a positive is within the top k. Queries without positives are not rankable and throw.
bool recall_at_k(const RetrievalQuery& q, std::size_t k);

/// P(score(positive) > score(negative)) + 0.5 P(tie). 0 for queries without positives; 1 if every
/// candidate is positive.
double auroc(const RetrievalQuery& q);

/// Percentage of queries with positives that hit within top k (no-positive queries are skipped).
double recall_percent(const std::vector<RetrievalQuery>& queries, std::size_t k);
/// Mean AUROC over all queries; no-positive queries count as 0.
double mean_auroc(const std::vector<RetrievalQuery>& queries);

struct GranularityMetrics {
  double top1 = 0.0;  // percent
  double aie = 0.0;
  double r1 = 0.0;  // percent
  double r3 = 0.0;  // percent
  double auroc = 0.0;
  std::size_t v2i_queries = 0;
  std::size_t i2v_queries = 0;
  std::size_t i2v_without_positive = 0;
};

struct EvaluationReport {
  std::string method;
  std::map<Granularity, GranularityMetrics> by_granularity;

  /// Aligned text table, columns: Top1 S/P, AIE S/P, R@1 S/P, R@3 S/P, AUROC S/P.
  std::string format_table() const;
  std::string to_csv() const;
};

}  // namespace stepalign
