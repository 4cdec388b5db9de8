#include "stepalign/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace stepalign {

namespace {

void check_pairs(const std::vector<int>& preds, const std::vector<int>& gts, const char* what) {
  if (preds.empty()) fail(std::string(what) + ": empty input");
  if (preds.size() != gts.size()) fail(std::string(what) + ": predictions and ground truth differ in length");
}

}  // namespace

double top1_accuracy(const std::vector<int>& preds, const std::vector<int>& gts) {
  check_pairs(preds, gts, "top1_accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == gts[i];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(preds.size());
}

double average_index_error(const std::vector<int>& preds, const std::vector<int>& gts) {
  check_pairs(preds, gts, "average_index_error");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += std::abs(preds[i] - gts[i]);
  return sum / static_cast<double>(preds.size());
}

bool RetrievalQuery::has_positive() const { return std::find(positive.begin(), positive.end(), true) != positive.end(); }

std::vector<std::size_t> rank_candidates(const RetrievalQuery& q) {
  if (q.scores.size() != q.candidates.size() || q.positive.size() != q.candidates.size())
    fail("retrieval query '" + q.query_id + "': candidates, scores and labels differ in length");
  std::vector<std::size_t> order(q.candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (q.scores[a] != q.scores[b]) return q.scores[a] > q.scores[b];
    return q.candidates[a] < q.candidates[b];
  });
  return order;
}

bool recall_at_k(const RetrievalQuery& q, std::size_t k) {
  if (q.candidates.empty()) fail("recall_at_k: empty candidate pool for '" + q.query_id + "'");
  if (!q.has_positive()) fail("recall_at_k: query '" + q.query_id + "' has no positive");
  const auto order = rank_candidates(q);
  for (std::size_t r = 0; r < std::min(k, order.size()); ++r)
    if (q.positive[order[r]]) return true;
  return false;
}

double auroc(const RetrievalQuery& q) {
  if (q.candidates.empty()) fail("auroc: empty candidate pool for '" + q.query_id + "'");
  if (q.scores.size() != q.candidates.size() || q.positive.size() != q.candidates.size())
    fail("retrieval query '" + q.query_id + "': candidates, scores and labels differ in length");
  const std::size_t n = q.scores.size();
  std::size_t n_pos = 0;
  for (bool p : q.positive) n_pos += p;
  if (n_pos == 0) return 0.0;
  if (n_pos == n) return 1.0;

  // Mann-Whitney U from mid-ranks (ties share the average rank).
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return q.scores[a] < q.scores[b]; });
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && q.scores[order[j + 1]] == q.scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (q.positive[order[k]]) pos_rank_sum += mid;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n - n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double recall_percent(const std::vector<RetrievalQuery>& queries, std::size_t k) {
  std::size_t counted = 0, hits = 0;
  for (const auto& q : queries) {
    if (!q.has_positive()) continue;
    ++counted;
    hits += recall_at_k(q, k);
  }
  return counted == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(counted);
}

double mean_auroc(const std::vector<RetrievalQuery>& queries) {
  if (queries.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& q : queries) sum += auroc(q);
  return sum / static_cast<double>(queries.size());
}

// ---------------------------------------------------------------------------

namespace {

const GranularityMetrics* metrics_for(const EvaluationReport& r, Granularity g) {
  auto it = r.by_granularity.find(g);
  return it == r.by_granularity.end() ? nullptr : &it->second;
}

std::string cell(const GranularityMetrics* m, double GranularityMetrics::*field, int precision) {
  if (!m) return "-";
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << m->*field;
  return out.str();
}

struct Column {
  const char* name;
  double GranularityMetrics::*field;
  int precision;
};

constexpr Column kColumns[] = {
    {"Top1", &GranularityMetrics::top1, 2}, {"AIE", &GranularityMetrics::aie, 3},
    {"R@1", &GranularityMetrics::r1, 2},    {"R@3", &GranularityMetrics::r3, 2},
    {"AUROC", &GranularityMetrics::auroc, 3},
};

}  // namespace

std::string EvaluationReport::format_table() const {
  const GranularityMetrics* s = metrics_for(*this, Granularity::step);
  const GranularityMetrics* p = metrics_for(*this, Granularity::page);
  std::ostringstream out;
  out << std::left << std::setw(8) << "Method";
  for (const Column& c : kColumns) {
    out << std::right << std::setw(9) << (std::string(c.name) + " S");
    out << std::right << std::setw(9) << (std::string(c.name) + " P");
  }
  out << "\n" << std::left << std::setw(8) << (method.empty() ? "-" : method);
  for (const Column& c : kColumns) {
    out << std::right << std::setw(9) << cell(s, c.field, c.precision);
    out << std::right << std::setw(9) << cell(p, c.field, c.precision);
  }
  out << "\n";
  return out.str();
}

std::string EvaluationReport::to_csv() const {
  const GranularityMetrics* s = metrics_for(*this, Granularity::step);
  const GranularityMetrics* p = metrics_for(*this, Granularity::page);
  std::ostringstream out;
  out << "method";
  for (const Column& c : kColumns) out << "," << c.name << "_S," << c.name << "_P";
  out << "\n" << method;
  for (const Column& c : kColumns) out << "," << cell(s, c.field, 6) << "," << cell(p, c.field, 6);
  out << "\n";
  return out.str();
}

}  // namespace stepalign
