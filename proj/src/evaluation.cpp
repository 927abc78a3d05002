#include "csireid/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <sstream>

#include "csireid/error.hpp"
#include "csireid/training.hpp"

namespace csireid {

double rank_accuracy(std::span<const RetrievalResult> results, std::size_t k) {
  if (results.empty()) throw DataError("rank accuracy over zero queries");
  if (k < 1) throw ConfigError("rank k must be >= 1");
  const auto hits = std::count_if(results.begin(), results.end(),
                                  [k](const RetrievalResult& r) { return r.first_match_rank <= k; });
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

double average_precision(std::span<const bool> ranked_relevance) {
  std::size_t found = 0;
  double total = 0.0;
  for (std::size_t j = 0; j < ranked_relevance.size(); ++j) {
    if (!ranked_relevance[j]) continue;
    ++found;
    total += static_cast<double>(found) / static_cast<double>(j + 1);
  }
  if (found == 0) throw DataError("average precision with no relevant items");
  return total / static_cast<double>(found);
}

std::vector<std::size_t> rank_gallery(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

RetrievalReport evaluate_scores(const std::vector<std::vector<double>>& scores,
                                std::span<const std::int64_t> labels, bool skip_unmatched) {
  const std::size_t n = labels.size();
  if (scores.size() != n) throw DataError("score matrix and labels differ in size");
  if (n < 2) throw DataError("retrieval needs at least two samples");
  std::vector<std::int64_t> distinct(labels.begin(), labels.end());
  std::sort(distinct.begin(), distinct.end());
  if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() < 2) {
    throw DataError("retrieval needs at least two subjects");
  }

  RetrievalReport report;
  std::vector<double> row;
  std::vector<std::size_t> gallery;
  std::unique_ptr<bool[]> relevance(new bool[n]);
  for (std::size_t q = 0; q < n; ++q) {
    if (scores[q].size() != n) throw DataError("score matrix is not square");
    row.clear();
    gallery.clear();
    for (std::size_t g = 0; g < n; ++g) {
      if (g == q) continue;
      row.push_back(scores[q][g]);
      gallery.push_back(g);
    }
    const auto order = rank_gallery(row);
    std::size_t first = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      relevance[r] = labels[gallery[order[r]]] == labels[q];
      if (relevance[r] && first == 0) first = r + 1;
    }
    if (first == 0) {
      if (skip_unmatched) continue;
      throw DataError("query subject " + std::to_string(labels[q]) +
                      " has no other sample in the gallery");
    }
    report.per_query.push_back(
        {first, average_precision(std::span<const bool>(relevance.get(), order.size()))});
  }
  if (report.per_query.empty()) throw DataError("no query has a matching gallery sample");
  report.rank1 = rank_accuracy(report.per_query, 1);
  report.rank3 = rank_accuracy(report.per_query, 3);
  report.rank5 = rank_accuracy(report.per_query, 5);
  double ap = 0.0;
  for (const auto& r : report.per_query) ap += r.average_precision;
  report.mean_ap = ap / static_cast<double>(report.per_query.size());
  return report;
}

RetrievalReport evaluate_signatures(std::span<const std::vector<double>> signatures,
                                    std::span<const std::int64_t> labels, bool skip_unmatched) {
  return evaluate_scores(similarity_matrix(signatures, signatures), labels, skip_unmatched);
}

RetrievalReport evaluate_retrieval(const SignatureModel& model,
                                   std::span<const FeatureSequence> samples,
                                   std::span<const std::int64_t> labels, bool skip_unmatched) {
  const auto sigs = model.signatures(samples);
  return evaluate_signatures(sigs, labels, skip_unmatched);
}

std::vector<MetricSummary> summarize(std::span<const RetrievalReport> folds) {
  if (folds.empty()) throw DataError("no fold reports to summarize");
  auto stats = [&](auto field, const char* name) {
    double mean = 0.0;
    for (const auto& f : folds) mean += f.*field;
    mean /= static_cast<double>(folds.size());
    double var = 0.0;
    for (const auto& f : folds) var += (f.*field - mean) * (f.*field - mean);
    return MetricSummary{name, mean, std::sqrt(var / static_cast<double>(folds.size()))};
  };
  return {stats(&RetrievalReport::rank1, "rank1"), stats(&RetrievalReport::rank3, "rank3"),
          stats(&RetrievalReport::rank5, "rank5"), stats(&RetrievalReport::mean_ap, "mAP")};
}

std::string metrics_csv(std::span<const MetricSummary> rows, const std::string& config_hash) {
  std::ostringstream out;
  out << "metric,value,stddev,config_hash\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,", r.metric.c_str(), r.value, r.stddev);
    out << buf << config_hash << '\n';
  }
  return out.str();
}

std::string metrics_table(std::span<const MetricSummary> rows) {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-8s %10s %10s\n", "metric", "value", "stddev");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-8s %10.4f %10.4f\n", r.metric.c_str(), r.value, r.stddev);
    out << buf;
  }
  return out.str();
}

}  // namespace csireid
