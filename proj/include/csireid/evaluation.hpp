#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csireid/csi_core.hpp"
#include "csireid/encoders.hpp"

namespace csireid {

/// Per-query outcome: 1-based rank of the first correct match and the
/// average precision over all relevant gallery items.
struct RetrievalResult {
  std::size_t first_match_rank = 1;
  double average_precision = 0.0;
};

/// (1/N) * #{i : r_i <= k}
double rank_accuracy(std::span<const RetrievalResult> results, std::size_t k);

/// Mean over relevant positions j of (relevant items in top j) / j.
double average_precision(std::span<const bool> ranked_relevance);

struct RetrievalReport {
  double rank1 = 0.0;
  double rank3 = 0.0;
  double rank5 = 0.0;
  double mean_ap = 0.0;
  std::vector<RetrievalResult> per_query;
};

/// Ranks gallery items by descending score; ties keep input order.
std::vector<std::size_t> rank_gallery(std::span<const double> scores);

/// Leave-one-out retrieval over a score matrix: every item is a query
/// against all others. If skip_unmatched is false, a query without any other
/// same-label item is a DataError; otherwise it is left out.
RetrievalReport evaluate_scores(const std::vector<std::vector<double>>& scores,
                                std::span<const std::int64_t> labels, bool skip_unmatched = false);

/// Same protocol on unit-norm signatures (cosine similarity).
RetrievalReport evaluate_signatures(std::span<const std::vector<double>> signatures,
                                    std::span<const std::int64_t> labels,
                                    bool skip_unmatched = false);

/// Signatures from the model in evaluation mode, then evaluate_signatures.
RetrievalReport evaluate_retrieval(const SignatureModel& model,
                                   std::span<const FeatureSequence> samples,
                                   std::span<const std::int64_t> labels,
                                   bool skip_unmatched = false);

struct MetricSummary {
  std::string metric;
  double value = 0.0;
  double stddev = 0.0;
};

/// Mean and (population) standard deviation of each metric across folds.
std::vector<MetricSummary> summarize(std::span<const RetrievalReport> folds);

/// "metric,value,stddev,config_hash" lines.
std::string metrics_csv(std::span<const MetricSummary> rows, const std::string& config_hash);
/// Fixed-width human-readable table.
std::string metrics_table(std::span<const MetricSummary> rows);

}  // namespace csireid
