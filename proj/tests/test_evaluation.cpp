#include <doctest.h>

#include <cmath>

#include "csireid/error.hpp"
#include "csireid/evaluation.hpp"
#include "oracles.hpp"

using namespace csireid;

namespace {

std::vector<RetrievalResult> ranks(std::initializer_list<std::size_t> r) {
  std::vector<RetrievalResult> out;
  for (auto v : r) out.push_back({v, 0.0});
  return out;
}

double ap(std::initializer_list<int> rel) {
  std::vector<bool> v(rel.begin(), rel.end());
  std::unique_ptr<bool[]> buf(new bool[v.size()]);
  for (std::size_t i = 0; i < v.size(); ++i) buf[i] = v[i];
  return average_precision(std::span<const bool>(buf.get(), v.size()));
}

std::vector<std::vector<double>> random_scores(Rng& rng, std::size_t n, bool ties) {
  std::vector<std::vector<double>> s(n, std::vector<double>(n));
  for (auto& row : s)
    for (double& v : row) v = ties ? static_cast<double>(rng.index(4)) : rng.uniform(-1, 1);
  return s;
}

}  // namespace

TEST_CASE("rank-k accuracy") {
  const auto r = ranks({1, 2, 4});
  CHECK(rank_accuracy(r, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(rank_accuracy(r, 3) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(rank_accuracy(r, 4) == 1.0);
  CHECK_THROWS_AS(rank_accuracy(r, 0), ConfigError);
  CHECK_THROWS_AS(rank_accuracy(std::vector<RetrievalResult>{}, 1), DataError);
}

TEST_CASE("average precision") {
  CHECK(ap({1, 0, 1}) == doctest::Approx(0.8333333333333).epsilon(1e-12));
  CHECK(ap({1, 0, 1}) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-15));
  CHECK(ap({1}) == 1.0);
  CHECK(ap({0, 1}) == 0.5);
  CHECK(ap({1, 1, 0, 0}) == 1.0);
  // Irrelevant items after the last relevant one do not matter.
  CHECK(ap({0, 1, 0, 1}) == ap({0, 1, 0, 1, 0, 0, 0}));
  CHECK_THROWS_AS(ap({0, 0}), DataError);
}

TEST_CASE("gallery ranking is a stable descending sort") {
  const std::vector<double> s{0.2, 0.9, 0.2, 0.5, 0.9};
  CHECK(rank_gallery(s) == std::vector<std::size_t>{1, 4, 3, 0, 2});
}

TEST_CASE("retrieval matches the counting oracle") {
  Rng rng(1);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 4 + rng.index(20);
    std::vector<std::int64_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::int64_t>(i % 3);
    rng.shuffle(labels.begin(), labels.end());
    const auto scores = random_scores(rng, n, trial % 2 == 0);
    const auto report = evaluate_scores(scores, labels, true);
    const auto expect = oracle::retrieval(scores, labels);
    REQUIRE(report.per_query.size() == expect.size());
    double r1 = 0, r3 = 0, r5 = 0, m = 0;
    for (std::size_t q = 0; q < expect.size(); ++q) {
      CHECK(report.per_query[q].first_match_rank == expect[q].first_rank);
      CHECK(report.per_query[q].average_precision == doctest::Approx(expect[q].ap).epsilon(1e-12));
      r1 += expect[q].first_rank <= 1;
      r3 += expect[q].first_rank <= 3;
      r5 += expect[q].first_rank <= 5;
      m += expect[q].ap;
    }
    const double k = static_cast<double>(expect.size());
    CHECK(report.rank1 == doctest::Approx(r1 / k).epsilon(1e-12));
    CHECK(report.rank3 == doctest::Approx(r3 / k).epsilon(1e-12));
    CHECK(report.rank5 == doctest::Approx(r5 / k).epsilon(1e-12));
    CHECK(report.mean_ap == doctest::Approx(m / k).epsilon(1e-12));
    CHECK(report.rank1 <= report.rank3);
    CHECK(report.rank3 <= report.rank5);
    for (std::size_t k2 = 1; k2 < n; ++k2) CHECK(rank_accuracy(report.per_query, k2) <= rank_accuracy(report.per_query, k2 + 1));
    CHECK(report.mean_ap >= 0.0);
    CHECK(report.mean_ap <= 1.0);
  }
}

TEST_CASE("metrics are invariant to strictly increasing score maps") {
  Rng rng(2);
  const std::size_t n = 15;
  std::vector<std::int64_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::int64_t>(i / 5);
  const auto scores = random_scores(rng, n, false);
  auto mapped = scores;
  for (auto& row : mapped)
    for (double& v : row) v = 3.0 * std::exp(v) - 7.0;
  const auto a = evaluate_scores(scores, labels);
  const auto b = evaluate_scores(mapped, labels);
  CHECK(a.rank1 == b.rank1);
  CHECK(a.rank5 == b.rank5);
  CHECK(a.mean_ap == b.mean_ap);
}

TEST_CASE("perfectly separated signatures") {
  std::vector<std::vector<double>> sig;
  std::vector<std::int64_t> labels;
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < 3; ++i) {
      const double a = 0.05 * i + (s == 0 ? 0.0 : 1.5);
      sig.push_back({std::cos(a), std::sin(a)});
      labels.push_back(s);
    }
  const auto report = evaluate_signatures(sig, labels);
  CHECK(report.rank1 == 1.0);
  CHECK(report.rank3 == 1.0);
  CHECK(report.mean_ap == 1.0);
}

TEST_CASE("retrieval errors") {
  const std::vector<std::vector<double>> s2{{1, 0}, {0, 1}};
  const std::vector<std::int64_t> same{7, 7};
  CHECK_THROWS_AS(evaluate_scores(s2, same), DataError);
  const std::vector<std::int64_t> one{7};
  CHECK_THROWS_AS(evaluate_scores({{1}}, one), DataError);
  const std::vector<std::int64_t> lonely{1, 1, 2};
  const std::vector<std::vector<double>> s3{{0, 1, 0}, {1, 0, 0}, {0, 0, 0}};
  CHECK_THROWS_AS(evaluate_scores(s3, lonely), DataError);
  const auto skipped = evaluate_scores(s3, lonely, true);
  CHECK(skipped.per_query.size() == 2);
  CHECK(skipped.rank1 == 1.0);
  const std::vector<std::int64_t> all_lonely{1, 2, 3};
  CHECK_THROWS_AS(evaluate_scores(s3, all_lonely, true), DataError);
}

TEST_CASE("fold summaries and CSV") {
  RetrievalReport a, b;
  a.rank1 = 0.9;
  b.rank1 = 1.0;
  a.mean_ap = 0.5;
  b.mean_ap = 0.7;
  const std::vector<RetrievalReport> folds{a, b};
  const auto s = summarize(folds);
  REQUIRE(s.size() == 4);
  CHECK(s[0].metric == "rank1");
  CHECK(s[0].value == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(s[0].stddev == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(s[3].metric == "mAP");
  CHECK(s[3].value == doctest::Approx(0.6).epsilon(1e-15));
  const std::string csv = metrics_csv(s, "00ff");
  CHECK(csv.rfind("metric,value,stddev,config_hash\n", 0) == 0);
  CHECK(csv.find("rank1,0.950000,0.050000,00ff\n") != std::string::npos);
  CHECK_THROWS_AS(summarize(std::vector<RetrievalReport>{}), DataError);
}
