#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "csireid/error.hpp"
#include "csireid/preprocess.hpp"
#include "csireid/rng.hpp"
#include "oracles.hpp"

using namespace csireid;
using std::numbers::pi;

namespace {

ComplexCsiTensor random_complex(CsiDims dims, std::uint64_t seed) {
  Rng rng(seed);
  ComplexCsiTensor t(dims);
  for (auto& v : t.data()) v = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
  return t;
}

FeatureSequence column_seq(std::vector<double> v) {
  const std::size_t n = v.size();
  return FeatureSequence(n, 1, std::move(v));
}

// Random column with repeated values and spikes so MAD = 0 windows and
// outliers both occur.
std::vector<double> hampel_fixture(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) {
    const double u = rng.uniform();
    if (u < 0.3) x = std::floor(rng.uniform(0, 4));
    else if (u < 0.4) x = rng.uniform(-50, 50);
    else x = rng.normal(1.0, 0.2);
  }
  return v;
}

}  // namespace

TEST_CASE("amplitude extraction") {
  ComplexCsiTensor t({1, 1, 2, 1});
  t.data()[0] = {3.0, 4.0};
  t.data()[1] = {0.0, 0.0};
  const auto a = amplitude_from_complex(t);
  CHECK(a(0, 0) == 5.0);
  CHECK(a(0, 1) == 0.0);

  const CsiDims d{2, 1, 5, 4};
  const auto csi = random_complex(d, 1);
  const auto amp = amplitude_from_complex(csi);
  for (std::size_t rx = 0; rx < d.n_rx; ++rx)
    for (std::size_t k = 0; k < d.n_sub; ++k)
      for (std::size_t p = 0; p < d.n_pkt; ++p) {
        const auto h = csi.at(rx, 0, k, p);
        const double ref = std::sqrt(h.real() * h.real() + h.imag() * h.imag());
        CHECK(std::abs(amp(p, feature_index(d, rx, 0, k)) - ref) <= 1e-12);
        CHECK(amp(p, feature_index(d, rx, 0, k)) >= 0.0);
      }
}

TEST_CASE("amplitude scales with |c|") {
  const CsiDims d{1, 2, 6, 3};
  const auto csi = random_complex(d, 2);
  const std::complex<double> c(-0.7, 1.9);
  ComplexCsiTensor scaled = csi;
  for (auto& v : scaled.data()) v *= c;
  const auto a = amplitude_from_complex(csi);
  const auto b = amplitude_from_complex(scaled);
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    CHECK(std::abs(b.data()[i] - std::abs(c) * a.data()[i]) <= 1e-12 * std::abs(b.data()[i]));
  }
}

TEST_CASE("phase extraction") {
  ComplexCsiTensor t({1, 1, 4, 1});
  t.data()[0] = {1.0, 1.0};
  t.data()[1] = {-1.0, 0.0};
  t.data()[2] = {-1.0, -0.0};
  t.data()[3] = {0.0, 0.0};
  const auto ph = phase_from_complex(t);
  CHECK(ph(0, 0) == doctest::Approx(pi / 4).epsilon(1e-15));
  CHECK(ph(0, 1) == pi);
  CHECK(ph(0, 2) == pi);
  CHECK(ph(0, 3) == 0.0);

  const CsiDims d{1, 2, 5, 3};
  const auto csi = random_complex(d, 3);
  const auto angles = phase_from_complex(csi);
  for (std::size_t tx = 0; tx < 2; ++tx)
    for (std::size_t k = 0; k < 5; ++k)
      for (std::size_t p = 0; p < 3; ++p) {
        const auto h = csi.at(0, tx, k, p);
        const double v = angles(p, feature_index(d, 0, tx, k));
        CHECK(std::abs(v - std::arg(h)) <= 1e-12);
        CHECK(v > -pi);
        CHECK(v <= pi);
      }
}

TEST_CASE("Hampel examples") {
  const HampelConfig cfg{};
  CHECK(cfg.window == 5);
  CHECK(cfg.xi == 3.0);
  CHECK(hampel_column(std::vector<double>(7, 1.0), cfg) == std::vector<double>(7, 1.0));
  CHECK(hampel_column(std::vector<double>{1, 1, 10, 1, 1}, cfg) == std::vector<double>{1, 1, 1, 1, 1});
  // Boundary window of a 2-long column: {0, 10} has median 5 and MAD 5.
  CHECK(hampel_column(std::vector<double>{0, 10}, cfg) == std::vector<double>{0, 10});
  CHECK(hampel_column(std::vector<double>{4.0}, cfg) == std::vector<double>{4.0});
}

TEST_CASE("Hampel errors") {
  CHECK_THROWS_AS(hampel_column(std::vector<double>{1, 2, 3}, HampelConfig{4, 3.0}), ConfigError);
  CHECK_THROWS_AS(hampel_column(std::vector<double>{1, 2, 3}, HampelConfig{1, 3.0}), ConfigError);
  CHECK_THROWS_AS(hampel_column(std::vector<double>{1, 2, 3}, HampelConfig{5, 0.0}), ConfigError);
  CHECK_THROWS_AS(hampel_column(std::vector<double>{}, HampelConfig{}), DataError);
}

TEST_CASE("Hampel matches the brute-force oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.index(40);
    const std::size_t w = 3 + 2 * rng.index(4);
    const double xi = rng.uniform(0.5, 4.0);
    const auto x = hampel_fixture(rng, n);
    CHECK(hampel_column(x, HampelConfig{w, xi}) == oracle::hampel(x, w, xi));
  }
}

TEST_CASE("Hampel filter is per column and idempotent on clean data") {
  Rng rng(8);
  FeatureSequence seq(30, 4);
  for (double& v : seq.data()) v = rng.normal(2.0, 0.1);
  seq(10, 2) = 40.0;
  const auto out = hampel_filter(seq, {});
  CHECK(out(10, 2) != 40.0);
  for (std::size_t f = 0; f < 4; ++f) CHECK(out.column(f) == oracle::hampel(seq.column(f), 5, 3.0));

  // Nothing flagged: the input passes through bitwise.
  const auto smooth = column_seq({1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(hampel_filter(smooth, {}) == smooth);
}

TEST_CASE("phase unwrapping") {
  CHECK(unwrap_phase(std::vector<double>{0.0, 0.1, 0.2}) == std::vector<double>{0.0, 0.1, 0.2});
  const auto u = unwrap_phase(std::vector<double>{3.0, -3.0});
  CHECK(u[0] == 3.0);
  CHECK(u[1] == doctest::Approx(3.0 + (2 * pi - 6.0)).epsilon(1e-14));
  CHECK(u[1] == doctest::Approx(3.2832).epsilon(1e-4));

  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(2 + rng.index(30));
    for (double& v : x) v = rng.uniform(-pi, pi);
    const auto y = unwrap_phase(x);
    CHECK(y[0] == x[0]);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double k = (y[i] - x[i]) / (2 * pi);
      CHECK(std::abs(k - std::round(k)) < 1e-9);
      if (i > 0) {
        CHECK(y[i] - y[i - 1] > -pi - 1e-12);
        CHECK(y[i] - y[i - 1] <= pi + 1e-12);
      }
    }
  }
}

TEST_CASE("phase sanitization") {
  const std::size_t k_sub = 30;
  const auto m = centered_subcarrier_index(k_sub);
  CHECK(m.front() == -14.5);
  CHECK(m.back() == 14.5);

  SUBCASE("linear phase is removed") {
    FeatureSequence seq(1, k_sub);
    for (std::size_t k = 0; k < k_sub; ++k) seq(0, k) = 0.07 * m[k] + 0.2;
    {
      const auto out = sanitize_phase(seq, k_sub);
      for (double v : out.data()) CHECK(std::abs(v) <= 1e-12);
    }
  }
  SUBCASE("constant phase is removed") {
    FeatureSequence seq(2, k_sub, std::vector<double>(2 * k_sub, 1.3));
    {
      const auto out = sanitize_phase(seq, k_sub);
      for (double v : out.data()) CHECK(std::abs(v) <= 1e-15);
    }
  }
  SUBCASE("printed sign leaves 2b") {
    FeatureSequence seq(1, k_sub);
    for (std::size_t k = 0; k < k_sub; ++k) seq(0, k) = 0.07 * m[k] + 0.2;
    SanitizeConfig cfg;
    cfg.offset_sign = OffsetSign::paper_plus_b;
    {
      const auto out = sanitize_phase(seq, k_sub, cfg);
      for (double v : out.data()) CHECK(v == doctest::Approx(0.4).epsilon(1e-12));
    }
  }
  SUBCASE("random rows: zero slope and zero mean per packet and pair") {
    Rng rng(5);
    FeatureSequence seq(20, 3 * k_sub);
    for (double& v : seq.data()) v = rng.uniform(-pi, pi);
    const auto out = sanitize_phase(seq, k_sub);
    for (std::size_t p = 0; p < 20; ++p)
      for (std::size_t pair = 0; pair < 3; ++pair) {
        const double* o = out.row(p).data() + pair * k_sub;
        CHECK((o[k_sub - 1] - o[0]) / (m.back() - m.front()) == 0.0);
        double b = 0.0;
        for (std::size_t k = 0; k < k_sub; ++k) b += o[k];
        CHECK(std::abs(b / k_sub) < 1e-12);
      }
  }
  SUBCASE("wrapped linear phase is removed after unwrapping") {
    FeatureSequence seq(1, k_sub);
    for (std::size_t k = 0; k < k_sub; ++k) seq(0, k) = std::remainder(0.4 * m[k] + 1.0, 2 * pi);
    {
      const auto out = sanitize_phase(seq, k_sub);
      for (double v : out.data()) CHECK(std::abs(v) <= 1e-9);
    }
  }
  SUBCASE("errors") {
    FeatureSequence seq(1, 4, std::vector<double>(4, 0.0));
    CHECK_THROWS_AS(sanitize_phase(seq, 1), ConfigError);
    CHECK_THROWS_AS(sanitize_phase(seq, 3), DataError);
    SanitizeConfig bad;
    bad.subcarrier_index = {0, 1, 1, 2};
    CHECK_THROWS_AS(sanitize_phase(seq, 4, bad), ConfigError);
    bad.subcarrier_index = {0, 1, 2};
    CHECK_THROWS_AS(sanitize_phase(seq, 4, bad), ConfigError);
  }
}

TEST_CASE("packet resampling") {
  CHECK(resample_indices(10, 10) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto idx = resample_indices(2000, 100);
  CHECK(idx.size() == 100);
  for (std::size_t i = 0; i < 100; ++i) CHECK(idx[i] == 20 * i);
  for (std::size_t target : {100, 200, 500, 1000, 2000}) CHECK(resample_indices(2000, target).size() == target);
  CHECK_THROWS_AS(resample_indices(10, 11), DataError);
  CHECK_THROWS_AS(resample_indices(10, 0), ConfigError);

  Rng rng(3);
  FeatureSequence seq(37, 5);
  for (double& v : seq.data()) v = rng.uniform();
  CHECK(resample_packets(seq, 37) == seq);
  const auto sub = resample_packets(seq, 9);
  const auto rows = resample_indices(37, 9);
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t f = 0; f < 5; ++f) CHECK(sub(i, f) == seq(rows[i], f));
}

TEST_CASE("standardization") {
  const auto two = standardize_features(column_seq({1, 3}));
  CHECK(two(0, 0) == -1.0);
  CHECK(two(1, 0) == 1.0);
  {
    const auto out = standardize_features(column_seq({2, 2, 2}));
    for (double v : out.data()) CHECK(v == 0.0);
  }
  CHECK_THROWS_AS(standardize_features(column_seq({1})), DataError);

  Rng rng(12);
  FeatureSequence seq(50, 6);
  for (double& v : seq.data()) v = rng.uniform(-3, 8);
  const auto z = standardize_features(seq);
  for (std::size_t f = 0; f < 6; ++f) {
    const auto col = z.column(f);
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= 50.0;
    double var = 0.0;
    for (double v : col) var += (v - mean) * (v - mean);
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(std::sqrt(var / 50.0) - 1.0) < 1e-8);
  }
}

TEST_CASE("prepare_features pipeline") {
  const CsiDims d{3, 1, 8, 40};
  const auto rec = SampleRecord::from_complex(0, Scenario::synthetic, random_complex(d, 4));
  PreprocessConfig cfg;
  cfg.packets = 20;
  const auto amp = prepare_features(rec, cfg);
  CHECK(amp.n_pkt() == 20);
  CHECK(amp.n_feat() == 24);
  const auto ref = resample_packets(hampel_filter(amplitude_from_complex(std::get<ComplexCsiTensor>(rec.payload)), {}), 20);
  CHECK(amp == ref);

  cfg.hampel = false;
  CHECK(prepare_features(rec, cfg) == resample_packets(amplitude_from_complex(std::get<ComplexCsiTensor>(rec.payload)), 20));

  cfg.features = FeatureKind::phase;
  const auto ph = prepare_features(rec, cfg);
  CHECK(ph == resample_packets(sanitize_phase(phase_from_complex(std::get<ComplexCsiTensor>(rec.payload)), 8), 20));

  const auto amp_rec = SampleRecord::from_features(0, Scenario::synthetic, PayloadKind::amplitude, d,
                                                   amplitude_from_complex(std::get<ComplexCsiTensor>(rec.payload)));
  CHECK_THROWS_AS(prepare_features(amp_rec, cfg), DataError);
}
