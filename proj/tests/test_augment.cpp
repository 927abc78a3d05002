#include <doctest.h>

#include <array>
#include <cmath>

#include "csireid/augment.hpp"
#include "csireid/error.hpp"

using namespace csireid;

namespace {

FeatureSequence random_seq(std::size_t p, std::size_t f, std::uint64_t seed) {
  Rng rng(seed);
  FeatureSequence s(p, f);
  for (double& v : s.data()) v = rng.uniform(0.5, 2.0);
  return s;
}

}  // namespace

TEST_CASE("policy defaults and validation") {
  const AugmentPolicy p{};
  CHECK(p.apply_prob == 0.9);
  CHECK(p.noise_sigma == 0.02);
  CHECK(p.scale_low == 0.9);
  CHECK(p.scale_high == 1.1);
  CHECK(p.shift_range == 5);
  AugmentPolicy bad;
  bad.apply_prob = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.noise_sigma = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.scale_low = 1.2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.shift_range = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("gaussian noise") {
  const auto seq = random_seq(10, 4, 1);
  Rng rng(2);
  CHECK(add_gaussian_noise(seq, 0.0, rng) == seq);
  CHECK_THROWS_AS(add_gaussian_noise(seq, -0.1, rng), ConfigError);

  const double sigma = 0.02;
  const FeatureSequence zeros(1000, 100);
  const auto noisy = add_gaussian_noise(zeros, sigma, rng);
  const double n = 1e5;
  double mean = 0.0;
  for (double v : noisy.data()) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : noisy.data()) var += (v - mean) * (v - mean);
  var /= n - 1;
  CHECK(std::abs(mean) <= 3 * sigma / std::sqrt(n));
  CHECK(std::abs(var - sigma * sigma) <= 0.05 * sigma * sigma);
}

TEST_CASE("scaling") {
  const auto seq = random_seq(6, 3, 3);
  CHECK(scale_amplitude(seq, 1.0) == seq);
  const auto s = scale_amplitude(FeatureSequence(1, 3, {1, 2, 3}), 1.1);
  CHECK(s(0, 0) == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(s(0, 1) == doctest::Approx(2.2).epsilon(1e-15));
  CHECK(s(0, 2) == doctest::Approx(3.3).epsilon(1e-15));
  const auto r = scale_amplitude(seq, 0.93);
  for (std::size_t i = 0; i < seq.data().size(); ++i) CHECK(r.data()[i] / seq.data()[i] == doctest::Approx(0.93).epsilon(1e-14));
  CHECK_THROWS_AS(scale_amplitude(seq, 0.0), ConfigError);
  CHECK_THROWS_AS(scale_amplitude(seq, -1.0), ConfigError);
}

TEST_CASE("time shift") {
  const FeatureSequence col(5, 1, {1, 2, 3, 4, 5});
  CHECK(time_shift(col, 0) == col);
  CHECK(time_shift(col, 2) == FeatureSequence(5, 1, {3, 3, 1, 2, 3}));
  CHECK(time_shift(col, -2) == FeatureSequence(5, 1, {3, 4, 5, 3, 3}));
  CHECK(time_shift(col, 5) == FeatureSequence(5, 1, {3, 3, 3, 3, 3}));
  CHECK_THROWS_AS(time_shift(col, 6), ConfigError);

  const auto seq = random_seq(20, 7, 9);
  for (std::int64_t t = -5; t <= 5; ++t) {
    const auto out = time_shift(seq, t);
    CHECK(out.n_pkt() == 20);
    CHECK(out.n_feat() == 7);
    for (std::int64_t p = 0; p < 20; ++p) {
      const std::int64_t src = p - t;
      if (src < 0 || src >= 20) continue;
      for (std::size_t f = 0; f < 7; ++f) CHECK(out(p, f) == seq(src, f));
    }
  }
}

TEST_CASE("policy gate") {
  const auto seq = random_seq(12, 3, 4);
  AugmentPolicy never;
  never.apply_prob = 0.0;
  Rng rng(1);
  for (int i = 0; i < 50; ++i) CHECK(apply_policy(seq, never, rng) == seq);

  AugmentPolicy inert;
  inert.apply_prob = 1.0;
  inert.noise_sigma = 0.0;
  inert.scale_low = inert.scale_high = 1.0;
  inert.shift_range = 0;
  for (int i = 0; i < 50; ++i) {
    Augmentation a = Augmentation::none;
    CHECK(apply_policy(seq, inert, rng, &a) == seq);
    CHECK(a != Augmentation::none);
  }
}

TEST_CASE("policy frequencies") {
  const FeatureSequence seq(6, 1, {1, 2, 3, 4, 5, 6});
  const AugmentPolicy policy{};
  Rng rng(77);
  std::array<int, 4> counts{};
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    Augmentation a = Augmentation::none;
    (void)apply_policy(seq, policy, rng, &a);
    ++counts[static_cast<int>(a)];
  }
  const double applied = 1.0 - counts[0] / static_cast<double>(trials);
  CHECK(std::abs(applied - 0.9) <= 0.01);
  const int fired = trials - counts[0];
  for (int k = 1; k < 4; ++k) CHECK(std::abs(counts[k] / static_cast<double>(fired) - 1.0 / 3.0) <= 0.02);
}

TEST_CASE("augmentation draws stay in range") {
  const auto seq = random_seq(30, 2, 5);
  AugmentPolicy policy;
  policy.apply_prob = 1.0;
  for (std::uint64_t i = 0; i < 300; ++i) {
    Augmentation a = Augmentation::none;
    const auto out = augment_sample(seq, policy, i, &a);
    CHECK(out.n_pkt() == seq.n_pkt());
    if (a == Augmentation::scale) {
      const double r = out(0, 0) / seq(0, 0);
      CHECK(r >= 0.9 - 1e-12);
      CHECK(r <= 1.1 + 1e-12);
    }
    if (a == Augmentation::time_shift) {
      bool matched = false;
      for (std::int64_t t = -5; t <= 5 && !matched; ++t) matched = time_shift(seq, t) == out;
      CHECK(matched);
    }
  }
}

TEST_CASE("augmentation is reproducible from seed and sample index") {
  const auto seq = random_seq(16, 4, 6);
  AugmentPolicy policy;
  policy.rng_seed = 1234;
  for (std::uint64_t i = 0; i < 40; ++i) {
    CHECK(augment_sample(seq, policy, i) == augment_sample(seq, policy, i));
  }
  int differs = 0;
  for (std::uint64_t i = 0; i < 40; ++i) differs += augment_sample(seq, policy, i) != augment_sample(seq, policy, i + 100);
  CHECK(differs > 20);
}
