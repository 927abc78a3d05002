#include "csireid/augment.hpp"

#include <algorithm>
#include <cstdlib>

#include "csireid/error.hpp"

namespace csireid {

void AugmentPolicy::validate() const {
  if (!(apply_prob >= 0.0 && apply_prob <= 1.0)) throw ConfigError("augment_prob must be in [0, 1]");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (!(scale_low <= scale_high) || !(scale_low > 0.0)) {
    throw ConfigError("scale range must satisfy 0 < low <= high");
  }
  if (shift_range < 0) throw ConfigError("shift_range must be >= 0");
}

FeatureSequence add_gaussian_noise(const FeatureSequence& seq, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
  FeatureSequence out = seq;
  if (sigma == 0.0) return out;
  for (double& v : out.data()) v += rng.normal(0.0, sigma);
  return out;
}

FeatureSequence scale_amplitude(const FeatureSequence& seq, double factor) {
  if (!(factor > 0.0)) throw ConfigError("scale factor must be positive");
  FeatureSequence out = seq;
  for (double& v : out.data()) v *= factor;
  return out;
}

FeatureSequence time_shift(const FeatureSequence& seq, std::int64_t t_shift) {
  const auto n = static_cast<std::int64_t>(seq.n_pkt());
  if (std::llabs(t_shift) > n) throw ConfigError("time shift exceeds sequence length");
  if (t_shift == 0) return seq;
  FeatureSequence out(seq.n_pkt(), seq.n_feat());
  for (std::size_t f = 0; f < seq.n_feat(); ++f) {
    double mean = 0.0;
    for (std::size_t p = 0; p < seq.n_pkt(); ++p) mean += seq(p, f);
    mean /= static_cast<double>(n);
    for (std::int64_t t = 0; t < n; ++t) {
      const std::int64_t src = t - t_shift;
      out(static_cast<std::size_t>(t), f) =
          (src >= 0 && src < n) ? seq(static_cast<std::size_t>(src), f) : mean;
    }
  }
  return out;
}

FeatureSequence apply_policy(const FeatureSequence& seq, const AugmentPolicy& policy, Rng& rng,
                             Augmentation* applied) {
  policy.validate();
  // Draw order is fixed: gate, choice, then the augmentation's parameter(s).
  const double gate = rng.uniform();
  Augmentation which = Augmentation::none;
  if (gate < policy.apply_prob) which = static_cast<Augmentation>(1 + rng.uniform_int(0, 2));
  if (applied != nullptr) *applied = which;
  switch (which) {
    case Augmentation::none: return seq;
    case Augmentation::gaussian_noise: return add_gaussian_noise(seq, policy.noise_sigma, rng);
    case Augmentation::scale:
      return scale_amplitude(seq, rng.uniform(policy.scale_low, policy.scale_high));
    case Augmentation::time_shift: {
      const auto bound = std::min<std::int64_t>(policy.shift_range,
                                                static_cast<std::int64_t>(seq.n_pkt()));
      return time_shift(seq, rng.uniform_int(-bound, bound));
    }
  }
  return seq;
}

FeatureSequence augment_sample(const FeatureSequence& seq, const AugmentPolicy& policy,
                               std::uint64_t sample_index, Augmentation* applied) {
  Rng rng(derive_seed(policy.rng_seed, sample_index));
  return apply_policy(seq, policy, rng, applied);
}

}  // namespace csireid
