#pragma once

#include <cstdint>

#include "csireid/csi_core.hpp"
#include "csireid/rng.hpp"

namespace csireid {

struct AugmentPolicy {
  double apply_prob = 0.9;
  double noise_sigma = 0.02;
  double scale_low = 0.9;
  double scale_high = 1.1;
  std::int64_t shift_range = 5;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

enum class Augmentation { none, gaussian_noise, scale, time_shift };

FeatureSequence add_gaussian_noise(const FeatureSequence& seq, double sigma, Rng& rng);
FeatureSequence scale_amplitude(const FeatureSequence& seq, double factor);

/// Moves every column by t_shift packets (positive = later); vacated slots
/// take the column's original mean.
FeatureSequence time_shift(const FeatureSequence& seq, std::int64_t t_shift);

/// With probability apply_prob applies one augmentation picked uniformly.
FeatureSequence apply_policy(const FeatureSequence& seq, const AugmentPolicy& policy, Rng& rng,
                             Augmentation* applied = nullptr);

/// apply_policy with a generator derived from (policy.rng_seed, sample_index).
FeatureSequence augment_sample(const FeatureSequence& seq, const AugmentPolicy& policy,
                               std::uint64_t sample_index, Augmentation* applied = nullptr);

}  // namespace csireid
