#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "csireid/csi_core.hpp"
#include "csireid/rng.hpp"

namespace csireid {

/// Person-specific channel signature used by the synthetic generator.
struct IdentityProfile {
  std::int64_t subject_id = 0;
  std::vector<double> base_curve;  // per subcarrier, > 0
  double gait_freq = 0.0;          // cycles per packet
  double gait_depth = 0.0;         // relative amplitude, [0, 0.5]
  std::vector<double> pair_gain;   // per (rx, tx) pair
};

/// Deterministic in (seed, subject_id).
IdentityProfile make_profile(std::uint64_t seed, std::int64_t subject_id, std::size_t n_sub,
                             std::size_t pairs);

/// Closed-form amplitude envelope gain * base * (1 + depth * sin(2 pi f p + jitter)).
double envelope(const IdentityProfile& profile, std::size_t pair, std::size_t sub,
                std::size_t pkt, double jitter);

/// One complex capture. Each packet gets a random linear phase across
/// subcarriers (centered indices); `jitter_scale` scales the random gait
/// phase (0 disables it).
SampleRecord generate_sample(const IdentityProfile& profile, std::size_t n_rx, std::size_t n_tx,
                             double noise_level, std::size_t n_pkt, Rng& rng,
                             double jitter_scale = 1.0);

struct DatasetSpec {
  std::uint64_t seed = 0;
  std::size_t subjects = 14;
  std::size_t samples_per_subject = 60;
  CsiDims dims{3, 1, 114, 200};
  double noise_level = 0.05;
  double train_fraction = 0.65;
};

struct SyntheticCorpus {
  std::vector<SampleRecord> records;
  Manifest manifest;  // paths are file names relative to the corpus directory
};

/// In-memory corpus; the first round(train_fraction * n) samples of each
/// subject are train, the rest test.
SyntheticCorpus generate_corpus(const DatasetSpec& spec);

/// generate_corpus written as CSB files plus manifest.csv under out_dir.
Manifest generate_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir);

}  // namespace csireid
