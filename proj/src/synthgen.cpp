#include "csireid/synthgen.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "csireid/error.hpp"
#include "csireid/preprocess.hpp"

namespace csireid {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kHarmonics = 3;
constexpr double kHarmonicAmplitude = 0.2;
}  // namespace

IdentityProfile make_profile(std::uint64_t seed, std::int64_t subject_id, std::size_t n_sub,
                             std::size_t pairs) {
  if (n_sub < 1 || pairs < 1) throw ConfigError("profile needs >= 1 subcarrier and pair");
  Rng rng(derive_seed(seed, 0x70726f66ULL, static_cast<std::uint64_t>(subject_id)));
  IdentityProfile p;
  p.subject_id = subject_id;
  double amp[kHarmonics];
  double phase[kHarmonics];
  for (int j = 0; j < kHarmonics; ++j) {
    amp[j] = rng.uniform(-kHarmonicAmplitude, kHarmonicAmplitude);
    phase[j] = rng.uniform(0.0, kTwoPi);
  }
  // 1 - sum |amp| >= 0.4, so the curve stays positive.
  p.base_curve.resize(n_sub);
  for (std::size_t k = 0; k < n_sub; ++k) {
    double v = 1.0;
    for (int j = 0; j < kHarmonics; ++j) {
      v += amp[j] * std::cos(kTwoPi * (j + 1) * static_cast<double>(k) /
                                 static_cast<double>(n_sub) + phase[j]);
    }
    p.base_curve[k] = v;
  }
  p.gait_freq = rng.uniform(0.01, 0.05);
  p.gait_depth = rng.uniform(0.05, 0.15);
  p.pair_gain.resize(pairs);
  for (double& g : p.pair_gain) g = rng.uniform(0.8, 1.2);
  return p;
}

double envelope(const IdentityProfile& profile, std::size_t pair, std::size_t sub,
                std::size_t pkt, double jitter) {
  return profile.pair_gain[pair] * profile.base_curve[sub] *
         (1.0 + profile.gait_depth *
                    std::sin(kTwoPi * profile.gait_freq * static_cast<double>(pkt) + jitter));
}

SampleRecord generate_sample(const IdentityProfile& profile, std::size_t n_rx, std::size_t n_tx,
                             double noise_level, std::size_t n_pkt, Rng& rng,
                             double jitter_scale) {
  if (n_pkt < 1) throw ConfigError("sample needs >= 1 packet");
  if (!(noise_level >= 0.0)) throw ConfigError("noise level must be >= 0");
  const std::size_t n_sub = profile.base_curve.size();
  if (n_rx * n_tx != profile.pair_gain.size()) throw ConfigError("profile pair count mismatch");
  const CsiDims dims{n_rx, n_tx, n_sub, n_pkt};
  const auto m = centered_subcarrier_index(n_sub);

  const double jitter = jitter_scale * rng.uniform(-std::numbers::pi, std::numbers::pi);
  std::vector<double> slope(n_pkt);
  std::vector<double> offset(n_pkt);
  for (std::size_t p = 0; p < n_pkt; ++p) {
    slope[p] = rng.uniform(-0.5, 0.5);
    offset[p] = rng.uniform(-std::numbers::pi, std::numbers::pi);
  }

  ComplexCsiTensor csi(dims);
  for (std::size_t rx = 0; rx < n_rx; ++rx) {
    for (std::size_t tx = 0; tx < n_tx; ++tx) {
      const std::size_t pair = rx * n_tx + tx;
      for (std::size_t k = 0; k < n_sub; ++k) {
        for (std::size_t p = 0; p < n_pkt; ++p) {
          const double amp = envelope(profile, pair, k, p, jitter);
          double phi = slope[p] * m[k] + offset[p];
          std::complex<double> h;
          if (noise_level > 0.0) {
            phi += noise_level * rng.normal();
            h = std::polar(amp, phi);
            const double re = noise_level * rng.normal();
            const double im = noise_level * rng.normal();
            h += std::complex<double>(re, im);
          } else {
            h = std::polar(amp, phi);
          }
          csi.at(rx, tx, k, p) = h;
        }
      }
    }
  }
  return SampleRecord::from_complex(profile.subject_id, Scenario::synthetic, std::move(csi));
}

SyntheticCorpus generate_corpus(const DatasetSpec& spec) {
  if (spec.subjects < 1 || spec.samples_per_subject < 1) {
    throw ConfigError("corpus needs >= 1 subject and sample");
  }
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ConfigError("train fraction must be in (0, 1)");
  }
  const auto n_train = static_cast<std::size_t>(
      std::llround(spec.train_fraction * static_cast<double>(spec.samples_per_subject)));
  SyntheticCorpus corpus;
  char name[64];
  for (std::size_t s = 0; s < spec.subjects; ++s) {
    const auto id = static_cast<std::int64_t>(s);
    const auto profile = make_profile(spec.seed, id, spec.dims.n_sub, spec.dims.pairs());
    for (std::size_t i = 0; i < spec.samples_per_subject; ++i) {
      Rng rng(derive_seed(spec.seed, 0x73616d70ULL, s * 1'000'003ULL + i));
      auto record = generate_sample(profile, spec.dims.n_rx, spec.dims.n_tx, spec.noise_level,
                                    spec.dims.n_pkt, rng);
      // Match what a round trip through a CSB file yields.
      for (auto& h : std::get<ComplexCsiTensor>(record.payload).data()) {
        h = {static_cast<float>(h.real()), static_cast<float>(h.imag())};
      }
      corpus.records.push_back(std::move(record));
      std::snprintf(name, sizeof name, "s%03zu_%03zu.csb", s, i);
      corpus.manifest.entries.push_back(
          {name, id, Scenario::synthetic, i < n_train ? Split::train : Split::test});
    }
  }
  return corpus;
}

Manifest generate_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create '" + out_dir.string() + "': " + ec.message());
  auto corpus = generate_corpus(spec);
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    write_sample(corpus.records[i], out_dir / corpus.manifest.entries[i].path);
  }
  save_manifest(corpus.manifest, out_dir / "manifest.csv");
  return corpus.manifest;
}

}  // namespace csireid
