#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "csireid/error.hpp"
#include "csireid/preprocess.hpp"
#include "csireid/synthgen.hpp"

using namespace csireid;

namespace {

// Per-feature mean amplitude over packets.
std::vector<double> mean_amplitude(const SampleRecord& r) {
  const auto amp = amplitude_from_complex(std::get<ComplexCsiTensor>(r.payload));
  std::vector<double> m(amp.n_feat(), 0.0);
  for (std::size_t p = 0; p < amp.n_pkt(); ++p)
    for (std::size_t f = 0; f < amp.n_feat(); ++f) m[f] += amp(p, f) / static_cast<double>(amp.n_pkt());
  return m;
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("dataset defaults") {
  const DatasetSpec d{};
  CHECK(d.subjects == 14);
  CHECK(d.samples_per_subject == 60);
  CHECK(d.dims == CsiDims{3, 1, 114, 200});
}

TEST_CASE("identity profiles") {
  const auto a = make_profile(5, 3, 114, 3);
  const auto b = make_profile(5, 3, 114, 3);
  CHECK(a.base_curve == b.base_curve);
  CHECK(a.pair_gain == b.pair_gain);
  CHECK(a.gait_freq == b.gait_freq);
  CHECK(make_profile(6, 3, 114, 3).base_curve != a.base_curve);

  std::vector<IdentityProfile> many;
  for (std::int64_t id = 0; id < 100; ++id) many.push_back(make_profile(1, id, 114, 3));
  for (std::size_t i = 0; i < many.size(); ++i)
    for (std::size_t j = i + 1; j < many.size(); ++j) CHECK(dist(many[i].base_curve, many[j].base_curve) > 1e-3);

  for (std::int64_t id = 0; id < 1000; ++id) {
    const auto p = make_profile(2, id, 30, 2);
    for (double v : p.base_curve) REQUIRE(v >= 0.4 - 1e-12);
    CHECK(p.gait_depth >= 0.0);
    CHECK(p.gait_depth <= 0.5);
    for (double g : p.pair_gain) CHECK(g > 0.0);
  }
  CHECK_THROWS_AS(make_profile(0, 0, 0, 1), ConfigError);
}

TEST_CASE("noiseless samples follow the envelope") {
  const auto profile = make_profile(3, 7, 20, 2);
  Rng r1(1), r2(2);
  const auto s1 = generate_sample(profile, 2, 1, 0.0, 50, r1, 0.0);
  const auto s2 = generate_sample(profile, 2, 1, 0.0, 50, r2, 0.0);
  const auto& c1 = std::get<ComplexCsiTensor>(s1.payload);
  const auto& c2 = std::get<ComplexCsiTensor>(s2.payload);
  CHECK(c1.dims() == CsiDims{2, 1, 20, 50});
  CHECK(s1.subject_id == 7);
  for (std::size_t rx = 0; rx < 2; ++rx)
    for (std::size_t k = 0; k < 20; ++k)
      for (std::size_t p = 0; p < 50; ++p) {
        const double e = envelope(profile, rx, k, p, 0.0);
        CHECK(std::abs(std::abs(c1.at(rx, 0, k, p)) - e) <= 1e-12);
        CHECK(std::abs(std::abs(c1.at(rx, 0, k, p)) - std::abs(c2.at(rx, 0, k, p))) <= 1e-12);
      }
  CHECK(c1 != c2);  // phases differ
}

TEST_CASE("sanitized noiseless phase vanishes") {
  const auto profile = make_profile(4, 1, 114, 3);
  Rng rng(9);
  const auto s = generate_sample(profile, 3, 1, 0.0, 40, rng);
  const auto clean = sanitize_phase(phase_from_complex(std::get<ComplexCsiTensor>(s.payload)), 114);
  for (double v : clean.data()) REQUIRE(std::abs(v) <= 1e-9);
}

TEST_CASE("corpus layout and reproducibility") {
  DatasetSpec spec;
  spec.dims.n_pkt = 4;
  spec.seed = 11;
  const auto corpus = generate_corpus(spec);
  CHECK(corpus.records.size() == 840);
  CHECK(corpus.manifest.count(Split::train) == 546);
  CHECK(corpus.manifest.count(Split::test) == 294);
  std::map<std::int64_t, std::size_t> per;
  for (const auto& e : corpus.manifest.entries) ++per[e.subject_id];
  CHECK(per.size() == 14);
  for (const auto& [id, n] : per) CHECK(n == 60);
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    CHECK(corpus.records[i].subject_id == corpus.manifest.entries[i].subject_id);
    CHECK(corpus.records[i].dims == spec.dims);
  }
  CHECK_NOTHROW(corpus.manifest.validate());

  const auto again = generate_corpus(spec);
  for (std::size_t i = 0; i < corpus.records.size(); i += 37)
    CHECK(std::get<ComplexCsiTensor>(again.records[i].payload) == std::get<ComplexCsiTensor>(corpus.records[i].payload));

  DatasetSpec bad = spec;
  bad.train_fraction = 1.0;
  CHECK_THROWS_AS(generate_corpus(bad), ConfigError);
}

TEST_CASE("written dataset reads back bitwise") {
  const auto dir = std::filesystem::temp_directory_path() / "csireid_synth_test";
  std::filesystem::remove_all(dir);
  DatasetSpec spec;
  spec.subjects = 3;
  spec.samples_per_subject = 4;
  spec.dims.n_pkt = 10;
  const auto manifest = generate_dataset(spec, dir);
  CHECK(load_manifest(dir / "manifest.csv").entries == manifest.entries);
  const auto corpus = generate_corpus(spec);
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto r = read_sample(dir / manifest.entries[i].path);
    CHECK(std::get<ComplexCsiTensor>(r.payload) == std::get<ComplexCsiTensor>(corpus.records[i].payload));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("subjects are separable at low noise") {
  DatasetSpec spec;
  spec.samples_per_subject = 8;
  spec.noise_level = 0.01;
  spec.seed = 21;
  const auto corpus = generate_corpus(spec);
  std::map<std::int64_t, std::vector<std::vector<double>>> by_subject;
  for (const auto& r : corpus.records) by_subject[r.subject_id].push_back(mean_amplitude(r));

  std::map<std::int64_t, std::vector<double>> centroid;
  for (const auto& [id, xs] : by_subject) {
    std::vector<double> c(xs[0].size(), 0.0);
    for (const auto& x : xs)
      for (std::size_t f = 0; f < c.size(); ++f) c[f] += x[f] / static_cast<double>(xs.size());
    centroid[id] = c;
  }
  double intra = 0.0, inter = 1e300;
  for (const auto& [id, xs] : by_subject)
    for (const auto& x : xs) intra = std::max(intra, dist(x, centroid[id]));
  for (const auto& [a, ca] : centroid)
    for (const auto& [b, cb] : centroid)
      if (a < b) inter = std::min(inter, dist(ca, cb));
  CHECK(2.0 * intra < 0.5 * inter);
}
