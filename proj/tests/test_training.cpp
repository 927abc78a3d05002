#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "csireid/autodiff/ops.hpp"
#include "csireid/error.hpp"
#include "csireid/evaluation.hpp"
#include "csireid/training.hpp"
#include "oracles.hpp"

using namespace csireid;
using ad::Tensor;

namespace {

std::vector<std::int64_t> pool_labels(std::size_t subjects, std::size_t per) {
  std::vector<std::int64_t> out;
  for (std::size_t s = 0; s < subjects; ++s)
    for (std::size_t i = 0; i < per; ++i) out.push_back(static_cast<std::int64_t>(100 + s));
  return out;
}

Tensor unit_rows(Rng& rng, std::size_t n, std::size_t d) {
  std::vector<double> v(n * d);
  for (std::size_t r = 0; r < n; ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      v[r * d + c] = rng.uniform(-1, 1);
      ss += v[r * d + c] * v[r * d + c];
    }
    for (std::size_t c = 0; c < d; ++c) v[r * d + c] /= std::sqrt(ss);
  }
  return Tensor::from(n, d, std::move(v));
}

std::vector<std::vector<double>> to_rows(const Tensor& t) {
  std::vector<std::vector<double>> out(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) out[r][c] = t.at(r, c);
  return out;
}

double loss_of(const std::vector<std::vector<double>>& sim, double tau = 1.0) {
  std::vector<double> flat;
  for (const auto& row : sim) flat.insert(flat.end(), row.begin(), row.end());
  return in_batch_negative_loss(Tensor::from(sim.size(), sim.size(), flat), tau).item();
}

// Subject s: sinusoid of subject-specific frequency on every feature plus noise.
std::vector<FeatureSequence> separable_pool(const std::vector<std::int64_t>& labels, std::size_t p,
                                            std::size_t f, Rng& rng) {
  std::vector<FeatureSequence> pool;
  for (auto label : labels) {
    FeatureSequence s(p, f);
    const double freq = 0.05 * static_cast<double>(label % 7 + 1);
    for (std::size_t t = 0; t < p; ++t)
      for (std::size_t k = 0; k < f; ++k)
        s(t, k) = std::sin(freq * static_cast<double>(t) + 0.4 * static_cast<double>(k)) + rng.normal(0.0, 0.05);
    pool.push_back(std::move(s));
  }
  return pool;
}

EncoderConfig tiny(Arch arch) {
  EncoderConfig cfg;
  cfg.arch = arch;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.signature_dim = 8;
  cfg.dropout = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("training defaults") {
  const TrainConfig c{};
  CHECK(c.epochs == 300);
  CHECK(c.batch == 8);
  CHECK(c.folds == 3);
  CHECK(c.val_fraction == 0.2);
  CHECK(c.schedule.base_lr == 1e-4);
  CHECK(c.schedule.gamma == 0.95);
  CHECK(c.schedule.step_epochs == 50);
  CHECK(c.augment);
  TrainConfig bad = c;
  bad.batch = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.temperature = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("batch sampler") {
  const auto labels = pool_labels(10, 5);
  Rng rng(3);
  std::map<std::int64_t, int> hits;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto b = sample_batch(labels, 8, rng);
    REQUIRE(b.queries.size() == 8);
    REQUIRE(b.gallery.size() == 8);
    CHECK(std::set<std::int64_t>(b.labels.begin(), b.labels.end()).size() == 8);
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(b.queries[i] != b.gallery[i]);
      CHECK(labels[b.queries[i]] == b.labels[i]);
      CHECK(labels[b.gallery[i]] == b.labels[i]);
      ++hits[b.labels[i]];
    }
  }
  // Each subject is drawn with probability 8/10.
  for (const auto& [id, n] : hits) CHECK(std::abs(n / 2000.0 - 0.8) < 0.04);

  Rng again(3);
  const auto first = sample_batch(labels, 8, again);
  Rng again2(3);
  CHECK(sample_batch(labels, 8, again2).queries == first.queries);

  // Subjects with a single sample are not eligible.
  std::vector<std::int64_t> sparse{1, 2, 2, 3, 3, 4};
  CHECK_THROWS_AS(sample_batch(sparse, 3, rng), DataError);
  CHECK(sample_batch(sparse, 2, rng).labels.size() == 2);
  CHECK(available_pairs(sparse) == 2);
  CHECK(available_pairs(pool_labels(14, 60)) == 14 * 30);
}

TEST_CASE("similarity matrix") {
  Rng rng(4);
  const auto q = unit_rows(rng, 5, 7);
  const auto g = unit_rows(rng, 5, 7);
  const auto sim = similarity_matrix(q, g);
  const auto rows = similarity_matrix(to_rows(q), to_rows(g));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double dot = 0.0, nq = 0.0, ng = 0.0;
      for (std::size_t k = 0; k < 7; ++k) {
        dot += q.at(i, k) * g.at(j, k);
        nq += q.at(i, k) * q.at(i, k);
        ng += g.at(j, k) * g.at(j, k);
      }
      const double cosine = dot / std::sqrt(nq * ng);
      CHECK(sim.at(i, j) == doctest::Approx(cosine).epsilon(1e-12));
      CHECK(rows[i][j] == doctest::Approx(cosine).epsilon(1e-12));
      CHECK(std::abs(sim.at(i, j)) <= 1.0 + 1e-12);
    }
  const auto self = similarity_matrix(q, q);
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(self.at(i, i) - 1.0) <= 1e-12);
  CHECK_THROWS_AS(similarity_matrix(q, unit_rows(rng, 5, 6)), DataError);
}

TEST_CASE("in-batch loss anchors") {
  CHECK(loss_of({{0.3}}) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(loss_of({{1, 0}, {0, 1}}) == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-12));
  CHECK(loss_of({{1, 0}, {0, 1}}) == doctest::Approx(0.31326).epsilon(1e-5));
  for (std::size_t n : {2u, 5u, 8u}) {
    std::vector<std::vector<double>> same(n, std::vector<double>(n, 1.0));
    CHECK(loss_of(same) == doctest::Approx(std::log(static_cast<double>(n))).epsilon(1e-12));
  }
  CHECK_THROWS_AS(in_batch_negative_loss(Tensor::zeros(2, 3)), DataError);
  CHECK_THROWS_AS(in_batch_negative_loss(Tensor::zeros(2, 2), 0.0), ConfigError);
}

TEST_CASE("in-batch loss properties") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.index(7);
    std::vector<std::vector<double>> sim(n, std::vector<double>(n));
    for (auto& row : sim)
      for (double& v : row) v = rng.uniform(-1, 1);
    const double tau = rng.uniform(0.05, 2.0);
    const double l = loss_of(sim, tau);
    CHECK(l == doctest::Approx(oracle::in_batch_loss(sim, tau)).epsilon(1e-12));
    CHECK(l > 0.0);

    // Relabeling pairs permutes rows and columns together.
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm.begin(), perm.end());
    std::vector<std::vector<double>> permuted(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) permuted[i][j] = sim[perm[i]][perm[j]];
    CHECK(loss_of(permuted, tau) == doctest::Approx(l).epsilon(1e-12));

    // Raising a positive or lowering a negative cannot raise the loss.
    auto up = sim;
    const std::size_t i = rng.index(n);
    up[i][i] += 0.3;
    CHECK(loss_of(up, tau) <= l + 1e-15);
    auto down = sim;
    const std::size_t j = (i + 1) % n;
    down[i][j] -= 0.3;
    CHECK(loss_of(down, tau) <= l + 1e-15);
  }
}

TEST_CASE("k-fold split") {
  const std::vector<std::int64_t> ten(10, 4);
  const auto one = kfold_split(ten, 1, 0.2, 0);
  CHECK(one[0].train.size() == 8);
  CHECK(one[0].validation.size() == 2);

  const auto labels = pool_labels(14, 39);
  const auto folds = kfold_split(labels, 3, 0.2, 7);
  REQUIRE(folds.size() == 3);
  for (const auto& f : folds) {
    std::set<std::size_t> all(f.train.begin(), f.train.end());
    for (auto v : f.validation) CHECK(all.insert(v).second);
    CHECK(all.size() == labels.size());
    CHECK(f.validation.size() == static_cast<std::size_t>(std::llround(0.2 * labels.size())));
    std::map<std::int64_t, std::size_t> per;
    for (auto t : f.train) ++per[labels[t]];
    CHECK(per.size() == 14);
  }
  CHECK(folds[0].validation != folds[1].validation);
  CHECK(kfold_split(labels, 3, 0.2, 7)[2].validation == folds[2].validation);

  const std::vector<std::int64_t> single{1, 1, 2};
  CHECK_THROWS_AS(kfold_split(single, 1, 0.2, 0), DataError);
  CHECK_THROWS_AS(kfold_split(ten, 0, 0.2, 0), ConfigError);
  CHECK_THROWS_AS(kfold_split(ten, 1, 1.0, 0), ConfigError);
}

TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
  Rng rng(6);
  const auto labels = pool_labels(4, 4);
  const auto pool = separable_pool(labels, 6, 3, rng);
  for (Arch arch : {Arch::lstm, Arch::transformer}) {
    const SignatureModel model(tiny(arch), 3, 1);
    std::vector<std::vector<double>> before;
    for (const auto& p : model.parameters()) before.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
    TrainConfig cfg;
    cfg.batch = 4;
    cfg.schedule.base_lr = 0.0;
    ad::AdamState opt;
    const auto report = train_epoch(model, pool, labels, cfg, opt, 0, 9);
    CHECK(report.batches == 2);
    CHECK(report.lr == 0.0);
    CHECK(std::isfinite(report.mean_loss));
    for (std::size_t i = 0; i < before.size(); ++i) {
      const auto now = model.parameters()[i].tensor.values();
      CHECK(std::vector<double>(now.begin(), now.end()) == before[i]);
    }
  }
}

TEST_CASE("training lowers the loss on a separable pool") {
  Rng rng(7);
  const auto labels = pool_labels(4, 6);
  const auto pool = separable_pool(labels, 12, 4, rng);
  for (Arch arch : {Arch::lstm, Arch::bilstm, Arch::transformer}) {
    INFO(to_string(arch));
    const SignatureModel model(tiny(arch), 4, 2);
    TrainConfig cfg;
    cfg.batch = 4;
    cfg.augment = false;
    cfg.temperature = 0.1;
    cfg.schedule.base_lr = 1e-2;
    ad::AdamState opt;
    std::vector<double> losses;
    for (std::size_t e = 0; e < 40; ++e) losses.push_back(train_epoch(model, pool, labels, cfg, opt, e, 3).mean_loss);
    const double head = (losses[0] + losses[1] + losses[2]) / 3.0;
    const double tail = (losses[37] + losses[38] + losses[39]) / 3.0;
    CHECK(tail < 0.5 * head);
    CHECK(evaluate_retrieval(model, pool, labels).rank1 == 1.0);
    for (const auto& p : model.parameters())
      for (double v : p.tensor.values()) CHECK(v == static_cast<double>(static_cast<float>(v)));
  }
}

TEST_CASE("train_epoch is reproducible") {
  Rng rng(8);
  const auto labels = pool_labels(4, 4);
  const auto pool = separable_pool(labels, 6, 3, rng);
  auto run = [&] {
    const SignatureModel model(tiny(Arch::transformer), 3, 5);
    TrainConfig cfg;
    cfg.batch = 4;
    cfg.schedule.base_lr = 1e-3;
    ad::AdamState opt;
    std::vector<double> out;
    for (std::size_t e = 0; e < 3; ++e) out.push_back(train_epoch(model, pool, labels, cfg, opt, e, 4).mean_loss);
    for (const auto& p : model.parameters()) out.insert(out.end(), p.tensor.values().begin(), p.tensor.values().end());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "csireid_training_ckpt";
  std::filesystem::create_directories(dir);
  Rng rng(9);
  std::vector<FeatureSequence> seqs;
  for (int i = 0; i < 4; ++i) {
    FeatureSequence s(5, 3);
    for (double& v : s.data()) v = rng.uniform(-1, 1);
    seqs.push_back(std::move(s));
  }
  for (Arch arch : {Arch::lstm, Arch::bilstm, Arch::transformer}) {
    const auto cfg = tiny(arch);
    const SignatureModel model(cfg, 3, 13);
    const auto path = dir / "m.wfck";
    save_checkpoint(model, path);

    std::size_t expected = 8;
    for (const auto& p : model.parameters()) expected += 2 + p.name.size() + 1 + 8 + 4 * p.tensor.size();
    CHECK(std::filesystem::file_size(path) == expected);

    const auto loaded = load_checkpoint(path, cfg, 3);
    CHECK(loaded.signatures(seqs) == model.signatures(seqs));

    EncoderConfig other = cfg;
    other.hidden = 4;
    CHECK_THROWS_AS(load_checkpoint(path, other, 3), DataError);
    CHECK_THROWS_AS(load_checkpoint(path, cfg, 4), DataError);
  }
  std::filesystem::remove_all(dir);
}
