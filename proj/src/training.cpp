#include "csireid/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "csireid/autodiff/checkpoint.hpp"
#include "csireid/autodiff/ops.hpp"
#include "csireid/error.hpp"

namespace csireid {

namespace {

// Subject id -> pool indices, ordered by id.
std::map<std::int64_t, std::vector<std::size_t>> group_by_subject(
    std::span<const std::int64_t> labels) {
  std::map<std::int64_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  return groups;
}

// Stream tags for derive_seed.
constexpr std::uint64_t kSamplerStream = 1;
constexpr std::uint64_t kAugmentStream = 2;
constexpr std::uint64_t kDropoutStream = 3;

}  // namespace

void TrainConfig::validate() const {
  if (batch < 2) throw ConfigError("batch size must be >= 2");
  if (folds < 1) throw ConfigError("folds must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in (0, 1)");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  augment_policy.validate();
  schedule.validate();
}

PairedBatch sample_batch(std::span<const std::int64_t> labels, std::size_t n, Rng& rng) {
  if (n == 0) throw ConfigError("batch size must be >= 1");
  const auto groups = group_by_subject(labels);
  std::vector<const std::vector<std::size_t>*> eligible;
  std::vector<std::int64_t> ids;
  for (const auto& [id, members] : groups) {
    if (members.size() >= 2) {
      eligible.push_back(&members);
      ids.push_back(id);
    }
  }
  if (eligible.size() < n) {
    throw DataError("batch of " + std::to_string(n) + " needs that many subjects with >= 2 samples; pool has " +
                    std::to_string(eligible.size()));
  }
  std::vector<std::size_t> order(eligible.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < n; ++i) std::swap(order[i], order[i + rng.index(order.size() - i)]);

  PairedBatch batch;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& members = *eligible[order[i]];
    const std::size_t a = rng.index(members.size());
    std::size_t b = rng.index(members.size() - 1);
    if (b >= a) ++b;
    batch.queries.push_back(members[a]);
    batch.gallery.push_back(members[b]);
    batch.labels.push_back(ids[order[i]]);
  }
  return batch;
}

std::vector<std::vector<double>> similarity_matrix(std::span<const std::vector<double>> queries,
                                                   std::span<const std::vector<double>> gallery) {
  std::vector<std::vector<double>> sim(queries.size(), std::vector<double>(gallery.size()));
  for (std::size_t i = 0; i < queries.size(); ++i) {
    for (std::size_t j = 0; j < gallery.size(); ++j) {
      if (queries[i].size() != gallery[j].size()) throw DataError("signature dimension mismatch");
      double dot = 0.0;
      for (std::size_t k = 0; k < queries[i].size(); ++k) dot += queries[i][k] * gallery[j][k];
      sim[i][j] = dot;
    }
  }
  return sim;
}

ad::Tensor similarity_matrix(const ad::Tensor& queries, const ad::Tensor& gallery) {
  if (queries.cols() != gallery.cols()) throw DataError("signature dimension mismatch");
  return ad::matmul(queries, ad::transpose(gallery));
}

ad::Tensor in_batch_negative_loss(const ad::Tensor& sim, double temperature) {
  if (sim.rows() != sim.cols() || sim.rows() == 0) {
    throw DataError("in-batch loss needs a non-empty square similarity matrix");
  }
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  const std::size_t n = sim.rows();
  const ad::Tensor logits = temperature == 1.0 ? sim : ad::scale(sim, 1.0 / temperature);
  const ad::Tensor log_prob = ad::log(ad::softmax(logits, 1));
  std::vector<double> eye(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
  const ad::Tensor picked = ad::sum(ad::mul(log_prob, ad::Tensor::from(n, n, std::move(eye))));
  return ad::scale(picked, -1.0 / static_cast<double>(n));
}

std::size_t available_pairs(std::span<const std::int64_t> labels) {
  std::size_t pairs = 0;
  for (const auto& [id, members] : group_by_subject(labels)) pairs += members.size() / 2;
  return pairs;
}

ad::Tensor batch_loss(const SignatureModel& model, std::span<const FeatureSequence> queries,
                      std::span<const FeatureSequence> gallery, double temperature, Mode mode,
                      Rng* rng) {
  if (queries.size() != gallery.size()) throw DataError("query and gallery lists differ in size");
  const std::size_t n = queries.size();
  std::vector<FeatureSequence> both(queries.begin(), queries.end());
  both.insert(both.end(), gallery.begin(), gallery.end());
  const ad::Tensor sig = model.forward(pack_batch(both), 2 * n, mode, rng);
  const ad::Tensor sq = ad::slice(sig, 0, 0, n);
  const ad::Tensor sg = ad::slice(sig, 0, n, n);
  return in_batch_negative_loss(similarity_matrix(sq, sg), temperature);
}

EpochReport train_epoch(const SignatureModel& model, std::span<const FeatureSequence> pool,
                        std::span<const std::int64_t> labels, const TrainConfig& cfg,
                        ad::AdamState& opt, std::size_t epoch, std::uint64_t stream_seed) {
  cfg.validate();
  if (pool.size() != labels.size()) throw DataError("pool and label counts differ");
  EpochReport report;
  report.epoch = epoch;
  report.lr = ad::schedule_lr(cfg.schedule, epoch);
  opt.lr = report.lr;
  const std::size_t pairs = available_pairs(labels);
  report.batches = (pairs + cfg.batch - 1) / cfg.batch;
  auto params = model.parameter_tensors();

  double total = 0.0;
  std::vector<FeatureSequence> queries(cfg.batch);
  std::vector<FeatureSequence> gallery(cfg.batch);
  for (std::size_t b = 0; b < report.batches; ++b) {
    Rng sampler(derive_seed(stream_seed, kSamplerStream, epoch * 1'000'003ULL + b));
    const PairedBatch pb = sample_batch(labels, cfg.batch, sampler);

    AugmentPolicy policy = cfg.augment_policy;
    policy.rng_seed = derive_seed(stream_seed, kAugmentStream, epoch * 1'000'003ULL + b);
    for (std::size_t i = 0; i < cfg.batch; ++i) {
      queries[i] = cfg.augment ? augment_sample(pool[pb.queries[i]], policy, 2 * i)
                               : pool[pb.queries[i]];
      gallery[i] = cfg.augment ? augment_sample(pool[pb.gallery[i]], policy, 2 * i + 1)
                               : pool[pb.gallery[i]];
    }

    Rng dropout_rng(derive_seed(stream_seed, kDropoutStream, epoch * 1'000'003ULL + b));
    const ad::Tensor loss = batch_loss(model, queries, gallery, cfg.temperature, Mode::train,
                                       &dropout_rng);
    if (!std::isfinite(loss.item())) throw NumericError("training loss is not finite");
    total += loss.item();
    ad::backward(loss);
    ad::adam_step(params, opt);
    snap_to_f32(model);
  }
  report.mean_loss = report.batches > 0 ? total / static_cast<double>(report.batches) : 0.0;
  return report;
}

std::vector<FoldSplit> kfold_split(std::span<const std::int64_t> labels, std::size_t folds,
                                   double val_fraction, std::uint64_t seed) {
  if (folds < 1) throw ConfigError("folds must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in (0, 1)");
  if (labels.empty()) throw DataError("cannot split an empty pool");
  const auto groups = group_by_subject(labels);
  for (const auto& [id, members] : groups) {
    if (members.size() < 2) {
      throw DataError("subject " + std::to_string(id) + " has a single sample; cannot stratify");
    }
  }
  const auto target = static_cast<std::size_t>(
      std::llround(val_fraction * static_cast<double>(labels.size())));

  std::vector<FoldSplit> out;
  for (std::size_t f = 0; f < folds; ++f) {
    Rng rng(derive_seed(seed, f));
    struct Quota {
      std::size_t count;
      double remainder;
      std::size_t capacity;
      std::size_t tiebreak;
    };
    std::vector<Quota> quotas;
    std::vector<std::size_t> tiebreak(groups.size());
    std::iota(tiebreak.begin(), tiebreak.end(), 0);
    rng.shuffle(tiebreak.begin(), tiebreak.end());
    std::size_t assigned = 0;
    std::size_t g = 0;
    for (const auto& [id, members] : groups) {
      const double exact = val_fraction * static_cast<double>(members.size());
      const auto base = std::min(static_cast<std::size_t>(std::floor(exact)), members.size() - 1);
      quotas.push_back({base, exact - std::floor(exact), members.size() - 1, tiebreak[g++]});
      assigned += base;
    }
    std::vector<std::size_t> order(quotas.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (quotas[a].remainder != quotas[b].remainder) return quotas[a].remainder > quotas[b].remainder;
      return quotas[a].tiebreak < quotas[b].tiebreak;
    });
    for (std::size_t pass = 0; pass < 2 && assigned < target; ++pass) {
      for (std::size_t i : order) {
        if (assigned >= target) break;
        if (quotas[i].count < quotas[i].capacity) {
          ++quotas[i].count;
          ++assigned;
        }
      }
    }

    FoldSplit split;
    g = 0;
    for (const auto& [id, members] : groups) {
      std::vector<std::size_t> shuffled = members;
      rng.shuffle(shuffled.begin(), shuffled.end());
      const std::size_t n_val = quotas[g++].count;
      split.validation.insert(split.validation.end(), shuffled.begin(),
                              shuffled.begin() + static_cast<std::ptrdiff_t>(n_val));
      split.train.insert(split.train.end(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_val),
                         shuffled.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    out.push_back(std::move(split));
  }
  return out;
}

void save_checkpoint(const SignatureModel& model, const std::filesystem::path& path) {
  ad::save_tensors(model.parameters(), path);
}

SignatureModel load_checkpoint(const std::filesystem::path& path, const EncoderConfig& cfg,
                               std::size_t n_feat) {
  SignatureModel model(cfg, n_feat, 0);
  model.load_parameters(ad::load_tensors(path));
  return model;
}

void snap_to_f32(const SignatureModel& model) {
  for (const auto& p : model.parameters()) {
    auto v = ad::Tensor(p.tensor).values();
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
  }
}

}  // namespace csireid
