#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "csireid/augment.hpp"
#include "csireid/autodiff/optim.hpp"
#include "csireid/autodiff/tensor.hpp"
#include "csireid/csi_core.hpp"
#include "csireid/encoders.hpp"
#include "csireid/rng.hpp"

namespace csireid {

/// Query/gallery pairs: queries[i] and gallery[i] are two distinct samples of
/// labels[i]; labels are pairwise distinct. Entries index into a sample pool.
struct PairedBatch {
  std::vector<std::size_t> queries;
  std::vector<std::size_t> gallery;
  std::vector<std::int64_t> labels;
};

struct TrainConfig {
  std::size_t epochs = 300;
  std::size_t batch = 8;
  std::size_t folds = 3;
  double val_fraction = 0.2;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  bool augment = true;
  AugmentPolicy augment_policy{};
  ad::AdamState adam{};  // lr here is ignored; the schedule sets it per epoch
  ad::StepDecaySchedule schedule{};

  void validate() const;
};

/// Draws n distinct subjects (each with >= 2 samples) and two distinct
/// samples per subject.
PairedBatch sample_batch(std::span<const std::int64_t> labels, std::size_t n, Rng& rng);

/// sim[i][j] = q_i . g_j for unit-norm signature rows.
std::vector<std::vector<double>> similarity_matrix(std::span<const std::vector<double>> queries,
                                                   std::span<const std::vector<double>> gallery);
/// Differentiable form: queries (N x s) times gallery^T.
ad::Tensor similarity_matrix(const ad::Tensor& queries, const ad::Tensor& gallery);

/// Mean over rows of the cross-entropy between softmax(row / temperature)
/// and the diagonal target.
ad::Tensor in_batch_negative_loss(const ad::Tensor& sim, double temperature = 1.0);

/// Number of disjoint same-subject pairs in a pool: sum over subjects of
/// floor(count / 2).
std::size_t available_pairs(std::span<const std::int64_t> labels);

struct EpochReport {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  std::size_t batches = 0;
};

/// One epoch over a preprocessed pool: ceil(pairs / batch) batches of
/// augment -> encode -> similarity -> loss -> backward -> Adam.
EpochReport train_epoch(const SignatureModel& model, std::span<const FeatureSequence> pool,
                        std::span<const std::int64_t> labels, const TrainConfig& cfg,
                        ad::AdamState& opt, std::size_t epoch, std::uint64_t stream_seed);

/// Loss of one batch with no parameter update (for tests and gradient checks).
ad::Tensor batch_loss(const SignatureModel& model, std::span<const FeatureSequence> queries,
                      std::span<const FeatureSequence> gallery, double temperature, Mode mode,
                      Rng* rng);

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// `folds` independent seeded stratified splits; each subject keeps at
/// least one training sample.
std::vector<FoldSplit> kfold_split(std::span<const std::int64_t> labels, std::size_t folds,
                                   double val_fraction, std::uint64_t seed);

void save_checkpoint(const SignatureModel& model, const std::filesystem::path& path);
/// Builds a model from cfg and loads its parameters; DataError on mismatch.
SignatureModel load_checkpoint(const std::filesystem::path& path, const EncoderConfig& cfg,
                               std::size_t n_feat);

/// Rounds every parameter to the nearest f32 value.
void snap_to_f32(const SignatureModel& model);

}  // namespace csireid
