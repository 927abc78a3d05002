#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "csireid/csi_core.hpp"
#include "csireid/encoders.hpp"
#include "csireid/evaluation.hpp"
#include "csireid/preprocess.hpp"
#include "csireid/training.hpp"

namespace csireid {

struct ExperimentConfig {
  EncoderConfig encoder{};
  PreprocessConfig preprocess{};
  TrainConfig train{};
};

/// Preprocessed model inputs split by the manifest.
struct Dataset {
  std::vector<FeatureSequence> train_x;
  std::vector<std::int64_t> train_y;
  std::vector<FeatureSequence> test_x;
  std::vector<std::int64_t> test_y;

  [[nodiscard]] std::size_t n_feat() const;
};

/// records[i] belongs to manifest.entries[i].
Dataset prepare_dataset(std::span<const SampleRecord> records, const Manifest& manifest,
                        const PreprocessConfig& cfg);

/// Reads every manifest entry (paths relative to data_dir) and prepares it.
Dataset load_dataset(const std::filesystem::path& data_dir, const Manifest& manifest,
                     const PreprocessConfig& cfg);

struct FoldResult {
  std::size_t fold = 0;
  std::vector<EpochReport> epochs;
  bool has_validation = false;
  RetrievalReport validation{};
  RetrievalReport test{};
};

struct ExperimentResult {
  std::vector<FoldResult> folds;
  std::vector<MetricSummary> summary;  // test metrics across folds
};

struct ExperimentHooks {
  std::function<void(std::size_t fold, const EpochReport&)> on_epoch{};
  std::function<void(std::size_t fold, const SignatureModel&)> on_model{};
};

/// Seed of the model trained for a fold.
std::uint64_t fold_model_seed(std::uint64_t seed, std::size_t fold);

/// For each fold: fresh model, cfg.train.epochs epochs on the fold's
/// training part, validation and test retrieval.
ExperimentResult run_experiment(const Dataset& data, const ExperimentConfig& cfg,
                                const ExperimentHooks& hooks = {});

/// "epoch,fold,mean_loss,lr,config_hash" lines for one or all folds.
std::string loss_csv(std::span<const FoldResult> folds, const std::string& config_hash);

}  // namespace csireid
