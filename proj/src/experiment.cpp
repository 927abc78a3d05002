#include "csireid/experiment.hpp"

#include <cstdio>
#include <sstream>

#include "csireid/error.hpp"

namespace csireid {

std::size_t Dataset::n_feat() const {
  if (!train_x.empty()) return train_x.front().n_feat();
  if (!test_x.empty()) return test_x.front().n_feat();
  return 0;
}

Dataset prepare_dataset(std::span<const SampleRecord> records, const Manifest& manifest,
                        const PreprocessConfig& cfg) {
  if (records.size() != manifest.entries.size()) {
    throw DataError("record count does not match manifest");
  }
  Dataset data;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& entry = manifest.entries[i];
    if (records[i].subject_id != entry.subject_id) {
      throw DataError("subject of '" + entry.path + "' disagrees with the manifest");
    }
    auto features = prepare_features(records[i], cfg);
    if (data.n_feat() != 0 && features.n_feat() != data.n_feat()) {
      throw DataError("'" + entry.path + "' has a different feature count");
    }
    if (entry.split == Split::train) {
      data.train_x.push_back(std::move(features));
      data.train_y.push_back(entry.subject_id);
    } else {
      data.test_x.push_back(std::move(features));
      data.test_y.push_back(entry.subject_id);
    }
  }
  return data;
}

Dataset load_dataset(const std::filesystem::path& data_dir, const Manifest& manifest,
                     const PreprocessConfig& cfg) {
  manifest.validate();
  Dataset data;
  for (const auto& entry : manifest.entries) {
    const auto record = read_sample(data_dir / entry.path);
    const Manifest one{{entry}};
    auto part = prepare_dataset(std::span<const SampleRecord>(&record, 1), one, cfg);
    for (auto& x : part.train_x) data.train_x.push_back(std::move(x));
    for (auto& x : part.test_x) data.test_x.push_back(std::move(x));
    data.train_y.insert(data.train_y.end(), part.train_y.begin(), part.train_y.end());
    data.test_y.insert(data.test_y.end(), part.test_y.begin(), part.test_y.end());
    if (!data.train_x.empty() && !data.test_x.empty() &&
        data.train_x.front().n_feat() != data.test_x.front().n_feat()) {
      throw DataError("'" + entry.path + "' has a different feature count");
    }
  }
  return data;
}

std::uint64_t fold_model_seed(std::uint64_t seed, std::size_t fold) {
  return derive_seed(seed, 0x6d6f64656cULL, fold);
}

ExperimentResult run_experiment(const Dataset& data, const ExperimentConfig& cfg,
                                const ExperimentHooks& hooks) {
  cfg.train.validate();
  cfg.encoder.validate();
  if (data.train_x.empty()) throw DataError("no training samples");
  if (data.test_x.empty()) throw DataError("no test samples");

  TrainConfig train = cfg.train;
  if (cfg.preprocess.features != FeatureKind::amplitude) train.augment = false;

  ExperimentResult result;
  const auto splits = kfold_split(data.train_y, train.folds, train.val_fraction, train.seed);
  for (std::size_t f = 0; f < splits.size(); ++f) {
    FoldResult fold;
    fold.fold = f;
    std::vector<FeatureSequence> pool_x;
    std::vector<std::int64_t> pool_y;
    for (std::size_t i : splits[f].train) {
      pool_x.push_back(data.train_x[i]);
      pool_y.push_back(data.train_y[i]);
    }

    SignatureModel model(cfg.encoder, data.n_feat(), fold_model_seed(train.seed, f));
    ad::AdamState opt = train.adam;
    const std::uint64_t stream = derive_seed(train.seed, 0x747261696eULL, f);
    for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
      fold.epochs.push_back(train_epoch(model, pool_x, pool_y, train, opt, epoch, stream));
      if (hooks.on_epoch) hooks.on_epoch(f, fold.epochs.back());
    }

    if (!splits[f].validation.empty()) {
      std::vector<FeatureSequence> val_x;
      std::vector<std::int64_t> val_y;
      for (std::size_t i : splits[f].validation) {
        val_x.push_back(data.train_x[i]);
        val_y.push_back(data.train_y[i]);
      }
      try {
        fold.validation = evaluate_retrieval(model, val_x, val_y, true);
        fold.has_validation = true;
      } catch (const DataError&) {
        fold.has_validation = false;  // too few subjects or matches in this split
      }
    }
    fold.test = evaluate_retrieval(model, data.test_x, data.test_y);
    if (hooks.on_model) hooks.on_model(f, model);
    result.folds.push_back(std::move(fold));
  }

  std::vector<RetrievalReport> tests;
  for (const auto& f : result.folds) tests.push_back(f.test);
  result.summary = summarize(tests);
  return result;
}

std::string loss_csv(std::span<const FoldResult> folds, const std::string& config_hash) {
  std::ostringstream out;
  out << "epoch,fold,mean_loss,lr,config_hash\n";
  char buf[160];
  for (const auto& f : folds) {
    for (const auto& e : f.epochs) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,", e.epoch, f.fold, e.mean_loss, e.lr);
      out << buf << config_hash << '\n';
    }
  }
  return out.str();
}

}  // namespace csireid
