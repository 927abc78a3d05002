#include "csireid/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "csireid/autodiff/grad_check.hpp"
#include "csireid/autodiff/ops.hpp"
#include "csireid/error.hpp"
#include "csireid/experiment.hpp"
#include "csireid/synthgen.hpp"

namespace csireid::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kGradTolerance = 1e-3;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

fs::path prepare_out_dir(const RunConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
  write_text(dir / "effective_config.txt", dump_config(cfg));
  return dir;
}

fs::path require_data_dir(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) throw ConfigError("this command needs a data directory (--data)");
  const fs::path dir(cfg.data_dir);
  if (!fs::is_directory(dir)) throw DataError("data directory '" + dir.string() + "' does not exist");
  return dir;
}

fs::path checkpoint_dir(const RunConfig& cfg) {
  return cfg.checkpoint.empty() ? fs::path(cfg.out_dir) : fs::path(cfg.checkpoint);
}

std::string fold_file(const char* stem, std::size_t fold, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_fold%zu.%s", stem, fold, ext);
  return buf;
}

ad::Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0,
                         double hi = 1.0) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform(lo, hi);
  return ad::Tensor::from(rows, cols, std::move(v));
}

// Values with |x| >= 0.1 keep relu away from its kink.
ad::Tensor away_from_zero(Rng& rng, std::size_t rows, std::size_t cols) {
  std::vector<double> v(rows * cols);
  for (double& x : v) {
    const double m = rng.uniform(0.1, 1.0);
    x = rng.uniform() < 0.5 ? -m : m;
  }
  return ad::Tensor::from(rows, cols, std::move(v));
}

// sum(y * w) with a fixed random weight of y's shape.
std::function<ad::Tensor(const ad::Tensor&)> weighted(std::function<ad::Tensor(const ad::Tensor&)> op,
                                                      std::uint64_t seed) {
  auto weights = std::make_shared<std::vector<double>>();
  return [op = std::move(op), weights, seed](const ad::Tensor& x) {
    const ad::Tensor y = op(x);
    if (weights->size() != y.size()) {
      Rng rng(seed);
      weights->resize(y.size());
      for (double& w : *weights) w = rng.uniform(-1.0, 1.0);
    }
    return ad::sum(ad::mul(y, ad::Tensor::from(y.rows(), y.cols(), *weights)));
  };
}

double metric_value(const std::vector<MetricSummary>& rows, const std::string& name, bool stddev) {
  for (const auto& r : rows) {
    if (r.metric == name) return stddev ? r.stddev : r.value;
  }
  return 0.0;
}

}  // namespace

std::vector<GradCheckRow> gradcheck_primitives(std::uint64_t seed, double eps) {
  Rng rng(seed);
  const ad::Tensor a = random_tensor(rng, 3, 4);
  const ad::Tensor b = random_tensor(rng, 4, 2);
  const ad::Tensor c = random_tensor(rng, 3, 4);
  const ad::Tensor row = random_tensor(rng, 1, 4);
  const ad::Tensor scalar = random_tensor(rng, 1, 1);
  const ad::Tensor positive = random_tensor(rng, 3, 4, 0.5, 2.0);
  const ad::Tensor kinked = away_from_zero(rng, 3, 4);
  const ad::Tensor gain = random_tensor(rng, 1, 4, 0.5, 1.5);
  const ad::Tensor bias = random_tensor(rng, 1, 4);
  const std::uint64_t drop_seed = derive_seed(seed, 7);

  struct Case {
    const char* name;
    std::function<ad::Tensor(const ad::Tensor&)> op;
    ad::Tensor x;
  };
  const std::vector<std::size_t> gather{2, 0, 2, 1};
  std::vector<Case> cases = {
      {"matmul.lhs", [&](const ad::Tensor& x) { return ad::matmul(x, b); }, a},
      {"matmul.rhs", [&](const ad::Tensor& x) { return ad::matmul(a, x); }, b},
      {"add", [&](const ad::Tensor& x) { return ad::add(x, c); }, a},
      {"add.row_broadcast", [&](const ad::Tensor& x) { return ad::add(a, x); }, row},
      {"sub.lhs", [&](const ad::Tensor& x) { return ad::sub(x, c); }, a},
      {"sub.rhs", [&](const ad::Tensor& x) { return ad::sub(a, x); }, c},
      {"mul", [&](const ad::Tensor& x) { return ad::mul(x, c); }, a},
      {"mul.self", [&](const ad::Tensor& x) { return ad::mul(x, x); }, a},
      {"mul.row_broadcast", [&](const ad::Tensor& x) { return ad::mul(a, x); }, row},
      {"mul.scalar_broadcast", [&](const ad::Tensor& x) { return ad::mul(a, x); }, scalar},
      {"scale", [&](const ad::Tensor& x) { return ad::scale(x, -1.7); }, a},
      {"concat.axis0",
       [&](const ad::Tensor& x) {
         const ad::Tensor parts[] = {x, c, x};
         return ad::concat(parts, 0);
       },
       a},
      {"concat.axis1",
       [&](const ad::Tensor& x) {
         const ad::Tensor parts[] = {c, x};
         return ad::concat(parts, 1);
       },
       a},
      {"slice.axis0", [&](const ad::Tensor& x) { return ad::slice(x, 0, 1, 2); }, a},
      {"slice.axis1", [&](const ad::Tensor& x) { return ad::slice(x, 1, 1, 3); }, a},
      {"gather_rows", [&](const ad::Tensor& x) { return ad::gather_rows(x, gather); }, a},
      {"transpose", [&](const ad::Tensor& x) { return ad::transpose(x); }, a},
      {"mean_axis.0", [&](const ad::Tensor& x) { return ad::mean_axis(x, 0); }, a},
      {"mean_axis.1", [&](const ad::Tensor& x) { return ad::mean_axis(x, 1); }, a},
      {"sum", [&](const ad::Tensor& x) { return ad::sum(x); }, a},
      {"mean", [&](const ad::Tensor& x) { return ad::mean(x); }, a},
      {"tanh", [&](const ad::Tensor& x) { return ad::tanh(x); }, a},
      {"sigmoid", [&](const ad::Tensor& x) { return ad::sigmoid(x); }, a},
      {"relu", [&](const ad::Tensor& x) { return ad::relu(x); }, kinked},
      {"exp", [&](const ad::Tensor& x) { return ad::exp(x); }, a},
      {"log", [&](const ad::Tensor& x) { return ad::log(x); }, positive},
      {"softmax.axis1", [&](const ad::Tensor& x) { return ad::softmax(x, 1); }, a},
      {"softmax.axis0", [&](const ad::Tensor& x) { return ad::softmax(x, 0); }, a},
      {"layer_norm.x", [&](const ad::Tensor& x) { return ad::layer_norm(x, gain, bias); }, a},
      {"layer_norm.gain", [&](const ad::Tensor& x) { return ad::layer_norm(a, x, bias); }, gain},
      {"layer_norm.bias", [&](const ad::Tensor& x) { return ad::layer_norm(a, gain, x); }, bias},
      {"dropout",
       [&](const ad::Tensor& x) {
         Rng r(drop_seed);
         return ad::dropout(x, 0.7, r, true);
       },
       a},
      {"l2_normalize.axis1", [&](const ad::Tensor& x) { return ad::l2_normalize(x, 1); }, a},
      {"l2_normalize.axis0", [&](const ad::Tensor& x) { return ad::l2_normalize(x, 0); }, a},
  };

  std::vector<GradCheckRow> rows;
  std::uint64_t w = 0;
  for (auto& cs : cases) {
    // Each case perturbs its own copy so shared inputs stay untouched.
    const auto x = ad::Tensor::from(cs.x.rows(), cs.x.cols(),
                                    std::vector<double>(cs.x.values().begin(), cs.x.values().end()));
    const auto report = ad::grad_check(weighted(cs.op, derive_seed(seed, 100, w++)), x, eps);
    rows.push_back({cs.name, "primitive", report.max_rel_error, report.entries_checked});
  }
  return rows;
}

std::vector<GradCheckRow> gradcheck_model(const EncoderConfig& cfg, std::size_t n_feat,
                                          std::size_t packets, std::uint64_t seed, double eps,
                                          std::size_t max_entries) {
  cfg.validate();
  const SignatureModel model(cfg, n_feat, seed);
  constexpr std::size_t kPairs = 2;
  Rng rng(derive_seed(seed, 1));
  const ad::Tensor input = random_tensor(rng, 2 * kPairs * packets, n_feat);
  const std::uint64_t drop_seed = derive_seed(seed, 2);
  const std::string arch(to_string(cfg.arch));

  auto loss_of = [&](const ad::Tensor& x) {
    Rng drop(drop_seed);
    const ad::Tensor sig = model.forward(x, 2 * kPairs, Mode::train, &drop);
    const ad::Tensor q = ad::slice(sig, 0, 0, kPairs);
    const ad::Tensor g = ad::slice(sig, 0, kPairs, kPairs);
    return in_batch_negative_loss(similarity_matrix(q, g), 1.0);
  };
  auto clear_all = [&] {
    for (const auto& p : model.parameters()) ad::Tensor(p.tensor).clear_grad();
  };

  std::vector<GradCheckRow> rows;
  {
    const auto report = ad::grad_check(loss_of, input, eps, max_entries, derive_seed(seed, 3));
    rows.push_back({arch + "/input", "model", report.max_rel_error, report.entries_checked});
    clear_all();
  }
  std::uint64_t i = 0;
  for (const auto& p : model.parameters()) {
    const auto report = ad::grad_check([&](const ad::Tensor&) { return loss_of(input.detach()); },
                                       p.tensor, eps, max_entries, derive_seed(seed, 4, i++));
    rows.push_back({arch + "/" + p.name, "model", report.max_rel_error, report.entries_checked});
    clear_all();
  }
  return rows;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, std::span<const SampleRecord> records,
                                      const Manifest& manifest,
                                      const std::function<void(const AblationRow&)>& on_row) {
  std::vector<AblationRow> rows;
  for (const std::size_t packets : cfg.ablate_packets) {
    for (const bool hampel : cfg.ablate_hampel) {
      RunConfig prep_cfg = cfg;
      apply_config_value(prep_cfg, "packets", std::to_string(packets));
      apply_config_value(prep_cfg, "hampel", hampel ? "true" : "false");
      const Dataset data = prepare_dataset(records, manifest, prep_cfg.experiment.preprocess);
      for (const Arch arch : cfg.ablate_archs) {
        for (const std::size_t layers : cfg.ablate_layers) {
          for (const bool augment : cfg.ablate_augment) {
            RunConfig run = prep_cfg;
            apply_config_value(run, "arch", std::string(to_string(arch)));
            apply_config_value(run, "layers", std::to_string(layers));
            apply_config_value(run, "augment", augment ? "true" : "false");
            AblationRow row{arch, packets, hampel, augment, layers, {}, config_hash(run)};
            row.summary = run_experiment(data, run.experiment).summary;
            if (on_row) on_row(row);
            rows.push_back(std::move(row));
          }
        }
      }
    }
  }
  return rows;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::ostringstream out;
  out << "arch,packets,hampel,augment,layers,rank1,rank1_std,rank3,rank3_std,rank5,rank5_std,"
         "mAP,mAP_std,config_hash\n";
  char buf[96];
  for (const auto& r : rows) {
    out << to_string(r.arch) << ',' << r.packets << ',' << (r.hampel ? "true" : "false") << ','
        << (r.augment ? "true" : "false") << ',' << r.layers;
    for (const char* m : {"rank1", "rank3", "rank5", "mAP"}) {
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g", metric_value(r.summary, m, false),
                    metric_value(r.summary, m, true));
      out << buf;
    }
    out << ',' << r.config_hash << '\n';
  }
  return out.str();
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  const fs::path dir = prepare_out_dir(cfg);
  const Manifest m = generate_dataset(cfg.synth, dir);
  out << "wrote " << m.entries.size() << " samples (" << m.count(Split::train) << " train, "
      << m.count(Split::test) << " test) to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_preprocess(const RunConfig& cfg, std::ostream& out) {
  const fs::path data = require_data_dir(cfg);
  const Manifest manifest = load_manifest(data / cfg.manifest);
  const fs::path dir = prepare_out_dir(cfg);
  Manifest amp_manifest;
  Manifest phase_manifest;
  for (const auto& entry : manifest.entries) {
    const SampleRecord record = read_sample(data / entry.path);
    auto emit = [&](const char* sub, PayloadKind kind, FeatureSequence seq, Manifest& m) {
      const fs::path target = dir / sub / entry.path;
      fs::create_directories(target.parent_path());
      write_sample(SampleRecord::from_features(record.subject_id, record.scenario, kind, record.dims,
                                               std::move(seq)),
                   target);
      m.entries.push_back(entry);
    };
    if (record.kind == PayloadKind::complex) {
      const auto& csi = std::get<ComplexCsiTensor>(record.payload);
      emit("amplitude", PayloadKind::amplitude, amplitude_from_complex(csi), amp_manifest);
      emit("phase", PayloadKind::phase, phase_from_complex(csi), phase_manifest);
    } else if (record.kind == PayloadKind::amplitude) {
      emit("amplitude", PayloadKind::amplitude, std::get<FeatureSequence>(record.payload), amp_manifest);
    } else {
      emit("phase", PayloadKind::phase, std::get<FeatureSequence>(record.payload), phase_manifest);
    }
  }
  if (!amp_manifest.entries.empty()) save_manifest(amp_manifest, dir / "amplitude" / "manifest.csv");
  if (!phase_manifest.entries.empty()) save_manifest(phase_manifest, dir / "phase" / "manifest.csv");
  out << "extracted " << amp_manifest.entries.size() << " amplitude and " << phase_manifest.entries.size()
      << " phase samples to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const fs::path data = require_data_dir(cfg);
  cfg.experiment.encoder.validate();
  cfg.experiment.train.validate();
  const Manifest manifest = load_manifest(data / cfg.manifest);
  const Dataset dataset = load_dataset(data, manifest, cfg.experiment.preprocess);
  const fs::path dir = prepare_out_dir(cfg);
  const fs::path ckpt = checkpoint_dir(cfg);
  fs::create_directories(ckpt);
  const std::string hash = config_hash(cfg);

  ExperimentHooks hooks;
  hooks.on_epoch = [&](std::size_t fold, const EpochReport& e) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "fold %zu epoch %zu loss %.6f lr %.3g\n", fold, e.epoch, e.mean_loss, e.lr);
    out << buf << std::flush;
  };
  hooks.on_model = [&](std::size_t fold, const SignatureModel& model) {
    save_checkpoint(model, ckpt / fold_file("model", fold, "wfck"));
  };
  const ExperimentResult result = run_experiment(dataset, cfg.experiment, hooks);
  for (const auto& f : result.folds) {
    write_text(dir / fold_file("loss", f.fold, "csv"), loss_csv(std::span<const FoldResult>(&f, 1), hash));
  }
  write_text(dir / "metrics.csv", metrics_csv(result.summary, hash));
  out << metrics_table(result.summary);
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  const fs::path data = require_data_dir(cfg);
  cfg.experiment.encoder.validate();
  const fs::path ckpt = checkpoint_dir(cfg);
  std::vector<fs::path> models;
  if (fs::is_regular_file(ckpt)) {
    models.push_back(ckpt);
  } else {
    for (std::size_t f = 0; fs::is_regular_file(ckpt / fold_file("model", f, "wfck")); ++f) {
      models.push_back(ckpt / fold_file("model", f, "wfck"));
    }
  }
  if (models.empty()) throw DataError("no checkpoints found at '" + ckpt.string() + "'");
  const Manifest manifest = load_manifest(data / cfg.manifest);
  const Dataset dataset = load_dataset(data, manifest, cfg.experiment.preprocess);
  if (dataset.test_x.empty()) throw DataError("manifest has no test samples");
  const fs::path dir = prepare_out_dir(cfg);
  std::vector<RetrievalReport> reports;
  for (const auto& path : models) {
    const SignatureModel model = load_checkpoint(path, cfg.experiment.encoder, dataset.n_feat());
    reports.push_back(evaluate_retrieval(model, dataset.test_x, dataset.test_y));
  }
  const auto summary = summarize(reports);
  write_text(dir / "metrics.csv", metrics_csv(summary, config_hash(cfg)));
  out << metrics_table(summary);
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& out) {
  if (!(cfg.gradcheck_eps > 0.0)) throw ConfigError("gradcheck_eps must be positive");
  if (cfg.gradcheck_packets < 1) throw ConfigError("gradcheck_packets must be >= 1");
  const fs::path dir = prepare_out_dir(cfg);
  auto rows = gradcheck_primitives(cfg.seed, cfg.gradcheck_eps);
  for (const Arch arch : {Arch::lstm, Arch::bilstm, Arch::transformer}) {
    EncoderConfig enc = cfg.experiment.encoder;
    enc.arch = arch;
    auto model_rows = gradcheck_model(enc, cfg.synth.dims.features(), cfg.gradcheck_packets, cfg.seed,
                                      cfg.gradcheck_eps, cfg.gradcheck_entries);
    rows.insert(rows.end(), model_rows.begin(), model_rows.end());
  }
  const std::string hash = config_hash(cfg);
  std::ostringstream csv;
  csv << "name,kind,max_rel_error,entries,config_hash\n";
  char buf[160];
  bool ok = true;
  std::snprintf(buf, sizeof buf, "%-40s %-10s %14s %8s\n", "name", "kind", "max_rel_error", "entries");
  out << buf;
  for (const auto& r : rows) {
    ok = ok && r.max_rel_error < kGradTolerance;
    std::snprintf(buf, sizeof buf, "%-40s %-10s %14.3e %8zu\n", r.name.c_str(), r.kind.c_str(),
                  r.max_rel_error, r.entries);
    out << buf;
    std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%zu,", r.name.c_str(), r.kind.c_str(), r.max_rel_error,
                  r.entries);
    csv << buf << hash << '\n';
  }
  write_text(dir / "gradcheck.csv", csv.str());
  if (!ok) {
    out << "gradient check FAILED\n";
    return kExitNumeric;
  }
  out << "gradient check passed\n";
  return kExitOk;
}

int cmd_ablate(const RunConfig& base, std::ostream& out) {
  RunConfig cfg = base;
  if (!cfg.explicit_keys.contains("epochs")) apply_config_value(cfg, "epochs", "30");
  std::vector<SampleRecord> records;
  Manifest manifest;
  if (!cfg.data_dir.empty()) {
    const fs::path data = require_data_dir(cfg);
    manifest = load_manifest(data / cfg.manifest);
    manifest.validate();
    for (const auto& entry : manifest.entries) records.push_back(read_sample(data / entry.path));
  } else {
    const std::size_t longest = *std::max_element(cfg.ablate_packets.begin(), cfg.ablate_packets.end());
    if (longest > cfg.synth.dims.n_pkt) apply_config_value(cfg, "synth_packets", std::to_string(longest));
    auto corpus = generate_corpus(cfg.synth);
    records = std::move(corpus.records);
    manifest = std::move(corpus.manifest);
  }
  const fs::path dir = prepare_out_dir(cfg);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %7s %6s %7s %6s %8s %8s\n", "arch", "packets", "hampel", "augment",
                "layers", "rank1", "mAP");
  out << buf;
  const auto rows = run_ablation(cfg, records, manifest, [&](const AblationRow& r) {
    std::snprintf(buf, sizeof buf, "%-12s %7zu %6s %7s %6zu %8.4f %8.4f\n", std::string(to_string(r.arch)).c_str(),
                  r.packets, r.hampel ? "on" : "off", r.augment ? "on" : "off", r.layers,
                  metric_value(r.summary, "rank1", false), metric_value(r.summary, "mAP", false));
    out << buf << std::flush;
  });
  write_text(dir / "ablation.csv", ablation_csv(rows));
  return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wi-Fi CSI person re-identification toolkit", args.empty() ? "csireid" : args[0]};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> data_dir, out_dir, arch;
  std::optional<std::size_t> packets, layers, epochs;
  bool no_hampel = false;
  bool no_augment = false;
  std::vector<std::string> sets;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat key = value config file");
    sub->add_option("--seed", seed, "global seed");
    sub->add_option("--data", data_dir, "input directory");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--arch", arch, "lstm, bilstm or transformer");
    sub->add_option("--packets", packets, "packets per sample after resampling");
    sub->add_flag("--no-hampel", no_hampel, "disable amplitude outlier filtering");
    sub->add_flag("--no-augment", no_augment, "disable training augmentation");
    sub->add_option("--layers", layers, "encoder layers");
    sub->add_option("--epochs", epochs, "training epochs");
    sub->add_option("--set", sets, "override any config key (key=value)");
  };
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"synth", "generate a synthetic corpus"},
      {"preprocess", "extract amplitude and phase features"},
      {"train", "train one model per fold"},
      {"eval", "evaluate fold checkpoints on the test split"},
      {"gradcheck", "finite-difference check of every primitive and model"},
      {"ablate", "train and evaluate every combination of the ablation lists"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));

  std::vector<std::string> argv_storage(args);
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    ConfigOverrides overrides;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed) overrides.emplace_back("seed", std::to_string(*seed));
    if (data_dir) overrides.emplace_back("data_dir", *data_dir);
    if (out_dir) overrides.emplace_back("out_dir", *out_dir);
    if (arch) overrides.emplace_back("arch", *arch);
    if (packets) overrides.emplace_back("packets", std::to_string(*packets));
    if (no_hampel) overrides.emplace_back("hampel", "false");
    if (no_augment) overrides.emplace_back("augment", "false");
    if (layers) overrides.emplace_back("layers", std::to_string(*layers));
    if (epochs) overrides.emplace_back("epochs", std::to_string(*epochs));

    std::optional<fs::path> file;
    if (config_path) file = fs::path(*config_path);
    const RunConfig cfg = parse_config(file, overrides);

    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "synth") return cmd_synth(cfg, out);
    if (command == "preprocess") return cmd_preprocess(cfg, out);
    if (command == "train") return cmd_train(cfg, out);
    if (command == "eval") return cmd_eval(cfg, out);
    if (command == "gradcheck") return cmd_gradcheck(cfg, out);
    return cmd_ablate(cfg, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (e.category()) {
      case Error::Category::config: return kExitConfig;
      case Error::Category::data: return kExitData;
      case Error::Category::numeric: return kExitNumeric;
    }
    return kExitInternal;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace csireid::cli
