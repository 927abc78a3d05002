#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "csireid/config.hpp"

namespace csireid::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;
inline constexpr int kExitInternal = 1;

struct GradCheckRow {
  std::string name;
  std::string kind;  // "primitive" or "model"
  double max_rel_error = 0.0;
  std::size_t entries = 0;
};

/// Every differentiable primitive on small random tensors.
std::vector<GradCheckRow> gradcheck_primitives(std::uint64_t seed, double eps);

/// One architecture through the in-batch loss on an N=2 batch: the input
/// and every parameter tensor (max_entries sampled entries each).
std::vector<GradCheckRow> gradcheck_model(const EncoderConfig& cfg, std::size_t n_feat,
                                          std::size_t packets, std::uint64_t seed, double eps,
                                          std::size_t max_entries);

struct AblationRow {
  Arch arch = Arch::transformer;
  std::size_t packets = 0;
  bool hampel = true;
  bool augment = true;
  std::size_t layers = 1;
  std::vector<MetricSummary> summary;
  std::string config_hash;
};

/// Cartesian product of the ablate_* lists, each trained and evaluated
/// with run_experiment on the given raw corpus.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, std::span<const SampleRecord> records,
                                      const Manifest& manifest,
                                      const std::function<void(const AblationRow&)>& on_row = {});

std::string ablation_csv(std::span<const AblationRow> rows);

int cmd_synth(const RunConfig& cfg, std::ostream& out);
int cmd_preprocess(const RunConfig& cfg, std::ostream& out);
int cmd_train(const RunConfig& cfg, std::ostream& out);
int cmd_eval(const RunConfig& cfg, std::ostream& out);
int cmd_gradcheck(const RunConfig& cfg, std::ostream& out);
int cmd_ablate(const RunConfig& cfg, std::ostream& out);

/// Full command line (args[0] is the program name). Returns the exit code;
/// errors are reported on err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace csireid::cli
