#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "csireid/csi_core.hpp"

namespace csireid {

struct HampelConfig {
  std::size_t window = 5;  // odd, >= 3
  double xi = 3.0;         // threshold multiplier on the MAD

  void validate() const;
};

enum class OffsetSign { conventional_minus_b, paper_plus_b };

struct SanitizeConfig {
  /// Physical subcarrier indices m_k. Empty means centered: k - (K-1)/2.
  std::vector<double> subcarrier_index{};
  OffsetSign offset_sign = OffsetSign::conventional_minus_b;
  bool unwrap = true;
};

/// Centered subcarrier indices k - (K-1)/2.
std::vector<double> centered_subcarrier_index(std::size_t n_sub);

/// |H| per entry, flattened to (packet x feature).
FeatureSequence amplitude_from_complex(const ComplexCsiTensor& csi);

/// Four-quadrant angle in (-pi, pi] per entry; the angle of 0 is 0.
FeatureSequence phase_from_complex(const ComplexCsiTensor& csi);

/// Hampel outlier filter on one column. Windows at the ends are truncated
/// to the available neighbours; outliers are replaced by the window median.
std::vector<double> hampel_column(std::span<const double> column, const HampelConfig& cfg);

/// Applies hampel_column to every feature column along the packet axis.
FeatureSequence hampel_filter(const FeatureSequence& seq, const HampelConfig& cfg);

/// Adjusts successive differences by multiples of 2*pi into (-pi, pi].
std::vector<double> unwrap_phase(std::span<const double> phase_row);

/// Removes the per-(packet, antenna pair) linear phase term a*m_k + b.
/// Features are grouped into consecutive rows of n_sub subcarriers.
FeatureSequence sanitize_phase(const FeatureSequence& phase, std::size_t n_sub,
                               const SanitizeConfig& cfg = {});

/// Packet indices floor(i * P / target) for i < target.
std::vector<std::size_t> resample_indices(std::size_t n_pkt, std::size_t target);
FeatureSequence resample_packets(const FeatureSequence& seq, std::size_t target);

/// Per-column zero mean / unit variance (population std). Columns with
/// std < 1e-8 are only centered.
FeatureSequence standardize_features(const FeatureSequence& seq);

enum class FeatureKind { amplitude, phase };

/// Everything that turns a stored record into a model input.
struct PreprocessConfig {
  FeatureKind features = FeatureKind::amplitude;
  bool hampel = true;
  HampelConfig hampel_cfg{};
  SanitizeConfig sanitize_cfg{};
  std::size_t packets = 200;
  bool standardize = false;
};

/// Record -> features: amplitude (+ optional Hampel) or sanitized phase,
/// then packet resampling and optional standardization.
FeatureSequence prepare_features(const SampleRecord& record, const PreprocessConfig& cfg);

}  // namespace csireid
