#include "csireid/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "csireid/error.hpp"

namespace csireid {

namespace {

// Median of a scratch buffer (reordered in place). Even counts average the
// two middle elements.
double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2.0;
}

}  // namespace

void HampelConfig::validate() const {
  if (window < 3 || window % 2 == 0) throw ConfigError("Hampel window must be odd and >= 3");
  if (!(xi > 0.0)) throw ConfigError("Hampel threshold xi must be positive");
}

std::vector<double> centered_subcarrier_index(std::size_t n_sub) {
  std::vector<double> m(n_sub);
  const double center = (static_cast<double>(n_sub) - 1.0) / 2.0;
  for (std::size_t k = 0; k < n_sub; ++k) m[k] = static_cast<double>(k) - center;
  return m;
}

FeatureSequence amplitude_from_complex(const ComplexCsiTensor& csi) {
  csi.validate();
  std::vector<double> mag(csi.data().size());
  std::transform(csi.data().begin(), csi.data().end(), mag.begin(),
                 [](const std::complex<double>& h) { return std::hypot(h.real(), h.imag()); });
  return flatten_features(csi.dims(), mag);
}

FeatureSequence phase_from_complex(const ComplexCsiTensor& csi) {
  csi.validate();
  std::vector<double> angle(csi.data().size());
  std::transform(csi.data().begin(), csi.data().end(), angle.begin(),
                 [](const std::complex<double>& h) {
                   if (h.real() == 0.0 && h.imag() == 0.0) return 0.0;
                   const double a = std::atan2(h.imag(), h.real());
                   // atan2 yields -pi for (-x, -0.0); fold onto the closed end.
                   return a == -std::numbers::pi ? std::numbers::pi : a;
                 });
  return flatten_features(csi.dims(), angle);
}

std::vector<double> hampel_column(std::span<const double> column, const HampelConfig& cfg) {
  cfg.validate();
  if (column.empty()) throw DataError("Hampel filter on empty sequence");
  const std::size_t n = column.size();
  const std::size_t half = cfg.window / 2;
  std::vector<double> out(column.begin(), column.end());
  std::vector<double> window;
  std::vector<double> dev;
  window.reserve(cfg.window);
  dev.reserve(cfg.window);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t lo = p >= half ? p - half : 0;
    const std::size_t hi = std::min(n - 1, p + half);
    window.assign(column.begin() + static_cast<std::ptrdiff_t>(lo),
                  column.begin() + static_cast<std::ptrdiff_t>(hi + 1));
    const double med = median_inplace(window);
    dev.clear();
    for (std::size_t i = lo; i <= hi; ++i) dev.push_back(std::abs(column[i] - med));
    const double mad = median_inplace(dev);
    if (std::abs(column[p] - med) > cfg.xi * mad) out[p] = med;
  }
  return out;
}

FeatureSequence hampel_filter(const FeatureSequence& seq, const HampelConfig& cfg) {
  cfg.validate();
  if (seq.empty()) throw DataError("Hampel filter on empty sequence");
  FeatureSequence out = seq;
  for (std::size_t f = 0; f < seq.n_feat(); ++f) {
    out.set_column(f, hampel_column(seq.column(f), cfg));
  }
  return out;
}

std::vector<double> unwrap_phase(std::span<const double> phase_row) {
  std::vector<double> out(phase_row.begin(), phase_row.end());
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 1; i < out.size(); ++i) {
    double d = phase_row[i] - phase_row[i - 1];
    d -= two_pi * std::ceil((d - std::numbers::pi) / two_pi);
    out[i] = out[i - 1] + d;
  }
  return out;
}

FeatureSequence sanitize_phase(const FeatureSequence& phase, std::size_t n_sub,
                               const SanitizeConfig& cfg) {
  if (n_sub < 2) throw ConfigError("phase sanitization needs at least 2 subcarriers");
  if (phase.empty() || phase.n_feat() % n_sub != 0) {
    throw DataError("phase features are not a whole number of subcarrier rows");
  }
  const std::vector<double> m =
      cfg.subcarrier_index.empty() ? centered_subcarrier_index(n_sub) : cfg.subcarrier_index;
  if (m.size() != n_sub) throw ConfigError("subcarrier index length must equal K");
  for (std::size_t k = 1; k < n_sub; ++k) {
    if (!(m[k] > m[k - 1])) throw ConfigError("subcarrier index must be strictly increasing");
  }
  const double span = m.back() - m.front();
  const double sign = cfg.offset_sign == OffsetSign::conventional_minus_b ? -1.0 : 1.0;
  const std::size_t pairs = phase.n_feat() / n_sub;

  FeatureSequence out = phase;
  std::vector<double> row(n_sub);
  for (std::size_t p = 0; p < phase.n_pkt(); ++p) {
    const auto src = phase.row(p);
    auto dst = out.row(p);
    for (std::size_t pair = 0; pair < pairs; ++pair) {
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(pair * n_sub), n_sub, row.begin());
      if (cfg.unwrap) row = unwrap_phase(row);
      const double a = (row.back() - row.front()) / span;
      double b = 0.0;
      for (double v : row) b += v;
      b /= static_cast<double>(n_sub);
      // phi_k - a*m_k -/+ b, written as the residual about the endpoint line
      // phi_1 + a*(m_k - m_1) plus the constant phi_1 - a*m_1 -/+ b. The
      // endpoint residuals are zero by construction, so the slope of the
      // output is exactly zero.
      const double c = row.front() - a * m.front() + sign * b;
      double* o = dst.data() + pair * n_sub;
      o[0] = c;
      o[n_sub - 1] = c;
      for (std::size_t k = 1; k + 1 < n_sub; ++k) {
        o[k] = (row[k] - (row.front() + a * (m[k] - m.front()))) + c;
      }
    }
  }
  return out;
}

std::vector<std::size_t> resample_indices(std::size_t n_pkt, std::size_t target) {
  if (target == 0) throw ConfigError("packet count must be >= 1");
  if (target > n_pkt) {
    throw DataError("requested " + std::to_string(target) + " packets but sample has " +
                    std::to_string(n_pkt));
  }
  std::vector<std::size_t> idx(target);
  for (std::size_t i = 0; i < target; ++i) idx[i] = i * n_pkt / target;
  return idx;
}

FeatureSequence resample_packets(const FeatureSequence& seq, std::size_t target) {
  const auto idx = resample_indices(seq.n_pkt(), target);
  FeatureSequence out(target, seq.n_feat());
  for (std::size_t i = 0; i < target; ++i) {
    const auto src = seq.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

FeatureSequence standardize_features(const FeatureSequence& seq) {
  if (seq.n_pkt() < 2) throw DataError("standardization needs at least 2 packets");
  FeatureSequence out = seq;
  const auto n = static_cast<double>(seq.n_pkt());
  for (std::size_t f = 0; f < seq.n_feat(); ++f) {
    double mean = 0.0;
    for (std::size_t p = 0; p < seq.n_pkt(); ++p) mean += seq(p, f);
    mean /= n;
    double var = 0.0;
    for (std::size_t p = 0; p < seq.n_pkt(); ++p) var += (seq(p, f) - mean) * (seq(p, f) - mean);
    const double sd = std::sqrt(var / n);
    for (std::size_t p = 0; p < seq.n_pkt(); ++p) {
      out(p, f) = sd < 1e-8 ? seq(p, f) - mean : (seq(p, f) - mean) / sd;
    }
  }
  return out;
}

FeatureSequence prepare_features(const SampleRecord& record, const PreprocessConfig& cfg) {
  FeatureSequence seq;
  if (cfg.features == FeatureKind::amplitude) {
    if (record.kind == PayloadKind::complex) {
      seq = amplitude_from_complex(std::get<ComplexCsiTensor>(record.payload));
    } else if (record.kind == PayloadKind::amplitude) {
      seq = std::get<FeatureSequence>(record.payload);
    } else {
      throw DataError("amplitude features requested from a phase record");
    }
    if (cfg.hampel) seq = hampel_filter(seq, cfg.hampel_cfg);
  } else {
    if (record.kind == PayloadKind::complex) {
      seq = phase_from_complex(std::get<ComplexCsiTensor>(record.payload));
    } else if (record.kind == PayloadKind::phase) {
      seq = std::get<FeatureSequence>(record.payload);
    } else {
      throw DataError("phase features requested from an amplitude record");
    }
    seq = sanitize_phase(seq, record.dims.n_sub, cfg.sanitize_cfg);
  }
  seq = resample_packets(seq, cfg.packets);
  if (cfg.standardize) seq = standardize_features(seq);
  return seq;
}

}  // namespace csireid
