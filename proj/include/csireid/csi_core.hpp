#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace csireid {

/// Antenna/subcarrier/packet extents of one capture.
struct CsiDims {
  std::size_t n_rx = 1;   // receive antennas
  std::size_t n_tx = 1;   // transmit antennas
  std::size_t n_sub = 1;  // subcarriers
  std::size_t n_pkt = 1;  // packets (time)

  [[nodiscard]] std::size_t pairs() const { return n_rx * n_tx; }
  [[nodiscard]] std::size_t features() const { return n_rx * n_tx * n_sub; }
  [[nodiscard]] std::size_t count() const { return features() * n_pkt; }

  friend bool operator==(const CsiDims&, const CsiDims&) = default;
};

/// Complex channel frequency response over (rx, tx, subcarrier, packet),
/// stored row-major in that order.
class ComplexCsiTensor {
 public:
  ComplexCsiTensor() = default;
  ComplexCsiTensor(CsiDims dims, std::vector<std::complex<double>> data);
  explicit ComplexCsiTensor(CsiDims dims);

  [[nodiscard]] const CsiDims& dims() const { return dims_; }
  [[nodiscard]] std::span<const std::complex<double>> data() const { return data_; }
  [[nodiscard]] std::span<std::complex<double>> data() { return data_; }

  [[nodiscard]] std::size_t offset(std::size_t rx, std::size_t tx, std::size_t sub,
                                   std::size_t pkt) const {
    return ((rx * dims_.n_tx + tx) * dims_.n_sub + sub) * dims_.n_pkt + pkt;
  }
  [[nodiscard]] std::complex<double> at(std::size_t rx, std::size_t tx, std::size_t sub,
                                        std::size_t pkt) const {
    return data_[offset(rx, tx, sub, pkt)];
  }
  std::complex<double>& at(std::size_t rx, std::size_t tx, std::size_t sub, std::size_t pkt) {
    return data_[offset(rx, tx, sub, pkt)];
  }

  /// Throws DataError on zero dims, length mismatch or non-finite entries.
  void validate() const;

  friend bool operator==(const ComplexCsiTensor&, const ComplexCsiTensor&) = default;

 private:
  CsiDims dims_{};
  std::vector<std::complex<double>> data_{};
};

/// Real (packet x feature) matrix, row-major.
class FeatureSequence {
 public:
  FeatureSequence() = default;
  FeatureSequence(std::size_t n_pkt, std::size_t n_feat);
  FeatureSequence(std::size_t n_pkt, std::size_t n_feat, std::vector<double> data);

  [[nodiscard]] std::size_t n_pkt() const { return n_pkt_; }
  [[nodiscard]] std::size_t n_feat() const { return n_feat_; }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] std::span<const double> data() const { return data_; }
  [[nodiscard]] std::span<double> data() { return data_; }
  [[nodiscard]] std::span<const double> row(std::size_t pkt) const {
    return std::span<const double>(data_).subspan(pkt * n_feat_, n_feat_);
  }
  [[nodiscard]] std::span<double> row(std::size_t pkt) {
    return std::span<double>(data_).subspan(pkt * n_feat_, n_feat_);
  }

  double operator()(std::size_t pkt, std::size_t feat) const { return data_[pkt * n_feat_ + feat]; }
  double& operator()(std::size_t pkt, std::size_t feat) { return data_[pkt * n_feat_ + feat]; }

  /// Copy of one feature column along the packet axis.
  [[nodiscard]] std::vector<double> column(std::size_t feat) const;
  void set_column(std::size_t feat, std::span<const double> values);

  void validate() const;

  friend bool operator==(const FeatureSequence&, const FeatureSequence&) = default;

 private:
  std::size_t n_pkt_ = 0;
  std::size_t n_feat_ = 0;
  std::vector<double> data_{};
};

enum class Scenario : std::uint8_t { tshirt = 0, coat = 1, backpack = 2, synthetic = 3 };
enum class PayloadKind : std::uint8_t { complex = 1, amplitude = 2, phase = 3 };
enum class Split { train, test };

std::string_view to_string(Scenario s);
std::string_view to_string(PayloadKind k);
std::string_view to_string(Split s);
Scenario parse_scenario(std::string_view text);
Split parse_split(std::string_view text);

/// One labeled capture. Feature payloads keep the antenna/subcarrier dims so
/// the file header can be written; dims.features() must equal n_feat.
struct SampleRecord {
  std::int64_t subject_id = 0;
  Scenario scenario = Scenario::synthetic;
  PayloadKind kind = PayloadKind::complex;
  CsiDims dims{};
  std::variant<ComplexCsiTensor, FeatureSequence> payload{};

  static SampleRecord from_complex(std::int64_t subject, Scenario scenario, ComplexCsiTensor csi);
  static SampleRecord from_features(std::int64_t subject, Scenario scenario, PayloadKind kind,
                                    CsiDims dims, FeatureSequence seq);

  void validate() const;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct ManifestEntry {
  std::string path;
  std::int64_t subject_id = 0;
  Scenario scenario = Scenario::synthetic;
  Split split = Split::train;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  [[nodiscard]] std::size_t count(Split split) const;
  void validate() const;
};

// CSB sample files: "CSI1", u8 kind, u8 scenario, u32 subject, u32 x4 dims,
// then little-endian f32 payload (complex values as interleaved re/im).
inline constexpr std::size_t kCsbHeaderBytes = 4 + 1 + 1 + 4 + 4 * 4;

void write_sample(const SampleRecord& record, const std::filesystem::path& path);
SampleRecord read_sample(const std::filesystem::path& path);

/// Byte image of a record in CSB layout.
std::vector<std::uint8_t> encode_sample(const SampleRecord& record);
SampleRecord decode_sample(std::span<const std::uint8_t> bytes);

Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(std::string_view text);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Column index of (rx, tx, subcarrier) in a flattened feature row.
constexpr std::size_t feature_index(const CsiDims& dims, std::size_t rx, std::size_t tx,
                                    std::size_t sub) {
  return (rx * dims.n_tx + tx) * dims.n_sub + sub;
}

/// Lays a per-entry scalar (same layout as ComplexCsiTensor) out as a
/// (packet x rx*tx*sub) sequence, antenna-pair-major, subcarrier-minor.
FeatureSequence flatten_features(const CsiDims& dims, std::span<const double> per_entry);

/// Inverse of flatten_features.
std::vector<double> unflatten_features(const CsiDims& dims, const FeatureSequence& seq);

}  // namespace csireid
