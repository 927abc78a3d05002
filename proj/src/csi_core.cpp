#include "csireid/csi_core.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include "csireid/error.hpp"

namespace csireid {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{0x43, 0x53, 0x49, 0x31};  // "CSI1"

void check_dims(const CsiDims& d) {
  if (d.n_rx == 0 || d.n_tx == 0 || d.n_sub == 0 || d.n_pkt == 0) {
    throw DataError("CSI dimensions must all be >= 1");
  }
}

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(double v) {
    const auto f = static_cast<float>(v);
    if (!std::isfinite(f)) throw NumericError("value not representable as finite f32");
    u32(std::bit_cast<std::uint32_t>(f));
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  [[nodiscard]] std::size_t remaining() const { return in_.size() - pos_; }

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw DataError("CSB file truncated");
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t to_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw DataError(std::string(what) + " exceeds 32-bit range");
  }
  return static_cast<std::uint32_t>(v);
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace

ComplexCsiTensor::ComplexCsiTensor(CsiDims dims, std::vector<std::complex<double>> data)
    : dims_(dims), data_(std::move(data)) {
  check_dims(dims_);
  if (data_.size() != dims_.count()) throw DataError("complex CSI data length mismatch");
}

ComplexCsiTensor::ComplexCsiTensor(CsiDims dims) : dims_(dims) {
  check_dims(dims_);
  data_.assign(dims_.count(), {0.0, 0.0});
}

void ComplexCsiTensor::validate() const {
  check_dims(dims_);
  if (data_.size() != dims_.count()) throw DataError("complex CSI data length mismatch");
  for (const auto& v : data_) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw NumericError("complex CSI contains non-finite values");
    }
  }
}

FeatureSequence::FeatureSequence(std::size_t n_pkt, std::size_t n_feat)
    : n_pkt_(n_pkt), n_feat_(n_feat), data_(n_pkt * n_feat, 0.0) {}

FeatureSequence::FeatureSequence(std::size_t n_pkt, std::size_t n_feat, std::vector<double> data)
    : n_pkt_(n_pkt), n_feat_(n_feat), data_(std::move(data)) {
  if (data_.size() != n_pkt_ * n_feat_) throw DataError("feature sequence length mismatch");
}

std::vector<double> FeatureSequence::column(std::size_t feat) const {
  std::vector<double> col(n_pkt_);
  for (std::size_t p = 0; p < n_pkt_; ++p) col[p] = data_[p * n_feat_ + feat];
  return col;
}

void FeatureSequence::set_column(std::size_t feat, std::span<const double> values) {
  if (values.size() != n_pkt_) throw DataError("column length mismatch");
  for (std::size_t p = 0; p < n_pkt_; ++p) data_[p * n_feat_ + feat] = values[p];
}

void FeatureSequence::validate() const {
  if (n_pkt_ == 0 || n_feat_ == 0) throw DataError("feature sequence is empty");
  if (data_.size() != n_pkt_ * n_feat_) throw DataError("feature sequence length mismatch");
  if (!std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); })) {
    throw NumericError("feature sequence contains non-finite values");
  }
}

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::tshirt: return "tshirt";
    case Scenario::coat: return "coat";
    case Scenario::backpack: return "backpack";
    case Scenario::synthetic: return "synthetic";
  }
  return "?";
}

std::string_view to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::complex: return "complex";
    case PayloadKind::amplitude: return "amplitude";
    case PayloadKind::phase: return "phase";
  }
  return "?";
}

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

Scenario parse_scenario(std::string_view text) {
  if (text == "tshirt") return Scenario::tshirt;
  if (text == "coat") return Scenario::coat;
  if (text == "backpack") return Scenario::backpack;
  if (text == "synthetic") return Scenario::synthetic;
  throw DataError("unknown scenario '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "test") return Split::test;
  throw DataError("unknown split '" + std::string(text) + "'");
}

SampleRecord SampleRecord::from_complex(std::int64_t subject, Scenario scenario,
                                        ComplexCsiTensor csi) {
  SampleRecord r;
  r.subject_id = subject;
  r.scenario = scenario;
  r.kind = PayloadKind::complex;
  r.dims = csi.dims();
  r.payload = std::move(csi);
  return r;
}

SampleRecord SampleRecord::from_features(std::int64_t subject, Scenario scenario,
                                         PayloadKind kind, CsiDims dims, FeatureSequence seq) {
  SampleRecord r;
  r.subject_id = subject;
  r.scenario = scenario;
  r.kind = kind;
  r.dims = dims;
  r.payload = std::move(seq);
  return r;
}

void SampleRecord::validate() const {
  if (subject_id < 0) throw DataError("subject_id must be non-negative");
  check_dims(dims);
  if (kind == PayloadKind::complex) {
    const auto* csi = std::get_if<ComplexCsiTensor>(&payload);
    if (csi == nullptr) throw DataError("payload kind 'complex' requires a complex tensor");
    if (csi->dims() != dims) throw DataError("record dims disagree with tensor dims");
    csi->validate();
  } else {
    const auto* seq = std::get_if<FeatureSequence>(&payload);
    if (seq == nullptr) throw DataError("feature payload kind requires a feature sequence");
    if (seq->n_pkt() != dims.n_pkt || seq->n_feat() != dims.features()) {
      throw DataError("record dims disagree with feature sequence shape");
    }
    seq->validate();
    if (kind == PayloadKind::amplitude) {
      for (double v : seq->data()) {
        if (v < 0.0) throw DataError("amplitude payload contains negative values");
      }
    }
  }
}

std::size_t Manifest::count(Split split) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [split](const ManifestEntry& e) { return e.split == split; }));
}

void Manifest::validate() const {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (e.subject_id < 0) throw DataError("manifest subject_id must be non-negative");
    if (!seen.insert(e.path).second) throw DataError("duplicate manifest path '" + e.path + "'");
  }
}

std::vector<std::uint8_t> encode_sample(const SampleRecord& record) {
  record.validate();
  if (record.subject_id > std::numeric_limits<std::uint32_t>::max()) {
    throw DataError("subject_id exceeds 32-bit range");
  }
  std::vector<std::uint8_t> out;
  const std::size_t values = record.dims.count() * (record.kind == PayloadKind::complex ? 2 : 1);
  out.reserve(kCsbHeaderBytes + values * 4);
  ByteWriter w(out);
  for (auto b : kMagic) w.u8(b);
  w.u8(static_cast<std::uint8_t>(record.kind));
  w.u8(static_cast<std::uint8_t>(record.scenario));
  w.u32(static_cast<std::uint32_t>(record.subject_id));
  w.u32(to_u32(record.dims.n_rx, "n_rx"));
  w.u32(to_u32(record.dims.n_tx, "n_tx"));
  w.u32(to_u32(record.dims.n_sub, "n_sub"));
  w.u32(to_u32(record.dims.n_pkt, "n_pkt"));
  if (record.kind == PayloadKind::complex) {
    for (const auto& v : std::get<ComplexCsiTensor>(record.payload).data()) {
      w.f32(v.real());
      w.f32(v.imag());
    }
  } else {
    for (double v : std::get<FeatureSequence>(record.payload).data()) w.f32(v);
  }
  return out;
}

SampleRecord decode_sample(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw DataError("bad magic: not a CSB sample file");
  }
  ByteReader r(bytes.subspan(kMagic.size()));
  const auto kind_byte = r.u8();
  if (kind_byte < 1 || kind_byte > 3) throw DataError("unknown payload kind");
  const auto scenario_byte = r.u8();
  if (scenario_byte > 3) throw DataError("unknown scenario code");
  const std::uint32_t subject = r.u32();
  std::array<std::uint64_t, 4> d{};
  for (auto& v : d) v = r.u32();
  if (std::any_of(d.begin(), d.end(), [](std::uint64_t v) { return v == 0; })) {
    throw DataError("CSB header has a zero dimension");
  }

  const auto kind = static_cast<PayloadKind>(kind_byte);
  std::uint64_t values = kind == PayloadKind::complex ? 2 : 1;
  for (auto v : d) {
    if (values > std::numeric_limits<std::uint64_t>::max() / 4 / v) {
      throw DataError("CSB header dimension overflow");
    }
    values *= v;
  }
  if (r.remaining() < values * 4) throw DataError("CSB payload truncated");
  if (r.remaining() > values * 4) throw DataError("CSB file has trailing bytes");

  const CsiDims dims{d[0], d[1], d[2], d[3]};
  const auto scenario = static_cast<Scenario>(scenario_byte);
  SampleRecord rec;
  if (kind == PayloadKind::complex) {
    std::vector<std::complex<double>> data(dims.count());
    for (auto& v : data) {
      const double re = r.f32();
      const double im = r.f32();
      v = {re, im};
    }
    rec = SampleRecord::from_complex(subject, scenario, ComplexCsiTensor(dims, std::move(data)));
  } else {
    std::vector<double> data(dims.count());
    for (auto& v : data) v = r.f32();
    rec = SampleRecord::from_features(subject, scenario, kind, dims,
                                      FeatureSequence(dims.n_pkt, dims.features(), std::move(data)));
  }
  rec.validate();
  return rec;
}

void write_sample(const SampleRecord& record, const std::filesystem::path& path) {
  const auto bytes = encode_sample(record);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

SampleRecord read_sample(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_sample(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Manifest parse_manifest(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw DataError("manifest is empty (missing header)");

  const auto header = split_csv_line(lines.front());
  std::unordered_map<std::string_view, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  for (const char* name : {"path", "subject_id", "scenario", "split"}) {
    if (!column.contains(name)) {
      throw DataError(std::string("manifest missing column '") + name + "'");
    }
  }

  Manifest m;
  std::set<std::string, std::less<>> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_csv_line(lines[i]);
    const auto where = " (manifest line " + std::to_string(i + 1) + ")";
    if (fields.size() != header.size()) throw DataError("wrong field count" + where);
    ManifestEntry e;
    e.path = std::string(fields[column["path"]]);
    if (e.path.empty()) throw DataError("empty path" + where);
    const std::string id_text(fields[column["subject_id"]]);
    std::size_t used = 0;
    try {
      e.subject_id = std::stoll(id_text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != id_text.size() || e.subject_id < 0) {
      throw DataError("invalid subject_id '" + id_text + "'" + where);
    }
    e.scenario = parse_scenario(fields[column["scenario"]]);
    e.split = parse_split(fields[column["split"]]);
    if (!seen.insert(e.path).second) throw DataError("duplicate path '" + e.path + "'" + where);
    m.entries.push_back(std::move(e));
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  manifest.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << "path,subject_id,scenario,split\n";
  for (const auto& e : manifest.entries) {
    out << e.path << ',' << e.subject_id << ',' << to_string(e.scenario) << ','
        << to_string(e.split) << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

FeatureSequence flatten_features(const CsiDims& dims, std::span<const double> per_entry) {
  check_dims(dims);
  if (per_entry.size() != dims.count()) throw DataError("flatten_features: dimension mismatch");
  FeatureSequence seq(dims.n_pkt, dims.features());
  const std::size_t feats = dims.features();
  // Per-entry layout is (rx, tx, sub, pkt) with pkt fastest, so each
  // feature's packets are contiguous in the source.
  for (std::size_t f = 0; f < feats; ++f) {
    const double* src = per_entry.data() + f * dims.n_pkt;
    for (std::size_t p = 0; p < dims.n_pkt; ++p) seq(p, f) = src[p];
  }
  return seq;
}

std::vector<double> unflatten_features(const CsiDims& dims, const FeatureSequence& seq) {
  if (seq.n_pkt() != dims.n_pkt || seq.n_feat() != dims.features()) {
    throw DataError("unflatten_features: dimension mismatch");
  }
  std::vector<double> out(dims.count());
  for (std::size_t f = 0; f < dims.features(); ++f) {
    for (std::size_t p = 0; p < dims.n_pkt; ++p) out[f * dims.n_pkt + p] = seq(p, f);
  }
  return out;
}

}  // namespace csireid
