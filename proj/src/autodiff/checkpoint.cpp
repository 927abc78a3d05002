#include "csireid/autodiff/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>

#include "csireid/error.hpp"

namespace csireid::ad {

namespace {

constexpr char kMagic[4] = {'W', 'F', 'C', 'K'};
constexpr std::uint8_t kRank = 2;

void put(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

  std::uint64_t get(int bytes) {
    if (in_.size() - pos_ < static_cast<std::size_t>(bytes)) {
      throw DataError("checkpoint truncated");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::string text(std::size_t n) {
    if (in_.size() - pos_ < n) throw DataError("checkpoint truncated");
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  [[nodiscard]] bool done() const { return pos_ == in_.size(); }
  [[nodiscard]] std::size_t remaining() const { return in_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t checkpoint_size(const std::vector<NamedTensor>& tensors) {
  std::size_t bytes = 4 + 4;
  for (const auto& t : tensors) bytes += 2 + t.name.size() + 1 + 4 * kRank + 4 * t.tensor.size();
  return bytes;
}

void save_tensors(const std::vector<NamedTensor>& tensors, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out;
  out.reserve(checkpoint_size(tensors));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put(out, tensors.size(), 4);
  for (const auto& [name, tensor] : tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw DataError("tensor name too long: " + name);
    }
    put(out, name.size(), 2);
    out.insert(out.end(), name.begin(), name.end());
    put(out, kRank, 1);
    put(out, tensor.rows(), 4);
    put(out, tensor.cols(), 4);
    for (double v : tensor.values()) {
      const auto f = static_cast<float>(v);
      if (!std::isfinite(f)) throw NumericError("non-finite parameter in '" + name + "'");
      put(out, std::bit_cast<std::uint32_t>(f), 4);
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError("cannot open '" + path.string() + "' for writing");
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw DataError("write failed for '" + path.string() + "'");
}

std::vector<NamedTensor> load_tensors(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open checkpoint '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)),
                                        std::istreambuf_iterator<char>());
  Reader r(bytes);
  if (r.text(4) != std::string(kMagic, 4)) throw DataError("bad checkpoint magic");
  const auto count = r.get(4);
  std::vector<NamedTensor> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = r.text(r.get(2));
    const auto rank = r.get(1);
    std::vector<std::uint64_t> dims(rank);
    std::uint64_t numel = 1;
    for (auto& d : dims) {
      d = r.get(4);
      if (d != 0 && numel > r.remaining() / d) throw DataError("checkpoint dimension overflow");
      numel *= d;
    }
    if (rank > 2) throw DataError("checkpoint tensor '" + nt.name + "' has rank > 2");
    const std::size_t rows = rank == 2 ? dims[0] : 1;
    const std::size_t cols = rank == 0 ? 1 : dims.back();
    std::vector<double> values(numel);
    for (auto& v : values) v = static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(r.get(4))));
    nt.tensor = Tensor::from(rows, cols, std::move(values));
    out.push_back(std::move(nt));
  }
  if (!r.done()) throw DataError("checkpoint has trailing bytes");
  return out;
}

}  // namespace csireid::ad
