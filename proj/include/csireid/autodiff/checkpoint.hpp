#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "csireid/autodiff/tensor.hpp"

namespace csireid::ad {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// "WFCK" checkpoint: u32 count, then per tensor u16 name length, UTF-8
/// name, u8 rank, u32 dims, f32 values; all little-endian. Values are
/// narrowed to f32.
void save_tensors(const std::vector<NamedTensor>& tensors, const std::filesystem::path& path);
std::vector<NamedTensor> load_tensors(const std::filesystem::path& path);

/// Exact byte size save_tensors will produce.
std::size_t checkpoint_size(const std::vector<NamedTensor>& tensors);

}  // namespace csireid::ad
