#pragma once

#include <string>
#include <vector>

#include "datk/tensor.hpp"

namespace datk {

// Checkpoint format: magic "DATK", version u32, count u32, then per
// tensor: name length u32 + UTF-8 name, rank u32, extents u32 each,
// little-endian 32-bit floats. Everything little-endian.
inline constexpr uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

}  // namespace datk
