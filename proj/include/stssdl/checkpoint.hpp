#pragma once

#include <map>
#include <string>

#include "stssdl/tensor.hpp"

namespace stssdl {

// Checkpoint layout: <dir>/model.manifest lists "name rank dims... offset"
// per tensor; <dir>/model.bin is the companion blob of little-endian 64-bit
// reals in manifest order. Offsets are in bytes.
void save_tensors(const std::string& dir,
                  const std::vector<std::pair<std::string, Tensor>>& tensors);

std::map<std::string, Tensor> load_tensors(const std::string& dir);

}  // namespace stssdl
