#pragma once

#include <string>
#include <vector>

#include "gipcnn/packing.hpp"

namespace gipcnn {

// On-disk tensor: one JSON header line {"dims":[...],"dtype":"f32"}, a
// single newline after the closing brace, then the raw little-endian
// float32 payload in row-major order (last dim fastest).
struct TensorFile {
  std::vector<int> dims;
  std::vector<double> data;  // held as doubles in memory

  std::size_t element_count() const;
};

TensorFile read_tensor(const std::string& path);
void write_tensor(const std::string& path, const TensorFile& t);

// 3-D convenience wrappers for (C, H, W) feature maps.
PlainTensor read_plain_tensor(const std::string& path);
void write_plain_tensor(const std::string& path, const PlainTensor& t);

}  // namespace gipcnn
