#pragma once

#include <map>
#include <string>

#include "lcmae/nn.hpp"

namespace lcmae {

// Single-file tensor container. Layout, all little-endian:
//   magic "LCMAECK1" (8 bytes)
//   u64 config digest
//   u32 record count
//   records sorted by key: u32 key length, key bytes,
//     u32 rows, u32 cols, rows*cols float32 row-major
// Round-trips are bit-exact.
struct TensorFile {
  uint64_t digest = 0;
  std::map<std::string, Mat<float>> tensors;
};

void save_tensor_file(const std::string& path, const TensorFile& tf);
TensorFile load_tensor_file(const std::string& path);

void save_checkpoint(const std::string& path, const ParamStore<float>& ps,
                     uint64_t digest);

// Digest must match and the key set and shapes must equal the store's;
// anything else refuses to load.
void load_checkpoint(const std::string& path, ParamStore<float>& ps, uint64_t digest);

}  // namespace lcmae
