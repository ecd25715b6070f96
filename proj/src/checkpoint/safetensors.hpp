#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cotaudit {

// Minimal reader/writer for the single-file named-tensor archive layout:
// u64-LE header length, JSON header {name: {dtype, shape, data_offsets}},
// then raw little-endian buffers. F16/BF16 inputs are up-converted to F32.

struct TensorEntry {
    std::vector<std::int64_t> shape;
    std::vector<float> data;  // always F32 after load
};

using TensorMap = std::map<std::string, TensorEntry>;

TensorMap read_safetensors(const std::string& path);

// Writes all tensors as F32.
void write_safetensors(const std::string& path, const TensorMap& tensors);

}  // namespace cotaudit
