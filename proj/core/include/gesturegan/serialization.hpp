#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gesturegan/tensor.hpp"

namespace gesturegan {

class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  nn::Tensor tensor;
};

// Binary tensor bundle: "GGTB" magic, u32 version, u32 count, then per entry
// u32 name length, name bytes, 4 x i32 shape, numel x f32 (little endian).
void write_tensor_file(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensor_file(const std::filesystem::path& path);

// Writes `contents` to a sibling temporary file and renames it into place, so
// readers never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace gesturegan
