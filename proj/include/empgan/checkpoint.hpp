// SPDX-License-Identifier: Apache-2.0
//
// Binary layout (all integers little-endian):
//   "EMPG" | version u16 | tensor count u32
//   per tensor: name length u16 | UTF-8 name | rank u8 | dims u32 × rank |
//               values f64 × product(dims)
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "empgan/tensor.hpp"

namespace empgan {

inline constexpr std::uint16_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

std::string encode_checkpoint(const NamedTensors& tensors);
/// Throws CheckpointError with the byte offset of the first bad field.
NamedTensors decode_checkpoint(std::string_view bytes);

/// Writes through a temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

/// Text stored as one value per byte, for metadata entries.
Tensor text_tensor(std::string_view text);
std::string tensor_text(const Tensor& t);

}  // namespace empgan
