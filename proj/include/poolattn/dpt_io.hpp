#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "poolattn/tensor.hpp"

namespace poolattn {

// A tensor of either dtype, as stored on disk.
using AnyTensor = std::variant<TensorF32, Tensor>;

DType dtype_of(const AnyTensor& t);
const Shape& shape_of(const AnyTensor& t);
Tensor to_f64(const AnyTensor& t);

// DPT layout, all integers little-endian:
//   "DPTENSOR" | version u8 (1) | dtype u8 (0 f32, 1 f64) | rank u8 | dims u32 x rank | payload
inline constexpr std::uint8_t kDptVersion = 1;

std::vector<std::uint8_t> encode_dpt(const AnyTensor& t);
AnyTensor decode_dpt(std::span<const std::uint8_t> bytes);

void write_dpt(const std::filesystem::path& path, const AnyTensor& t);
AnyTensor read_dpt(const std::filesystem::path& path);

// {"shape": [...], "data": [...]} fixtures; always F64.
Tensor parse_json_tensor(const std::string& text);
std::string json_tensor_string(const Tensor& t);

// Reads DPT if the file starts with the magic, JSON otherwise.
AnyTensor load_tensor(const std::filesystem::path& path);

}  // namespace poolattn
