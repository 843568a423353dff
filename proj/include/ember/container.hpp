#pragma once

// EMBR tensor files:
//   "EMBR" | version u16 | dtype u8 (1 = f64) | ndim u8 | dims u32 x ndim |
//   payload f64 x prod(dims) | crc32(payload) u32
// All integers and floats little-endian; the payload is row-major.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ember/tensor.hpp"

namespace ember::container {

inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::uint8_t kDtypeF64 = 1;

std::vector<std::uint8_t> encode(const Shape& shape, std::span<const double> values);
/// Throws IoError on bad magic, version, dtype, length or CRC.
Tensor decode(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

void save(const std::filesystem::path& path, const Tensor& tensor);
Tensor load(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace ember::container
