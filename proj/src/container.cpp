#include "ember/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include <zlib.h>

#include "ember/errors.hpp"

namespace ember::container {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', 'R'};

template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <class T>
T get_le(std::span<const std::uint8_t> in, std::size_t at) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(in[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = ::crc32(crc, bytes.data() + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode(const Shape& shape, std::span<const double> values) {
  if (shape.size() > 255) throw DimensionError("container: at most 255 dims");
  if (shape_numel(shape) != values.size()) throw DimensionError("container: shape does not match value count");
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_le<std::uint16_t>(out, kVersion);
  out.push_back(kDtypeF64);
  out.push_back(static_cast<std::uint8_t>(shape.size()));
  for (auto d : shape) {
    if (d > 0xffffffffu) throw DimensionError("container: dim exceeds u32");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  const std::size_t payload_at = out.size();
  out.reserve(out.size() + values.size() * 8 + 4);
  for (double v : values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  const auto crc = crc32(std::span<const std::uint8_t>(out).subspan(payload_at));
  put_le<std::uint32_t>(out, crc);
  return out;
}

Tensor decode(std::span<const std::uint8_t> bytes, const std::string& origin) {
  auto fail = [&](const std::string& why) { return IoError("container " + origin + ": " + why); };
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw fail("bad magic");
  const auto version = get_le<std::uint16_t>(bytes, 4);
  if (version != kVersion) throw fail("unsupported version " + std::to_string(version));
  if (bytes[6] != kDtypeF64) throw fail("unsupported dtype tag " + std::to_string(bytes[6]));
  const std::size_t ndim = bytes[7];
  std::size_t at = 8;
  if (bytes.size() < at + 4 * ndim) throw fail("truncated header");
  Shape shape(ndim);
  for (std::size_t i = 0; i < ndim; ++i, at += 4) shape[i] = get_le<std::uint32_t>(bytes, at);
  const std::size_t n = shape_numel(shape);
  if (bytes.size() != at + 8 * n + 4) {
    throw fail("payload is " + std::to_string(bytes.size() - at) + " bytes, expected " + std::to_string(8 * n + 4));
  }
  const auto payload = bytes.subspan(at, 8 * n);
  if (crc32(payload) != get_le<std::uint32_t>(bytes, at + 8 * n)) throw fail("CRC mismatch");
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = std::bit_cast<double>(get_le<std::uint64_t>(payload, 8 * i));
  return Tensor::from(std::move(shape), std::move(values));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void save(const std::filesystem::path& path, const Tensor& tensor) {
  write_file(path, encode(tensor.shape(), tensor.data()));
}

Tensor load(const std::filesystem::path& path) { return decode(read_file(path), path.string()); }

}  // namespace ember::container
