#pragma once

// Tensor container (".tfal"), little-endian throughout:
//
//   offset  size      field
//   0       4         magic "TFAL"
//   4       1         format version (1)
//   5       1         dtype code (1 = float32, 2 = uint16, 3 = uint8)
//   6       1         rank
//   7       1         reserved, must be 0
//   8       8 * rank  dims, u64 each
//   ...               row-major payload, product(dims) elements
//
// NPY v1.0/v2.0 files (C order, '<f4', '<u2', '|u1') are accepted on read.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "tfal/error.hpp"
#include "tfal/tensor.hpp"

namespace tfal {

static_assert(std::endian::native == std::endian::little, "tensor I/O assumes a little-endian host");

inline constexpr std::array<char, 4> kTensorMagic = {'T', 'F', 'A', 'L'};
inline constexpr std::uint8_t kTensorVersion = 1;

namespace detail {

inline void check_finite(const Tensor& t) {
  if (t.dtype() != DType::kFloat32) return;
  for (float v : t.values<float>())
    require(std::isfinite(v), ErrorCode::kRejectedNonFinite, "float tensor contains NaN or Inf");
}

template <class T>
void append_pod(std::vector<std::uint8_t>& out, const T& value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T read_pod(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

template <class T>
std::vector<T> read_payload(std::span<const std::uint8_t> bytes, std::size_t offset, std::size_t count) {
  std::vector<T> values(count);
  if (count > 0) std::memcpy(values.data(), bytes.data() + offset, count * sizeof(T));
  return values;
}

inline Tensor make_tensor(DType dtype, std::vector<std::uint64_t> shape, std::span<const std::uint8_t> bytes,
                          std::size_t offset) {
  const std::size_t available = bytes.size() - offset;
  // Hostile dims can overflow the element count; a zero dim still means empty.
  std::size_t count = 1, bytes_needed = 0;
  bool overflow = false;
  for (auto d : shape) overflow |= __builtin_mul_overflow(count, static_cast<std::size_t>(d), &count);
  overflow |= __builtin_mul_overflow(count, dtype_size(dtype), &bytes_needed);
  const bool empty = std::find(shape.begin(), shape.end(), std::uint64_t{0}) != shape.end();
  require(empty || !overflow, ErrorCode::kTruncatedData, "declared dims exceed any payload");
  if (empty) count = 0;
  require(available >= count * dtype_size(dtype), ErrorCode::kTruncatedData,
          "payload holds " + std::to_string(available / dtype_size(dtype)) + " values, header declares " +
              std::to_string(count));
  require(available == count * dtype_size(dtype), ErrorCode::kMalformedHeader,
          "trailing bytes after tensor payload");
  switch (dtype) {
    case DType::kFloat32: return Tensor(std::move(shape), read_payload<float>(bytes, offset, count));
    case DType::kUInt16: return Tensor(std::move(shape), read_payload<std::uint16_t>(bytes, offset, count));
    case DType::kUInt8: return Tensor(std::move(shape), read_payload<std::uint8_t>(bytes, offset, count));
  }
  throw Error(ErrorCode::kUnsupportedDtype, "unknown dtype");
}

inline Tensor decode_native(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 8, ErrorCode::kMalformedHeader, "file shorter than tensor header");
  require(std::equal(kTensorMagic.begin(), kTensorMagic.end(), bytes.begin()), ErrorCode::kMalformedHeader,
          "bad magic");
  require(bytes[4] == kTensorVersion, ErrorCode::kMalformedHeader,
          "unsupported format version " + std::to_string(bytes[4]));
  const std::uint8_t code = bytes[5];
  require(code >= 1 && code <= 3, ErrorCode::kUnsupportedDtype, "dtype code " + std::to_string(code));
  const std::size_t rank = bytes[6];
  require(bytes[7] == 0, ErrorCode::kMalformedHeader, "reserved header byte is nonzero");
  require(bytes.size() >= 8 + 8 * rank, ErrorCode::kMalformedHeader, "header truncated inside dims");
  std::vector<std::uint64_t> shape(rank);
  for (std::size_t i = 0; i < rank; ++i) shape[i] = read_pod<std::uint64_t>(bytes, 8 + 8 * i);
  return make_tensor(static_cast<DType>(code), std::move(shape), bytes, 8 + 8 * rank);
}

// Minimal parser for the python-literal header dict of an NPY file.
inline std::string npy_field(std::string_view header, std::string_view key) {
  const std::string quoted = "'" + std::string(key) + "'";
  auto pos = header.find(quoted);
  require(pos != std::string_view::npos, ErrorCode::kMalformedHeader, "npy header lacks " + quoted);
  pos = header.find(':', pos + quoted.size());
  require(pos != std::string_view::npos, ErrorCode::kMalformedHeader, "npy header malformed near " + quoted);
  ++pos;
  while (pos < header.size() && header[pos] == ' ') ++pos;
  require(pos < header.size(), ErrorCode::kMalformedHeader, "npy header truncated");
  std::size_t end;
  if (header[pos] == '\'') {
    end = header.find('\'', pos + 1);
    require(end != std::string_view::npos, ErrorCode::kMalformedHeader, "unterminated npy string");
    return std::string(header.substr(pos + 1, end - pos - 1));
  }
  if (header[pos] == '(') {
    end = header.find(')', pos);
    require(end != std::string_view::npos, ErrorCode::kMalformedHeader, "unterminated npy shape");
    return std::string(header.substr(pos + 1, end - pos - 1));
  }
  end = header.find_first_of(",}", pos);
  require(end != std::string_view::npos, ErrorCode::kMalformedHeader, "npy header malformed");
  return std::string(header.substr(pos, end - pos));
}

inline Tensor decode_npy(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 10, ErrorCode::kMalformedHeader, "npy file too short");
  const std::uint8_t major = bytes[6];
  std::size_t header_len = 0;
  std::size_t header_start = 0;
  if (major == 1) {
    header_len = read_pod<std::uint16_t>(bytes, 8);
    header_start = 10;
  } else if (major == 2) {
    require(bytes.size() >= 12, ErrorCode::kMalformedHeader, "npy file too short");
    header_len = read_pod<std::uint32_t>(bytes, 8);
    header_start = 12;
  } else {
    throw Error(ErrorCode::kMalformedHeader, "unsupported npy version " + std::to_string(major));
  }
  require(bytes.size() >= header_start + header_len, ErrorCode::kMalformedHeader, "npy header truncated");
  const std::string_view header(reinterpret_cast<const char*>(bytes.data() + header_start), header_len);

  const std::string descr = npy_field(header, "descr");
  DType dtype;
  if (descr == "<f4") dtype = DType::kFloat32;
  else if (descr == "<u2") dtype = DType::kUInt16;
  else if (descr == "|u1" || descr == "<u1") dtype = DType::kUInt8;
  else throw Error(ErrorCode::kUnsupportedDtype, "npy descr '" + descr + "'");

  const std::string fortran = npy_field(header, "fortran_order");
  require(fortran == "False", ErrorCode::kUnsupportedDtype, "fortran-ordered npy arrays are not supported");

  std::vector<std::uint64_t> shape;
  const std::string dims = npy_field(header, "shape");
  std::size_t pos = 0;
  while (pos < dims.size()) {
    while (pos < dims.size() && (dims[pos] == ' ' || dims[pos] == ',')) ++pos;
    if (pos >= dims.size()) break;
    std::size_t used = 0;
    try {
      shape.push_back(std::stoull(dims.substr(pos), &used));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kMalformedHeader, "bad npy shape '" + dims + "'");
    }
    pos += used;
  }
  return make_tensor(dtype, std::move(shape), bytes, header_start + header_len);
}

}  // namespace detail

/// Serializes to the native container. Float tensors must be finite.
inline std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  detail::check_finite(t);
  require(t.rank() <= 255, ErrorCode::kUnsupportedDtype, "rank above 255");
  std::vector<std::uint8_t> out(kTensorMagic.begin(), kTensorMagic.end());
  out.push_back(kTensorVersion);
  out.push_back(static_cast<std::uint8_t>(t.dtype()));
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  out.push_back(0);
  for (auto d : t.shape()) detail::append_pod(out, d);
  std::visit(
      [&](const auto& v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
        out.insert(out.end(), p, p + v.size() * sizeof(v[0]));
      },
      t.storage());
  return out;
}

/// Parses either container; non-finite floats are rejected.
inline Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  static constexpr std::array<std::uint8_t, 6> kNpyMagic = {0x93, 'N', 'U', 'M', 'P', 'Y'};
  Tensor t;
  if (bytes.size() >= kNpyMagic.size() && std::equal(kNpyMagic.begin(), kNpyMagic.end(), bytes.begin()))
    t = detail::decode_npy(bytes);
  else
    t = detail::decode_native(bytes);
  detail::check_finite(t);
  return t;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kMissingFile, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::kIoFailure, "write failed for " + path.string());
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

inline Tensor load_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_tensor(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

inline void save_tensor(const Tensor& t, const std::filesystem::path& path) {
  write_file(path, encode_tensor(t));
}

}  // namespace tfal
