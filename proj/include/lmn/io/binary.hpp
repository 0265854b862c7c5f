#pragma once

// LMNF feature tensors and LMNP projection parameters. Both are
// little-endian:
//
//   LMNF: "LMNF" | u32 version=1 | u32 T | u32 C | u32 H | u32 W | T*C*H*W f32
//         payload in (frame, channel, row, column) order
//   LMNP: "LMNP" | u32 version=1 | u32 d | u32 C | d*C f64 payload, row-major

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "lmn/error.hpp"
#include "lmn/frame_encoder.hpp"
#include "lmn/io/files.hpp"

namespace lmn::io {

inline constexpr std::uint32_t kFormatVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

inline std::uint32_t get_u32(std::string_view in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= std::uint32_t{static_cast<unsigned char>(in[offset + b])} << (8 * b);
  return v;
}

inline std::uint64_t get_u64(std::string_view in, std::size_t offset) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= std::uint64_t{static_cast<unsigned char>(in[offset + b])} << (8 * b);
  return v;
}

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) throw Error(std::string(what) + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

// Multiplies extents, failing if the byte count would not fit in size_t.
inline std::size_t checked_product(std::initializer_list<std::uint64_t> extents, std::size_t elem_bytes,
                                   const std::string& source) {
  std::uint64_t total = elem_bytes;
  for (auto e : extents) {
    if (e != 0 && total > std::numeric_limits<std::uint64_t>::max() / e) {
      throw FormatError(source, 0, "dimension overflow");
    }
    total *= e;
  }
  if (total > std::numeric_limits<std::size_t>::max()) throw FormatError(source, 0, "dimension overflow");
  return static_cast<std::size_t>(total);
}

inline void check_magic(std::string_view bytes, std::string_view magic, std::size_t header_size,
                        const std::string& source) {
  if (bytes.size() < header_size) {
    throw FormatError(source, 0, "truncated header: expected " + std::to_string(header_size) + " bytes, got " +
                                     std::to_string(bytes.size()));
  }
  if (bytes.substr(0, 4) != magic) throw FormatError(source, 0, "bad magic, expected " + std::string(magic));
  const auto version = get_u32(bytes, 4);
  if (version != kFormatVersion) throw FormatError(source, 0, "unsupported version " + std::to_string(version));
}

inline void check_payload(std::size_t actual, std::size_t expected, const std::string& source) {
  if (actual < expected) {
    throw FormatError(source, 0, "truncated payload: expected " + std::to_string(expected) + " bytes, got " +
                                     std::to_string(actual));
  }
  if (actual > expected) {
    throw FormatError(source, 0, "trailing bytes: expected " + std::to_string(expected) + " payload bytes, got " +
                                     std::to_string(actual));
  }
}

}  // namespace detail

inline std::string encode_features(const ClipFeatures& clip) {
  std::string out = "LMNF";
  detail::put_u32(out, kFormatVersion);
  detail::put_u32(out, detail::checked_u32(clip.frames(), "T"));
  detail::put_u32(out, detail::checked_u32(clip.channels(), "C"));
  detail::put_u32(out, detail::checked_u32(clip.height(), "H"));
  detail::put_u32(out, detail::checked_u32(clip.width(), "W"));
  out.reserve(out.size() + clip.data().size() * 4);
  for (double v : clip.data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

inline ClipFeatures decode_features(std::string_view bytes, const std::string& source = "<features>") {
  constexpr std::size_t kHeader = 24;
  detail::check_magic(bytes, "LMNF", kHeader, source);
  const std::uint64_t t = detail::get_u32(bytes, 8), c = detail::get_u32(bytes, 12), h = detail::get_u32(bytes, 16),
                      w = detail::get_u32(bytes, 20);
  if (t == 0 || c == 0 || h == 0 || w == 0) throw FormatError(source, 0, "zero extent in header");
  const std::size_t payload = detail::checked_product({t, c, h, w}, 4, source);
  detail::check_payload(bytes.size() - kHeader, payload, source);
  std::vector<double> data(payload / 4);
  for (std::size_t k = 0; k < data.size(); ++k) {
    data[k] = static_cast<double>(std::bit_cast<float>(detail::get_u32(bytes, kHeader + 4 * k)));
  }
  return ClipFeatures(t, c, h, w, std::move(data));
}

inline ClipFeatures load_features(const std::filesystem::path& path) {
  return decode_features(read_file(path), path.string());
}

inline void save_features(const ClipFeatures& clip, const std::filesystem::path& path) {
  write_file_atomic(path, encode_features(clip));
}

inline std::string encode_params(const ProjectionWeights& weights) {
  std::string out = "LMNP";
  detail::put_u32(out, kFormatVersion);
  detail::put_u32(out, detail::checked_u32(static_cast<std::size_t>(weights.word_dim()), "d"));
  detail::put_u32(out, detail::checked_u32(static_cast<std::size_t>(weights.channels()), "C"));
  for (Eigen::Index r = 0; r < weights.word_dim(); ++r)
    for (Eigen::Index c = 0; c < weights.channels(); ++c)
      detail::put_u64(out, std::bit_cast<std::uint64_t>(weights.matrix(r, c)));
  return out;
}

inline ProjectionWeights decode_params(std::string_view bytes, const std::string& source = "<params>") {
  constexpr std::size_t kHeader = 16;
  detail::check_magic(bytes, "LMNP", kHeader, source);
  const std::uint64_t d = detail::get_u32(bytes, 8), c = detail::get_u32(bytes, 12);
  if (d == 0 || c == 0) throw FormatError(source, 0, "zero extent in header");
  const std::size_t payload = detail::checked_product({d, c}, 8, source);
  detail::check_payload(bytes.size() - kHeader, payload, source);
  ProjectionWeights w{Matrix(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c))};
  std::size_t offset = kHeader;
  for (Eigen::Index r = 0; r < w.word_dim(); ++r) {
    for (Eigen::Index col = 0; col < w.channels(); ++col, offset += 8) {
      w.matrix(r, col) = std::bit_cast<double>(detail::get_u64(bytes, offset));
    }
  }
  if (!w.matrix.allFinite()) throw FormatError(source, 0, "non-finite parameter");
  return w;
}

inline ProjectionWeights load_params(const std::filesystem::path& path) {
  return decode_params(read_file(path), path.string());
}

inline void save_params(const ProjectionWeights& weights, const std::filesystem::path& path) {
  write_file_atomic(path, encode_params(weights));
}

}  // namespace lmn::io
