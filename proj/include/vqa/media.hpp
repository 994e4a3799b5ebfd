#pragma once

#include <openssl/evp.h>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace vqa {

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

namespace detail {

inline std::uint64_t read_be(std::string_view b, std::size_t pos, int n) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v = (v << 8) | static_cast<unsigned char>(b[pos + i]);
  return v;
}

// Finds a child box of `type` within [begin, end); returns {payload offset, payload end}.
inline std::optional<std::pair<std::size_t, std::size_t>> find_box(std::string_view b, std::size_t begin,
                                                                   std::size_t end, std::string_view type) {
  std::size_t pos = begin;
  while (pos + 8 <= end) {
    std::uint64_t size = read_be(b, pos, 4);
    std::size_t header = 8;
    if (size == 1) {
      if (pos + 16 > end) return std::nullopt;
      size = read_be(b, pos + 8, 8);
      header = 16;
    } else if (size == 0) {
      size = end - pos;
    }
    if (size < header || pos + size > end) return std::nullopt;
    if (b.substr(pos + 4, 4) == type) return std::pair{pos + header, static_cast<std::size_t>(pos + size)};
    pos += static_cast<std::size_t>(size);
  }
  return std::nullopt;
}

}  // namespace detail

/// Playback duration from the movie header of an ISO-BMFF (MP4/MOV) file.
inline std::optional<std::int64_t> mp4_duration_ms(std::string_view bytes) {
  auto moov = detail::find_box(bytes, 0, bytes.size(), "moov");
  if (!moov) return std::nullopt;
  auto mvhd = detail::find_box(bytes, moov->first, moov->second, "mvhd");
  if (!mvhd) return std::nullopt;
  const std::size_t p = mvhd->first;
  const std::size_t avail = mvhd->second - p;
  if (avail < 1) return std::nullopt;
  const int version = static_cast<unsigned char>(bytes[p]);
  std::uint64_t timescale = 0, duration = 0;
  if (version == 1) {
    if (avail < 32) return std::nullopt;
    timescale = detail::read_be(bytes, p + 20, 4);
    duration = detail::read_be(bytes, p + 24, 8);
  } else {
    if (avail < 20) return std::nullopt;
    timescale = detail::read_be(bytes, p + 12, 4);
    duration = detail::read_be(bytes, p + 16, 4);
  }
  if (timescale == 0 || duration == 0) return std::nullopt;
  return static_cast<std::int64_t>(duration * 1000 / timescale);
}

}  // namespace vqa
