#pragma once

#include <zlib.h>

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vqa/error.hpp"

// Minimal ZIP container for the CSV export: entries are stored
// uncompressed, which every unzip tool reads.

namespace vqa::zip {

using Entry = std::pair<std::string, std::string>;  // name, content

namespace detail {

inline void put16(std::string& out, std::uint16_t v) {
  out += static_cast<char>(v & 0xFF);
  out += static_cast<char>(v >> 8);
}

inline void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

inline std::uint32_t get(std::string_view b, std::size_t pos, int n) {
  if (pos + n > b.size()) fail(ErrorCode::SchemaError, "truncated zip archive");
  std::uint32_t v = 0;
  for (int i = n - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[pos + i]);
  return v;
}

// 1980-01-01 00:00 in DOS format; a fixed stamp keeps archives reproducible.
inline constexpr std::uint16_t kDosTime = 0;
inline constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;

inline std::uint32_t crc(std::string_view data) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

}  // namespace detail

inline std::string write(const std::vector<Entry>& entries) {
  using namespace detail;
  std::string out;
  std::string central;
  for (const auto& [name, content] : entries) {
    const auto offset = static_cast<std::uint32_t>(out.size());
    const auto crc32 = crc(content);
    const auto size = static_cast<std::uint32_t>(content.size());
    put32(out, 0x04034b50);
    put16(out, 20);
    put16(out, 0);
    put16(out, 0);
    put16(out, kDosTime);
    put16(out, kDosDate);
    put32(out, crc32);
    put32(out, size);
    put32(out, size);
    put16(out, static_cast<std::uint16_t>(name.size()));
    put16(out, 0);
    out += name;
    out += content;

    put32(central, 0x02014b50);
    put16(central, 20);
    put16(central, 20);
    put16(central, 0);
    put16(central, 0);
    put16(central, kDosTime);
    put16(central, kDosDate);
    put32(central, crc32);
    put32(central, size);
    put32(central, size);
    put16(central, static_cast<std::uint16_t>(name.size()));
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put32(central, 0);
    put32(central, offset);
    central += name;
  }
  const auto central_offset = static_cast<std::uint32_t>(out.size());
  out += central;
  put32(out, 0x06054b50);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put32(out, static_cast<std::uint32_t>(central.size()));
  put32(out, central_offset);
  put16(out, 0);
  return out;
}

/// Reads archives of stored (uncompressed) entries, as produced by write().
inline std::vector<Entry> read(std::string_view archive) {
  using detail::get;
  std::vector<Entry> entries;
  std::size_t pos = 0;
  while (pos + 4 <= archive.size() && get(archive, pos, 4) == 0x04034b50) {
    const auto method = get(archive, pos + 8, 2);
    const auto crc32 = get(archive, pos + 14, 4);
    const auto size = get(archive, pos + 18, 4);
    const auto name_len = get(archive, pos + 26, 2);
    const auto extra_len = get(archive, pos + 28, 2);
    if (method != 0) fail(ErrorCode::SchemaError, "compressed zip entries are not supported");
    const std::size_t data = pos + 30 + name_len + extra_len;
    if (data + size > archive.size()) fail(ErrorCode::SchemaError, "truncated zip archive");
    Entry e{std::string(archive.substr(pos + 30, name_len)), std::string(archive.substr(data, size))};
    if (detail::crc(e.second) != crc32) fail(ErrorCode::SchemaError, "zip entry checksum mismatch: " + e.first);
    entries.push_back(std::move(e));
    pos = data + size;
  }
  return entries;
}

}  // namespace vqa::zip
