// -*-c++-*---------------------------------------------------------------------------------------
// Copyright 2026 The evmelt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EVMELT_CODEC_HPP
#define EVMELT_CODEC_HPP

#include <array>
#include <bit>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evmelt/event_model.hpp"

// EVT1 container, little-endian throughout (see docs/evt1_format.md):
//
//   offset  size  field
//        0     4  magic "EVT1"
//        4     1  version (1)
//        5     2  width
//        7     2  height
//        9     8  epoch_us (timestamp of the first event, 0 for an empty stream)
//       17     8  event_count
//       25   8*n  records
//
// record (64-bit little-endian word):
//   bits  0..31  t - epoch_us
//   bits 32..45  x
//   bits 46..59  y
//   bit      60  polarity (1 = positive)
//   bits 61..63  reserved, zero

namespace evmelt::codec
{
inline constexpr std::size_t kHeaderBytes = 25;
inline constexpr std::size_t kRecordBytes = 8;
inline constexpr std::array<std::uint8_t, 4> kMagic{'E', 'V', 'T', '1'};
inline constexpr std::uint8_t kVersion = 1;

struct Evt1Header
{
  std::uint8_t version{kVersion};
  std::uint16_t width{0};
  std::uint16_t height{0};
  std::uint64_t epoch_us{0};
  std::uint64_t event_count{0};
};

class EncodeError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

enum class DecodeErrorKind {
  bad_magic,
  unsupported_version,
  truncated_header,
  invalid_geometry,
  truncated_body,
  coordinate_out_of_bounds,
  reserved_bits_set,
  non_monotone_timestamp,
};

inline const char * to_string(DecodeErrorKind k)
{
  switch (k) {
    case DecodeErrorKind::bad_magic:
      return "bad magic";
    case DecodeErrorKind::unsupported_version:
      return "unsupported version";
    case DecodeErrorKind::truncated_header:
      return "truncated header";
    case DecodeErrorKind::invalid_geometry:
      return "invalid geometry";
    case DecodeErrorKind::truncated_body:
      return "truncated body";
    case DecodeErrorKind::coordinate_out_of_bounds:
      return "coordinate out of bounds";
    case DecodeErrorKind::reserved_bits_set:
      return "reserved bits set";
    case DecodeErrorKind::non_monotone_timestamp:
      return "non-monotone timestamp";
  }
  return "unknown";
}

class DecodeError : public std::runtime_error
{
public:
  DecodeError(DecodeErrorKind kind, const std::string & detail)
  : std::runtime_error(std::string(to_string(kind)) + (detail.empty() ? "" : ": " + detail)),
    kind_(kind)
  {
  }
  DecodeErrorKind kind() const noexcept { return kind_; }

private:
  DecodeErrorKind kind_;
};

namespace detail
{
template <typename T>
inline void put_le(std::uint8_t * dst, T v)
{
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    dst[i] = static_cast<std::uint8_t>(v >> (8 * i));
  }
}

template <typename T>
inline T get_le(const std::uint8_t * src)
{
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<T>(src[i]) << (8 * i));
  }
  return v;
}

constexpr std::uint64_t kCoordMask = (1u << 14) - 1;
}  // namespace detail

inline std::uint64_t pack_record(std::uint32_t t_delta, std::uint16_t x, std::uint16_t y, bool positive)
{
  return static_cast<std::uint64_t>(t_delta) | ((x & detail::kCoordMask) << 32) |
         ((y & detail::kCoordMask) << 46) | (static_cast<std::uint64_t>(positive) << 60);
}

inline std::size_t encoded_size(std::size_t event_count)
{
  return kHeaderBytes + kRecordBytes * event_count;
}

inline std::vector<std::uint8_t> encode_evt1(const EventStream & stream)
{
  const auto report = validate(stream);
  if (!report.ok) {
    throw EncodeError("encode_evt1: " + report.message);
  }
  const auto & ev = stream.events;
  const std::uint64_t epoch = ev.empty() ? 0 : ev.front().t;
  if (!ev.empty() && ev.back().t - epoch > 0xFFFFFFFFull) {
    throw EncodeError(
      "encode_evt1: timestamp offset exceeds 32 bits, split the stream (span " +
      std::to_string(ev.back().t - epoch) + " us)");
  }

  std::vector<std::uint8_t> out(encoded_size(ev.size()));
  std::uint8_t * p = out.data();
  std::memcpy(p, kMagic.data(), 4);
  p[4] = kVersion;
  detail::put_le<std::uint16_t>(p + 5, static_cast<std::uint16_t>(stream.geometry.width));
  detail::put_le<std::uint16_t>(p + 7, static_cast<std::uint16_t>(stream.geometry.height));
  detail::put_le<std::uint64_t>(p + 9, epoch);
  detail::put_le<std::uint64_t>(p + 17, ev.size());
  p += kHeaderBytes;
  for (const Event & e : ev) {
    detail::put_le<std::uint64_t>(
      p, pack_record(static_cast<std::uint32_t>(e.t - epoch), e.x, e.y, e.p > 0));
    p += kRecordBytes;
  }
  return out;
}

inline Evt1Header decode_evt1_header(std::span<const std::uint8_t> bytes)
{
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
    throw DecodeError(DecodeErrorKind::bad_magic, "");
  }
  if (bytes.size() < 5) {
    throw DecodeError(DecodeErrorKind::truncated_header, std::to_string(bytes.size()) + " bytes");
  }
  if (bytes[4] != kVersion) {
    throw DecodeError(DecodeErrorKind::unsupported_version, std::to_string(bytes[4]));
  }
  if (bytes.size() < kHeaderBytes) {
    throw DecodeError(DecodeErrorKind::truncated_header, std::to_string(bytes.size()) + " bytes");
  }
  const std::uint8_t * p = bytes.data();
  Evt1Header h;
  h.version = p[4];
  h.width = detail::get_le<std::uint16_t>(p + 5);
  h.height = detail::get_le<std::uint16_t>(p + 7);
  h.epoch_us = detail::get_le<std::uint64_t>(p + 9);
  h.event_count = detail::get_le<std::uint64_t>(p + 17);
  if (!SensorGeometry{h.width, h.height}.valid()) {
    throw DecodeError(
      DecodeErrorKind::invalid_geometry,
      std::to_string(h.width) + "x" + std::to_string(h.height));
  }
  return h;
}

inline EventStream decode_evt1(std::span<const std::uint8_t> bytes)
{
  const Evt1Header h = decode_evt1_header(bytes);
  const std::size_t body = bytes.size() - kHeaderBytes;
  // Compare in the record domain so a huge declared count cannot overflow.
  if (body % kRecordBytes != 0 || body / kRecordBytes != h.event_count) {
    throw DecodeError(
      DecodeErrorKind::truncated_body, "header declares " + std::to_string(h.event_count) +
                                         " records, body holds " + std::to_string(body) +
                                         " bytes");
  }

  EventStream s;
  s.geometry = SensorGeometry{h.width, h.height};
  s.events.resize(h.event_count);
  const std::uint8_t * p = bytes.data() + kHeaderBytes;
  std::uint64_t prev = h.epoch_us;
  for (std::size_t i = 0; i < h.event_count; ++i, p += kRecordBytes) {
    std::uint64_t w;
    std::memcpy(&w, p, sizeof w);
    if constexpr (std::endian::native != std::endian::little) {
      w = detail::get_le<std::uint64_t>(p);
    }
    const std::uint64_t t = h.epoch_us + (w & 0xFFFFFFFFull);
    const auto x = static_cast<std::uint16_t>((w >> 32) & detail::kCoordMask);
    const auto y = static_cast<std::uint16_t>((w >> 46) & detail::kCoordMask);
    if ((w >> 61) != 0) {
      throw DecodeError(DecodeErrorKind::reserved_bits_set, "record " + std::to_string(i));
    }
    if (x >= h.width || y >= h.height) {
      throw DecodeError(DecodeErrorKind::coordinate_out_of_bounds, "record " + std::to_string(i));
    }
    if (t < prev) {
      throw DecodeError(DecodeErrorKind::non_monotone_timestamp, "record " + std::to_string(i));
    }
    prev = t;
    s.events[i] = Event{t, x, y, static_cast<std::int8_t>(((w >> 60) & 1u) ? 1 : -1)};
  }
  return s;
}

// ---------------------------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kCsvHeader = "t_us,x,y,p";

class CsvParseError : public std::runtime_error
{
public:
  CsvParseError(std::size_t line, const std::string & what)
  : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line)
  {
  }
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

inline std::string write_csv(const EventStream & stream)
{
  std::string out;
  out.reserve(16 + stream.events.size() * 20);
  out.append(kCsvHeader);
  out.push_back('\n');
  char buf[64];
  for (const Event & e : stream.events) {
    char * p = buf;
    p = std::to_chars(p, buf + sizeof buf, e.t).ptr;
    *p++ = ',';
    p = std::to_chars(p, buf + sizeof buf, e.x).ptr;
    *p++ = ',';
    p = std::to_chars(p, buf + sizeof buf, e.y).ptr;
    *p++ = ',';
    p = std::to_chars(p, buf + sizeof buf, static_cast<int>(e.p)).ptr;
    *p++ = '\n';
    out.append(buf, p);
  }
  return out;
}

namespace detail
{
template <typename T>
inline T parse_field(std::string_view & rest, std::size_t line, const char * name, bool last)
{
  const auto comma = rest.find(',');
  if (last != (comma == std::string_view::npos)) {
    throw CsvParseError(line, last ? "too many fields" : "too few fields");
  }
  const std::string_view field = last ? rest : rest.substr(0, comma);
  T v{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
    throw CsvParseError(line, std::string("bad ") + name + " '" + std::string(field) + "'");
  }
  rest = last ? std::string_view{} : rest.substr(comma + 1);
  return v;
}
}  // namespace detail

/// Parses `t_us,x,y,p` text. The CSV carries no geometry so the caller supplies it.
inline EventStream read_csv(std::string_view text, SensorGeometry geometry)
{
  if (!geometry.valid()) {
    throw std::invalid_argument("read_csv: invalid geometry");
  }
  EventStream s;
  s.geometry = geometry;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!seen_header) {
      if (line != kCsvHeader) {
        throw CsvParseError(line_no, "expected header '" + std::string(kCsvHeader) + "'");
      }
      seen_header = true;
      continue;
    }
    if (line.empty()) {
      if (text.empty()) break;
      throw CsvParseError(line_no, "empty line");
    }
    std::string_view rest = line;
    const auto t = detail::parse_field<std::uint64_t>(rest, line_no, "t_us", false);
    const auto x = detail::parse_field<std::uint32_t>(rest, line_no, "x", false);
    const auto y = detail::parse_field<std::uint32_t>(rest, line_no, "y", false);
    const auto p = detail::parse_field<int>(rest, line_no, "p", true);
    if (!geometry.contains(x, y)) {
      throw CsvParseError(line_no, "coordinate out of bounds");
    }
    if (p != 1 && p != -1) {
      throw CsvParseError(line_no, "polarity must be 1 or -1");
    }
    if (!s.events.empty() && t < s.events.back().t) {
      throw CsvParseError(line_no, "timestamps not sorted");
    }
    s.events.push_back(
      Event{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
            static_cast<std::int8_t>(p)});
  }
  if (!seen_header) {
    throw CsvParseError(1, "missing header");
  }
  return s;
}

}  // namespace evmelt::codec

#endif  // EVMELT_CODEC_HPP
