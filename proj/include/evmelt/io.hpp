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

#ifndef EVMELT_IO_HPP
#define EVMELT_IO_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evmelt::io
{
class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string read_text(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes to a sibling temp file and renames over the target, so readers never
/// observe a partially written artifact.
inline void write_atomic(const std::filesystem::path & path, std::span<const char> data)
{
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
      throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("cannot open " + tmp.string() + " for writing");
    }
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) {
      throw IoError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename onto " + path.string());
  }
}

inline void write_atomic(const std::filesystem::path & path, std::string_view text)
{
  write_atomic(path, std::span<const char>(text.data(), text.size()));
}

inline void write_atomic(const std::filesystem::path & path, std::span<const std::uint8_t> bytes)
{
  write_atomic(
    path, std::span<const char>(reinterpret_cast<const char *>(bytes.data()), bytes.size()));
}

struct Image8
{
  std::uint32_t width{0};
  std::uint32_t height{0};
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(std::uint32_t x, std::uint32_t y) const { return pixels[y * width + x]; }
};

struct Image16
{
  std::uint32_t width{0};
  std::uint32_t height{0};
  std::vector<std::uint16_t> pixels;
};

/// Binary PGM (P5), maxval 255.
inline std::string encode_pgm(const Image8 & img)
{
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n255\n";
  out.append(img.pixels.begin(), img.pixels.end());
  return out;
}

/// Binary PGM (P5), maxval 65535, big-endian samples as the format requires.
inline std::string encode_pgm(const Image16 & img)
{
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n65535\n";
  out.reserve(out.size() + img.pixels.size() * 2);
  for (std::uint16_t v : img.pixels) {
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xFF));
  }
  return out;
}

inline Image8 decode_pgm8(std::string_view data)
{
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < data.size() && (data[pos] == ' ' || data[pos] == '\n' || data[pos] == '\r' ||
                                 data[pos] == '\t')) {
      ++pos;
    }
    const std::size_t start = pos;
    while (pos < data.size() && data[pos] != ' ' && data[pos] != '\n' && data[pos] != '\r' &&
           data[pos] != '\t') {
      ++pos;
    }
    return std::string(data.substr(start, pos - start));
  };
  if (token() != "P5") throw IoError("not a binary PGM");
  Image8 img;
  try {
    img.width = static_cast<std::uint32_t>(std::stoul(token()));
    img.height = static_cast<std::uint32_t>(std::stoul(token()));
    if (token() != "255") throw IoError("only maxval 255 supported");
  } catch (const std::logic_error &) {
    throw IoError("malformed PGM header");
  }
  ++pos;  // single whitespace before the raster
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (data.size() < pos + n) throw IoError("truncated PGM raster");
  img.pixels.assign(data.begin() + pos, data.begin() + pos + n);
  return img;
}

}  // namespace evmelt::io

#endif  // EVMELT_IO_HPP
