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

#ifndef EVMELT_FRAMING_HPP
#define EVMELT_FRAMING_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evmelt/event_model.hpp"
#include "evmelt/io.hpp"

namespace evmelt
{
enum class CodeKind { boxcar, flutter, bandpass };

inline const char * to_string(CodeKind k)
{
  switch (k) {
    case CodeKind::boxcar:
      return "boxcar";
    case CodeKind::flutter:
      return "flutter";
    case CodeKind::bandpass:
      return "bandpass";
  }
  return "?";
}

inline CodeKind parse_code_kind(std::string_view s)
{
  if (s == "boxcar") return CodeKind::boxcar;
  if (s == "flutter") return CodeKind::flutter;
  if (s == "bandpass") return CodeKind::bandpass;
  throw std::invalid_argument("unknown code kind '" + std::string(s) + "'");
}

/// Temporal weight function applied to events inside a frame window.
///
/// Offsets tau are measured from the window start, 0 <= tau < window_us.
///  - boxcar:   c(tau) = 1
///  - flutter:  c(tau) = chip[floor(tau * chip_count / window_us)], chips are +-1
///  - bandpass: c(tau) = 0.5 (1 - cos(2 pi tau / W)) * cos(2 pi f0 (tau - W/2))
class ExposureCode
{
public:
  // Event timestamps are integer microseconds, so the code is sampled at 1 us.
  static constexpr double kSampleSpacingUs = 1.0;

  static ExposureCode boxcar(std::uint64_t window_us)
  {
    ExposureCode c(CodeKind::boxcar, window_us);
    c.check();
    return c;
  }

  static ExposureCode flutter(std::uint64_t window_us, std::uint32_t chip_count, std::uint64_t seed)
  {
    ExposureCode c(CodeKind::flutter, window_us);
    c.seed_ = seed;
    if (chip_count < 1) throw std::invalid_argument("flutter code: chip_count must be >= 1");
    std::mt19937_64 rng(seed);
    c.chips_.resize(chip_count);
    for (auto & chip : c.chips_) chip = (rng() >> 63) ? 1 : -1;
    c.check();
    return c;
  }

  static ExposureCode flutter_with_chips(std::uint64_t window_us, std::vector<std::int8_t> chips)
  {
    ExposureCode c(CodeKind::flutter, window_us);
    c.chips_ = std::move(chips);
    c.explicit_chips_ = true;
    c.check();
    return c;
  }

  static ExposureCode bandpass(std::uint64_t window_us, double center_freq_hz)
  {
    ExposureCode c(CodeKind::bandpass, window_us);
    c.f0_ = center_freq_hz;
    c.check();
    return c;
  }

  CodeKind kind() const { return kind_; }
  std::uint64_t window_us() const { return window_us_; }
  double center_freq_hz() const { return f0_; }
  const std::vector<std::int8_t> & chips() const { return chips_; }

  /// Weight at offset tau (microseconds) from the window start; 0 outside the window.
  double weight(double tau_us) const
  {
    if (tau_us < 0 || tau_us >= static_cast<double>(window_us_)) return 0.0;
    switch (kind_) {
      case CodeKind::boxcar:
        return 1.0;
      case CodeKind::flutter: {
        const auto idx = static_cast<std::size_t>(
          static_cast<unsigned __int128>(static_cast<std::uint64_t>(tau_us)) * chips_.size() /
          window_us_);
        return chips_[std::min(idx, chips_.size() - 1)];
      }
      case CodeKind::bandpass: {
        const double w = static_cast<double>(window_us_);
        const double env = 0.5 * (1.0 - std::cos(2 * std::numbers::pi * tau_us / w));
        return env * std::cos(2 * std::numbers::pi * f0_ * (tau_us - 0.5 * w) * 1e-6);
      }
    }
    return 0.0;
  }

  std::string descriptor() const
  {
    std::ostringstream os;
    os << to_string(kind_) << "(window_us=" << window_us_;
    if (kind_ == CodeKind::flutter) {
      os << ",chips=" << chips_.size();
      if (explicit_chips_) {
        os << ",pattern=";
        for (auto ch : chips_) os << (ch > 0 ? '+' : '-');
      } else {
        os << ",seed=" << seed_;
      }
    }
    if (kind_ == CodeKind::bandpass) os << ",f0_hz=" << f0_;
    os << ")";
    return os.str();
  }

  void check() const
  {
    if (window_us_ == 0) throw std::invalid_argument("exposure code: window_us must be > 0");
    if (kind_ == CodeKind::flutter) {
      if (chips_.empty()) throw std::invalid_argument("flutter code: chip_count must be >= 1");
      for (auto ch : chips_) {
        if (ch != 1 && ch != -1) throw std::invalid_argument("flutter code: chips must be +-1");
      }
    }
    if (kind_ == CodeKind::bandpass) {
      const double nyquist = 1e6 / (2 * kSampleSpacingUs);
      if (!(f0_ > 0) || f0_ > nyquist) {
        throw std::invalid_argument("bandpass code: need 0 < f0 <= " + std::to_string(nyquist));
      }
    }
  }

private:
  ExposureCode(CodeKind k, std::uint64_t window_us) : kind_(k), window_us_(window_us) {}

  CodeKind kind_;
  std::uint64_t window_us_;
  std::vector<std::int8_t> chips_;
  std::uint64_t seed_{0};
  bool explicit_chips_{false};
  double f0_{0};
};

struct Frame
{
  SensorGeometry geometry{};
  timestamp_us t_start_us{0};
  std::uint64_t window_us{0};
  std::vector<double> values;  // row-major signed accumulation
  std::string code_descriptor;

  double at(std::uint32_t x, std::uint32_t y) const { return values[y * geometry.width + x]; }
  double & at(std::uint32_t x, std::uint32_t y) { return values[y * geometry.width + x]; }
  /// Time the frame is reported at: the middle of its window.
  double center_us() const { return static_cast<double>(t_start_us) + 0.5 * window_us; }
};

namespace detail
{
inline std::pair<std::size_t, std::size_t> window_range(
  const EventStream & s, timestamp_us t0, std::uint64_t window)
{
  const timestamp_us t1 = t0 > kTimeMax - window ? kTimeMax : t0 + window;
  const auto b = lower_time(s.events, t0);
  const auto e = lower_time(s.events, t1);
  return {static_cast<std::size_t>(b - s.events.begin()), static_cast<std::size_t>(e - s.events.begin())};
}
}  // namespace detail

/// Net polarity count per pixel over [t_start, t_start + window).
inline Frame accumulate(const EventStream & stream, timestamp_us t_start, std::uint64_t window_us)
{
  if (window_us == 0) throw std::invalid_argument("accumulate: window_us must be > 0");
  Frame f{stream.geometry, t_start, window_us, std::vector<double>(stream.geometry.pixel_count(), 0.0),
          "accumulate(window_us=" + std::to_string(window_us) + ")"};
  const auto [b, e] = detail::window_range(stream, t_start, window_us);
  for (std::size_t i = b; i < e; ++i) {
    const Event & ev = stream.events[i];
    f.values[static_cast<std::size_t>(ev.y) * stream.geometry.width + ev.x] += ev.p;
  }
  return f;
}

/// Sum of p * c(t - t_start) per pixel, with c evaluated at each exact event time.
inline Frame coded_frame(const EventStream & stream, const ExposureCode & code, timestamp_us t_start)
{
  code.check();
  Frame f{stream.geometry, t_start, code.window_us(),
          std::vector<double>(stream.geometry.pixel_count(), 0.0), code.descriptor()};
  const auto [b, e] = detail::window_range(stream, t_start, code.window_us());
  for (std::size_t i = b; i < e; ++i) {
    const Event & ev = stream.events[i];
    f.values[static_cast<std::size_t>(ev.y) * stream.geometry.width + ev.x] +=
      ev.p * code.weight(static_cast<double>(ev.t - t_start));
  }
  return f;
}

/// Frames starting at t_first + k * stride for every start strictly before t_last.
inline std::vector<Frame> frame_sequence(
  const EventStream & stream, std::uint64_t stride_us, const ExposureCode & code)
{
  if (stride_us == 0) throw std::invalid_argument("frame_sequence: stride_us must be > 0");
  std::vector<Frame> frames;
  if (stream.empty()) return frames;
  const timestamp_us t_first = stream.events.front().t;
  const timestamp_us t_last = stream.events.back().t;
  for (timestamp_us t = t_first; t < t_last; t += stride_us) {
    frames.push_back(coded_frame(stream, code, t));
    if (t > kTimeMax - stride_us) break;
  }
  return frames;
}

/// Plain event-count frames over the same start grid as frame_sequence.
inline std::vector<Frame> accumulate_sequence(
  const EventStream & stream, std::uint64_t stride_us, std::uint64_t window_us)
{
  if (stride_us == 0) throw std::invalid_argument("accumulate_sequence: stride_us must be > 0");
  std::vector<Frame> frames;
  if (stream.empty()) return frames;
  const timestamp_us t_first = stream.events.front().t;
  const timestamp_us t_last = stream.events.back().t;
  for (timestamp_us t = t_first; t < t_last; t += stride_us) {
    frames.push_back(accumulate(stream, t, window_us));
    if (t > kTimeMax - stride_us) break;
  }
  return frames;
}

inline double frame_energy(const Frame & f)
{
  double e = 0;
  for (double v : f.values) e += v * v;
  return e;
}

struct ImageMapping
{
  enum class Kind { symmetric_max, fixed_scale } kind{Kind::symmetric_max};
  double scale{1.0};

  static ImageMapping symmetric_max() { return {Kind::symmetric_max, 1.0}; }
  static ImageMapping fixed_scale(double s)
  {
    if (!(s > 0)) throw std::invalid_argument("fixed_scale: scale must be > 0");
    return {Kind::fixed_scale, s};
  }
};

/// Signed values to 8-bit gray: 0 -> 128, -s -> 0, +s -> 255, clamped outside.
inline io::Image8 to_image(const Frame & frame, ImageMapping mapping)
{
  double s = mapping.scale;
  if (mapping.kind == ImageMapping::Kind::symmetric_max) {
    s = 0;
    for (double v : frame.values) s = std::max(s, std::abs(v));
  }
  io::Image8 img{frame.geometry.width, frame.geometry.height,
                 std::vector<std::uint8_t>(frame.values.size(), 128)};
  if (s <= 0) return img;
  for (std::size_t i = 0; i < frame.values.size(); ++i) {
    const double r = std::clamp(frame.values[i] / s, -1.0, 1.0);
    const double g = r >= 0 ? 128.0 + r * 127.0 : 128.0 + r * 128.0;
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(g));
  }
  return img;
}

/// Text manifest for a frame sequence: one line per frame.
inline std::string frame_manifest(const std::vector<Frame> & frames)
{
  std::ostringstream os;
  os << "# index file t_start_us window_us code\n";
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06zu.pgm", i);
    os << i << ' ' << name << ' ' << frames[i].t_start_us << ' ' << frames[i].window_us << ' '
       << frames[i].code_descriptor << '\n';
  }
  return os.str();
}

}  // namespace evmelt

#endif  // EVMELT_FRAMING_HPP
