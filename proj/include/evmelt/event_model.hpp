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

#ifndef EVMELT_EVENT_MODEL_HPP
#define EVMELT_EVENT_MODEL_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace evmelt
{
/// Microseconds since the epoch of the owning stream.
using timestamp_us = std::uint64_t;

inline constexpr timestamp_us kTimeMax = std::numeric_limits<timestamp_us>::max();
inline constexpr std::uint32_t kMaxSensorDim = 16384;

struct SensorGeometry
{
  std::uint32_t width{0};
  std::uint32_t height{0};

  constexpr bool valid() const noexcept
  {
    return width >= 1 && height >= 1 && width <= kMaxSensorDim && height <= kMaxSensorDim;
  }
  constexpr std::size_t pixel_count() const noexcept
  {
    return static_cast<std::size_t>(width) * height;
  }
  constexpr bool contains(std::uint32_t x, std::uint32_t y) const noexcept
  {
    return x < width && y < height;
  }
  friend constexpr bool operator==(const SensorGeometry &, const SensorGeometry &) = default;
};

// Device geometries used as defaults by the demo configurations.
inline constexpr SensorGeometry kDvs240{240, 180};
inline constexpr SensorGeometry kDavis346{346, 260};

/// Throws std::invalid_argument unless the geometry satisfies the size limits.
inline SensorGeometry checked_geometry(std::uint32_t width, std::uint32_t height)
{
  SensorGeometry g{width, height};
  if (!g.valid()) {
    throw std::invalid_argument(
      "invalid sensor geometry " + std::to_string(width) + "x" + std::to_string(height));
  }
  return g;
}

struct Event
{
  timestamp_us t{0};
  std::uint16_t x{0};
  std::uint16_t y{0};
  std::int8_t p{1};  // +1 brighter, -1 darker

  friend constexpr bool operator==(const Event &, const Event &) = default;
};

struct EventStream
{
  SensorGeometry geometry{};
  std::vector<Event> events;
  std::optional<std::string> epoch_label;

  bool empty() const noexcept { return events.empty(); }
  std::size_t size() const noexcept { return events.size(); }

  // The label is descriptive metadata and does not take part in equality.
  friend bool operator==(const EventStream & a, const EventStream & b)
  {
    return a.geometry == b.geometry && a.events == b.events;
  }
};

struct ValidationReport
{
  bool ok{true};
  std::optional<std::size_t> index;  // first offending event, if any
  std::string message;
};

inline ValidationReport validate(const EventStream & stream)
{
  if (!stream.geometry.valid()) {
    return {false, std::nullopt, "invalid geometry"};
  }
  const auto & ev = stream.events;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const Event & e = ev[i];
    if (e.x >= stream.geometry.width) {
      return {false, i, "x out of bounds at index " + std::to_string(i)};
    }
    if (e.y >= stream.geometry.height) {
      return {false, i, "y out of bounds at index " + std::to_string(i)};
    }
    if (e.p != 1 && e.p != -1) {
      return {false, i, "bad polarity at index " + std::to_string(i)};
    }
    if (i > 0 && e.t < ev[i - 1].t) {
      return {false, i, "unsorted at index " + std::to_string(i)};
    }
  }
  return {};
}

namespace detail
{
inline auto lower_time(const std::vector<Event> & ev, timestamp_us t)
{
  return std::partition_point(ev.begin(), ev.end(), [t](const Event & e) { return e.t < t; });
}
}  // namespace detail

/// Events with t0 <= t < t1, in original order. Requires a time-sorted stream.
inline EventStream slice(const EventStream & stream, timestamp_us t0, timestamp_us t1)
{
  if (t0 > t1) {
    throw std::invalid_argument("slice: t0 > t1");
  }
  EventStream out{stream.geometry, {}, stream.epoch_label};
  const auto first = detail::lower_time(stream.events, t0);
  const auto last = t1 == kTimeMax ? stream.events.end() : detail::lower_time(stream.events, t1);
  if (first < last) {
    out.events.assign(first, last);
  }
  return out;
}

/// Time-ordered merge; on equal timestamps events from `a` come first.
inline EventStream merge(const EventStream & a, const EventStream & b)
{
  if (!(a.geometry == b.geometry)) {
    throw std::invalid_argument("merge: geometry mismatch");
  }
  EventStream out{a.geometry, {}, a.epoch_label ? a.epoch_label : b.epoch_label};
  out.events.reserve(a.events.size() + b.events.size());
  // std::merge takes from the first range when neither compares less.
  std::merge(
    a.events.begin(), a.events.end(), b.events.begin(), b.events.end(),
    std::back_inserter(out.events), [](const Event & l, const Event & r) { return l.t < r.t; });
  return out;
}

inline timestamp_us first_time(const EventStream & s)
{
  if (s.empty()) throw std::invalid_argument("stream has no events");
  return s.events.front().t;
}

inline timestamp_us last_time(const EventStream & s)
{
  if (s.empty()) throw std::invalid_argument("stream has no events");
  return s.events.back().t;
}

}  // namespace evmelt

#endif  // EVMELT_EVENT_MODEL_HPP
