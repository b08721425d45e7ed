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

#ifndef EVMELT_SENSOR_SIM_HPP
#define EVMELT_SENSOR_SIM_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evmelt/event_model.hpp"
#include "evmelt/io.hpp"

namespace evmelt
{
/// Per-pixel log-intensity change detector parameters.
struct SensorModel
{
  double contrast_threshold{0.15};  // natural-log units
  std::uint64_t refractory_us{0};
  double mismatch_sigma{0.0};  // std-dev of per-pixel threshold, as a fraction of C
  // Linear-intensity floor added before the log. Unset means 1e-6 of the video's peak.
  std::optional<double> intensity_floor;
  std::uint64_t rng_seed{0};
  double background_rate_hz{0.0};  // per-pixel Poisson noise events; 0 disables

  void check() const
  {
    if (!(contrast_threshold > 0) || !std::isfinite(contrast_threshold)) {
      throw std::invalid_argument("sensor: contrast_threshold must be > 0");
    }
    if (!(mismatch_sigma >= 0 && mismatch_sigma < 1)) {
      throw std::invalid_argument("sensor: mismatch_sigma must be in [0, 1)");
    }
    if (intensity_floor && !(*intensity_floor > 0 && std::isfinite(*intensity_floor))) {
      throw std::invalid_argument("sensor: intensity_floor must be > 0");
    }
    if (!(background_rate_hz >= 0) || !std::isfinite(background_rate_hz)) {
      throw std::invalid_argument("sensor: background_rate_hz must be >= 0");
    }
  }
};

inline constexpr double kDefaultFloorFraction = 1e-6;

/// Anything that can hand out linear-intensity frames at known times.
template <typename V>
concept VideoSource = requires(const V & v, std::size_t k, std::span<double> out) {
  { v.geometry() } -> std::convertible_to<SensorGeometry>;
  { v.frame_count() } -> std::convertible_to<std::size_t>;
  { v.frame_time_us(k) } -> std::convertible_to<double>;
  { v.peak_intensity() } -> std::convertible_to<double>;
  v.render_frame(k, out);
};

/// Materialized video: a stack of row-major linear intensity frames.
struct IntensityVideo
{
  SensorGeometry geom{};
  double frame_period_us{1000.0};
  std::vector<std::vector<double>> frames;
  // Set when the video came from a procedural source that knows its peak analytically.
  std::optional<double> declared_peak;

  SensorGeometry geometry() const { return geom; }
  std::size_t frame_count() const { return frames.size(); }
  double frame_time_us(std::size_t k) const { return static_cast<double>(k) * frame_period_us; }
  double peak_intensity() const
  {
    if (declared_peak) return *declared_peak;
    double m = 0;
    for (const auto & f : frames) {
      for (double v : f) m = std::max(m, v);
    }
    return m;
  }
  void render_frame(std::size_t k, std::span<double> out) const
  {
    std::copy(frames[k].begin(), frames[k].end(), out.begin());
  }

  void check() const
  {
    if (!geom.valid()) throw std::invalid_argument("video: invalid geometry");
    if (frames.size() < 2) throw std::invalid_argument("video: need at least 2 frames");
    if (!(frame_period_us > 0) || !std::isfinite(frame_period_us)) {
      throw std::invalid_argument("video: frame_period_us must be > 0");
    }
    for (const auto & f : frames) {
      if (f.size() != geom.pixel_count()) {
        throw std::invalid_argument("video: frame size does not match geometry");
      }
      for (double v : f) {
        if (!(v >= 0) || !std::isfinite(v)) {
          throw std::invalid_argument("video: intensities must be finite and >= 0");
        }
      }
    }
  }
};

template <VideoSource V>
IntensityVideo materialize(const V & src)
{
  IntensityVideo v;
  v.geom = src.geometry();
  v.frames.resize(src.frame_count());
  for (std::size_t k = 0; k < v.frames.size(); ++k) {
    v.frames[k].resize(v.geom.pixel_count());
    src.render_frame(k, v.frames[k]);
  }
  v.frame_period_us = v.frames.size() > 1 ? src.frame_time_us(1) - src.frame_time_us(0) : 1.0;
  v.declared_peak = src.peak_intensity();
  return v;
}

/// Debug dump of one video frame: linear intensity quantized to 16 bits as
/// round(65535 * I / scale), clamped. Pair it with video_scale_sidecar(scale).
template <VideoSource V>
io::Image16 video_frame_image(const V & src, std::size_t k, double scale)
{
  if (!(scale > 0)) throw std::invalid_argument("video_frame_image: scale must be > 0");
  const SensorGeometry g = src.geometry();
  std::vector<double> buf(g.pixel_count());
  src.render_frame(k, buf);
  io::Image16 img{g.width, g.height, std::vector<std::uint16_t>(buf.size())};
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const double q = std::clamp(std::round(65535.0 * buf[i] / scale), 0.0, 65535.0);
    img.pixels[i] = static_cast<std::uint16_t>(q);
  }
  return img;
}

inline std::string video_scale_sidecar(double scale, double frame_period_us)
{
  char buf[128];
  std::snprintf(buf, sizeof buf, "scale=%.17g\nmaxval=65535\nframe_period_us=%.17g\n", scale, frame_period_us);
  return buf;
}

namespace detail
{
// Standard normal from mt19937_64 via Box-Muller. std::normal_distribution is
// implementation-defined, which would make golden outputs toolchain dependent.
class NormalSource
{
public:
  explicit NormalSource(std::uint64_t seed) : rng_(seed) {}

  double uniform01()
  {
    // 53 random bits, strictly inside (0, 1)
    return (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double operator()()
  {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  std::mt19937_64 & engine() { return rng_; }

private:
  std::mt19937_64 rng_;
  double spare_{0};
  bool have_spare_{false};
};

// Slack on threshold comparisons, in log units. Keeps a change of exactly k*C
// from losing its last crossing to rounding in log().
inline constexpr double kThresholdSlack = 1e-9;

struct PixelState
{
  double ref{0};        // reference log intensity
  double threshold{0};  // per-pixel contrast threshold
  double rearm_at{0};   // time at which the pixel leaves its refractory period
  bool armed{true};
};

inline timestamp_us quantize(double t_us) { return static_cast<timestamp_us>(std::llround(t_us)); }

// Advance one pixel across the linear log-intensity segment (ta, la) -> (tb, lb).
template <typename Emit>
inline void advance_pixel(
  PixelState & st, double ta, double tb, double la, double lb, std::uint64_t refractory_us,
  Emit && emit)
{
  const double dt = tb - ta;
  const double dl = lb - la;
  double s = ta;
  for (;;) {
    if (!st.armed) {
      if (st.rearm_at >= tb) return;
      s = std::max(s, st.rearm_at);
      st.ref = la + dl * ((s - ta) / dt);
      st.armed = true;
    }
    double target;
    std::int8_t pol;
    if (dl > 0 && lb >= st.ref + st.threshold - kThresholdSlack) {
      target = st.ref + st.threshold;
      pol = 1;
    } else if (dl < 0 && lb <= st.ref - st.threshold + kThresholdSlack) {
      target = st.ref - st.threshold;
      pol = -1;
    } else {
      return;
    }
    const double tc = std::clamp(ta + (target - la) / dl * dt, s, tb);
    const timestamp_us te = quantize(tc);
    emit(te, pol);
    st.ref = target;
    s = tc;
    if (refractory_us > 0) {
      st.armed = false;
      st.rearm_at = static_cast<double>(te + refractory_us);
    }
  }
}
}  // namespace detail

/// Per-pixel log-intensity threshold model.
///
/// Each pixel tracks L(t) = ln(I(t) + floor), linear in time between frames, and
/// fires whenever L moves a full per-pixel threshold away from its reference.
/// Crossing times are solved analytically inside each frame interval and rounded
/// to the nearest microsecond. After an event the pixel is silent for
/// refractory_us and then re-arms with its reference snapped to the current L.
/// The output is ordered by (t, y, x); events of one pixel keep emission order.
template <VideoSource V>
EventStream simulate(const V & video, const SensorModel & model)
{
  model.check();
  const SensorGeometry g = video.geometry();
  if (!g.valid()) throw std::invalid_argument("simulate: invalid geometry");
  const std::size_t nframes = video.frame_count();
  if (nframes < 2) throw std::invalid_argument("simulate: need at least 2 frames");
  const std::size_t npx = g.pixel_count();

  double floor = 0;
  if (model.intensity_floor) {
    floor = *model.intensity_floor;
  } else {
    const double peak = video.peak_intensity();
    floor = peak > 0 ? kDefaultFloorFraction * peak : kDefaultFloorFraction;
  }

  std::vector<detail::PixelState> state(npx);
  {
    detail::NormalSource normal(model.rng_seed);
    for (auto & st : state) {
      const double draw = model.mismatch_sigma > 0 ? normal() : 0.0;
      // Clamp so a large negative draw cannot produce a non-positive threshold.
      st.threshold = model.contrast_threshold * std::max(1.0 + model.mismatch_sigma * draw, 1e-3);
    }
  }

  std::vector<double> frame(npx), prev_log(npx), next_log(npx);
  auto to_log = [floor](std::span<const double> in, std::span<double> out) {
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (!(in[i] >= 0) || !std::isfinite(in[i])) {
        throw std::invalid_argument("simulate: intensities must be finite and >= 0");
      }
      out[i] = std::log(in[i] + floor);
    }
  };

  video.render_frame(0, frame);
  to_log(frame, prev_log);
  for (std::size_t i = 0; i < npx; ++i) state[i].ref = prev_log[i];

  EventStream out;
  out.geometry = g;
  auto & events = out.events;

  double ta = video.frame_time_us(0);
  for (std::size_t k = 1; k < nframes; ++k) {
    const double tb = video.frame_time_us(k);
    if (!(tb > ta)) throw std::invalid_argument("simulate: frame times must increase");
    video.render_frame(k, frame);
    to_log(frame, next_log);
    for (std::uint32_t y = 0; y < g.height; ++y) {
      for (std::uint32_t x = 0; x < g.width; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * g.width + x;
        detail::advance_pixel(
          state[i], ta, tb, prev_log[i], next_log[i], model.refractory_us,
          [&](timestamp_us t, std::int8_t p) {
            events.push_back(
              Event{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), p});
          });
      }
    }
    std::swap(prev_log, next_log);
    ta = tb;
  }

  auto by_pixel_then_time = [](const Event & a, const Event & b) {
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.t < b.t;
  };

  if (model.background_rate_hz > 0) {
    // Noise events are drawn per pixel after the signal pass and dropped when they
    // would violate the refractory period of an already emitted event.
    const double t0 = video.frame_time_us(0);
    const double t1 = video.frame_time_us(nframes - 1);
    const double mean_gap_us = 1e6 / model.background_rate_hz;
    detail::NormalSource noise(model.rng_seed ^ 0x9E3779B97F4A7C15ull);
    std::vector<Event> extra;
    for (std::uint32_t y = 0; y < g.height; ++y) {
      for (std::uint32_t x = 0; x < g.width; ++x) {
        double t = t0;
        for (;;) {
          t += -std::log(noise.uniform01()) * mean_gap_us;
          if (t > t1) break;
          const std::int8_t p = (noise.engine()() >> 63) ? 1 : -1;
          extra.push_back(
            Event{detail::quantize(t), static_cast<std::uint16_t>(x),
                  static_cast<std::uint16_t>(y), p});
        }
      }
    }
    std::stable_sort(events.begin(), events.end(), by_pixel_then_time);
    std::vector<Event> combined;
    combined.reserve(events.size() + extra.size());
    std::merge(
      events.begin(), events.end(), extra.begin(), extra.end(), std::back_inserter(combined),
      by_pixel_then_time);
    events.clear();
    for (const Event & e : combined) {
      if (
        model.refractory_us > 0 && !events.empty() && events.back().x == e.x &&
        events.back().y == e.y && e.t < events.back().t + model.refractory_us) {
        continue;
      }
      events.push_back(e);
    }
  }

  std::stable_sort(events.begin(), events.end(), [](const Event & a, const Event & b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  return out;
}

}  // namespace evmelt

#endif  // EVMELT_SENSOR_SIM_HPP
