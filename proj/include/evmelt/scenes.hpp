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

#ifndef EVMELT_SCENES_HPP
#define EVMELT_SCENES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evmelt/event_model.hpp"
#include "evmelt/sensor_sim.hpp"

namespace evmelt
{
enum class SceneKind { constant, step, ramp, flicker, balloon_pop, meltpool };

inline const char * to_string(SceneKind k)
{
  switch (k) {
    case SceneKind::constant:
      return "constant";
    case SceneKind::step:
      return "step";
    case SceneKind::ramp:
      return "ramp";
    case SceneKind::flicker:
      return "flicker";
    case SceneKind::balloon_pop:
      return "balloon_pop";
    case SceneKind::meltpool:
      return "meltpool";
  }
  return "?";
}

inline SceneKind parse_scene_kind(std::string_view s)
{
  for (auto k : {SceneKind::constant, SceneKind::step, SceneKind::ramp, SceneKind::flicker,
                 SceneKind::balloon_pop, SceneKind::meltpool}) {
    if (s == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown scene kind '" + std::string(s) + "'");
}

/// A bright contaminant blob orbiting the pool center.
struct AnomalySpec
{
  double orbit_radius_px{45.0};
  double orbit_hz{0.5};
  double phase_rad{0.0};
  double t_on_us{0.0};
  double t_off_us{1e18};
  double radius_px{4.0};
  double contrast_log{1.0};        // log brightness excess at the blob center
  double shimmer_amplitude{4.5};  // log-units flicker riding on the blob
};

struct SceneSpec
{
  SceneKind kind{SceneKind::constant};
  double level{1000.0};
  std::uint64_t seed{0};

  // step
  double step_ratio{2.0};
  double step_time_us{0.0};  // 0 means the midpoint of the clip

  // ramp: I = level * exp(slope * t)
  double ramp_slope{10.0};  // log-units per second

  // flicker: I = level * exp(a * sin(2 pi f t))
  double flicker_amplitude{0.6};
  double flicker_hz{50.0};

  // balloon_pop
  double pop_time_us{3e6};
  double pop_tau_us{4e4};
  double balloon_radius_frac{0.35};  // of the smaller image dimension
  double checker_period_px{8.0};
  double checker_contrast{4.0};
  double burst_expansion{1.5};  // final radial scale is 1 + burst_expansion
  double sway_amplitude_px{0.3};
  double sway_hz{0.5};

  // meltpool
  double pool_peak_factor{1e6};  // hot spot peak relative to the background level
  double pool_sigma_px{40.0};
  double keyhole_radius_px{14.0};  // geometric-mean semi-axis, area stays constant
  double ar_min{1.0};
  double ar_max{2.5};
  double keyhole_hz{5.0};
  double keyhole_orientation_rad{0.3};
  double keyhole_depth{3.0};  // log-units darker than the surrounding pool
  double keyhole_edge_px{1.0};
  double shimmer_amplitude{0.45};  // keyhole log-intensity flicker
  double shimmer_hz{200.0};
  std::vector<AnomalySpec> anomalies;

  void check() const
  {
    auto pos = [](double v, const char * name) {
      if (!(v > 0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string("scene: ") + name + " must be > 0");
      }
    };
    auto nonneg = [](double v, const char * name) {
      if (!(v >= 0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string("scene: ") + name + " must be >= 0");
      }
    };
    pos(level, "level");
    switch (kind) {
      case SceneKind::constant:
        break;
      case SceneKind::step:
        pos(step_ratio, "step_ratio");
        nonneg(step_time_us, "step_time_us");
        break;
      case SceneKind::ramp:
        if (!std::isfinite(ramp_slope)) throw std::invalid_argument("scene: ramp_slope");
        break;
      case SceneKind::flicker:
        nonneg(flicker_amplitude, "flicker_amplitude");
        pos(flicker_hz, "flicker_hz");
        break;
      case SceneKind::balloon_pop:
        pos(pop_time_us, "pop_time_us");
        pos(pop_tau_us, "pop_tau_us");
        if (!(balloon_radius_frac > 0 && balloon_radius_frac <= 0.5)) {
          throw std::invalid_argument("scene: balloon_radius_frac must be in (0, 0.5]");
        }
        pos(checker_period_px, "checker_period_px");
        if (!(checker_contrast >= 1)) throw std::invalid_argument("scene: checker_contrast >= 1");
        nonneg(burst_expansion, "burst_expansion");
        nonneg(sway_amplitude_px, "sway_amplitude_px");
        nonneg(sway_hz, "sway_hz");
        break;
      case SceneKind::meltpool:
        if (!(pool_peak_factor >= 1)) throw std::invalid_argument("scene: pool_peak_factor >= 1");
        pos(pool_sigma_px, "pool_sigma_px");
        pos(keyhole_radius_px, "keyhole_radius_px");
        if (!(ar_min >= 1 && ar_max >= ar_min)) {
          throw std::invalid_argument("scene: need 1 <= ar_min <= ar_max");
        }
        nonneg(keyhole_hz, "keyhole_hz");
        nonneg(keyhole_depth, "keyhole_depth");
        pos(keyhole_edge_px, "keyhole_edge_px");
        nonneg(shimmer_amplitude, "shimmer_amplitude");
        pos(shimmer_hz, "shimmer_hz");
        for (const auto & a : anomalies) {
          nonneg(a.orbit_radius_px, "anomaly orbit_radius_px");
          pos(a.radius_px, "anomaly radius_px");
          nonneg(a.shimmer_amplitude, "anomaly shimmer_amplitude");
          if (!(a.t_off_us > a.t_on_us)) throw std::invalid_argument("scene: anomaly t_off <= t_on");
        }
        break;
    }
  }
};

struct AnomalyPath
{
  double t_on_us{0};
  double t_off_us{0};
  std::vector<double> t_us;  // frame times inside the lifetime
  std::vector<double> x;
  std::vector<double> y;
};

/// Generating parameters echoed back per frame, used as test oracles.
struct SceneTruth
{
  std::vector<double> frame_times_us;
  std::vector<double> aspect_ratio;  // meltpool only
  std::vector<AnomalyPath> anomalies;
  std::optional<double> pop_time_us;
};

/// Procedural video for a scene. Frames are rendered on demand so long, large
/// scenes never have to be held in memory.
class SceneSource
{
public:
  SceneSource(const SceneSpec & spec, SensorGeometry geometry, std::uint64_t duration_us, double fps)
  : spec_(spec), geom_(geometry), duration_us_(duration_us), fps_(fps)
  {
    spec_.check();
    if (!geom_.valid()) throw std::invalid_argument("scene: invalid geometry");
    if (!(fps > 0) || !std::isfinite(fps)) throw std::invalid_argument("scene: fps must be > 0");
    const double n = std::floor(static_cast<double>(duration_us) * fps / 1e6);
    if (n < 1) {
      throw std::invalid_argument("scene: fps * duration must yield at least 2 frames");
    }
    frame_count_ = static_cast<std::size_t>(n) + 1;
    period_us_ = 1e6 / fps;
    cx_ = 0.5 * (geom_.width - 1);
    cy_ = 0.5 * (geom_.height - 1);
    if (spec_.kind == SceneKind::step && spec_.step_time_us == 0) {
      spec_.step_time_us = 0.5 * static_cast<double>(duration_us);
    }
    if (spec_.kind == SceneKind::balloon_pop && spec_.pop_time_us >= static_cast<double>(duration_us)) {
      throw std::invalid_argument("scene: pop_time_us must lie inside the clip");
    }
    if (spec_.kind == SceneKind::meltpool) prepare_meltpool();
    if (spec_.kind == SceneKind::balloon_pop) prepare_balloon();
  }

  SensorGeometry geometry() const { return geom_; }
  std::size_t frame_count() const { return frame_count_; }
  double frame_time_us(std::size_t k) const { return static_cast<double>(k) * period_us_; }
  const SceneSpec & spec() const { return spec_; }

  double peak_intensity() const
  {
    switch (spec_.kind) {
      case SceneKind::constant:
        return spec_.level;
      case SceneKind::step:
        return spec_.level * std::max(1.0, spec_.step_ratio);
      case SceneKind::ramp:
        return spec_.level *
               std::exp(std::max(0.0, spec_.ramp_slope * static_cast<double>(duration_us_) * 1e-6));
      case SceneKind::flicker:
        return spec_.level * std::exp(spec_.flicker_amplitude);
      case SceneKind::balloon_pop:
        return spec_.level * spec_.checker_contrast;
      case SceneKind::meltpool: {
        double boost = spec_.shimmer_amplitude;
        for (const auto & a : spec_.anomalies) {
          boost = std::max(boost, a.contrast_log + a.shimmer_amplitude);
        }
        return spec_.level * spec_.pool_peak_factor * std::exp(boost);
      }
    }
    return spec_.level;
  }

  void render_frame(std::size_t k, std::span<double> out) const
  {
    const double t_us = frame_time_us(k);
    const double t = t_us * 1e-6;
    switch (spec_.kind) {
      case SceneKind::constant:
        std::fill(out.begin(), out.end(), spec_.level);
        break;
      case SceneKind::step:
        std::fill(
          out.begin(), out.end(),
          t_us < spec_.step_time_us ? spec_.level : spec_.level * spec_.step_ratio);
        break;
      case SceneKind::ramp:
        std::fill(out.begin(), out.end(), spec_.level * std::exp(spec_.ramp_slope * t));
        break;
      case SceneKind::flicker:
        std::fill(
          out.begin(), out.end(),
          spec_.level * std::exp(
                          spec_.flicker_amplitude * std::sin(2 * std::numbers::pi * spec_.flicker_hz * t)));
        break;
      case SceneKind::balloon_pop:
        render_balloon(t_us, out);
        break;
      case SceneKind::meltpool:
        render_meltpool(t_us, out);
        break;
    }
  }

  /// Keyhole aspect ratio: midpoint + amplitude * sin(2 pi f t).
  double aspect_ratio_at(double t_us) const
  {
    const double mid = 0.5 * (spec_.ar_min + spec_.ar_max);
    const double amp = 0.5 * (spec_.ar_max - spec_.ar_min);
    return mid + amp * std::sin(2 * std::numbers::pi * spec_.keyhole_hz * t_us * 1e-6);
  }

  bool anomaly_active(std::size_t j, double t_us) const
  {
    const auto & a = spec_.anomalies.at(j);
    return t_us >= a.t_on_us && t_us < a.t_off_us;
  }

  /// Anomaly center at time t (defined whether or not it is active).
  std::pair<double, double> anomaly_position(std::size_t j, double t_us) const
  {
    const auto & a = spec_.anomalies.at(j);
    const double ang = 2 * std::numbers::pi * a.orbit_hz * t_us * 1e-6 + a.phase_rad;
    return {cx_ + a.orbit_radius_px * std::cos(ang), cy_ + a.orbit_radius_px * std::sin(ang)};
  }

  double center_x() const { return cx_; }
  double center_y() const { return cy_; }

  SceneTruth truth() const
  {
    SceneTruth tr;
    tr.frame_times_us.resize(frame_count_);
    for (std::size_t k = 0; k < frame_count_; ++k) tr.frame_times_us[k] = frame_time_us(k);
    if (spec_.kind == SceneKind::meltpool) {
      for (double t : tr.frame_times_us) tr.aspect_ratio.push_back(aspect_ratio_at(t));
      for (std::size_t j = 0; j < spec_.anomalies.size(); ++j) {
        AnomalyPath p;
        p.t_on_us = spec_.anomalies[j].t_on_us;
        p.t_off_us = std::min(spec_.anomalies[j].t_off_us, static_cast<double>(duration_us_));
        for (double t : tr.frame_times_us) {
          if (!anomaly_active(j, t)) continue;
          const auto [x, y] = anomaly_position(j, t);
          p.t_us.push_back(t);
          p.x.push_back(x);
          p.y.push_back(y);
        }
        tr.anomalies.push_back(std::move(p));
      }
    }
    if (spec_.kind == SceneKind::balloon_pop) tr.pop_time_us = spec_.pop_time_us;
    return tr;
  }

private:
  static double soft_inside(double signed_dist, double edge)
  {
    return 0.5 * (1.0 - std::tanh(signed_dist / edge));
  }

  // --- balloon ---------------------------------------------------------------------------

  void prepare_balloon()
  {
    // Seed only perturbs the print phase so distinct seeds give distinct textures.
    std::mt19937_64 rng(spec_.seed);
    phase_x_ = static_cast<double>(rng() >> 11) * 0x1.0p-53 * spec_.checker_period_px;
    phase_y_ = static_cast<double>(rng() >> 11) * 0x1.0p-53 * spec_.checker_period_px;
    radius_ = spec_.balloon_radius_frac * std::min(geom_.width, geom_.height);
  }

  double balloon_scale(double t_us) const
  {
    if (t_us < spec_.pop_time_us) return 1.0;
    return 1.0 + spec_.burst_expansion * (1.0 - std::exp(-(t_us - spec_.pop_time_us) / spec_.pop_tau_us));
  }

  void render_balloon(double t_us, std::span<double> out) const
  {
    const double t = t_us * 1e-6;
    const double sway = spec_.sway_amplitude_px * std::sin(2 * std::numbers::pi * spec_.sway_hz * t);
    const double scale = balloon_scale(t_us);
    const double r_edge = radius_ * scale;
    const double w = 2 * std::numbers::pi / spec_.checker_period_px;
    for (std::uint32_t y = 0; y < geom_.height; ++y) {
      for (std::uint32_t x = 0; x < geom_.width; ++x) {
        const double u = x - cx_ - sway;
        const double v = y - cy_;
        const double r = std::hypot(u, v);
        // texture is carried outward with the membrane after the pop
        const double tu = u / scale + phase_x_;
        const double tv = v / scale + phase_y_;
        const double checker = 0.5 + 0.5 * std::tanh(3.0 * std::sin(w * tu) * std::sin(w * tv));
        const double inside = soft_inside(r - r_edge, 1.0);
        const double membrane = 1.0 + (spec_.checker_contrast - 1.0) * checker;
        out[static_cast<std::size_t>(y) * geom_.width + x] =
          spec_.level * (0.5 + inside * (membrane - 0.5));
      }
    }
  }

  // --- meltpool --------------------------------------------------------------------------

  void prepare_meltpool()
  {
    const std::size_t n = geom_.pixel_count();
    base_log_.resize(n);
    const double s2 = 2 * spec_.pool_sigma_px * spec_.pool_sigma_px;
    for (std::uint32_t y = 0; y < geom_.height; ++y) {
      for (std::uint32_t x = 0; x < geom_.width; ++x) {
        const double r2 = (x - cx_) * (x - cx_) + (y - cy_) * (y - cy_);
        base_log_[static_cast<std::size_t>(y) * geom_.width + x] =
          std::log(spec_.level * (1.0 + (spec_.pool_peak_factor - 1.0) * std::exp(-r2 / s2)));
      }
    }
    base_.resize(n);
    for (std::size_t i = 0; i < n; ++i) base_[i] = std::exp(base_log_[i]);
    // Keyhole influence box is fixed over time so box membership never jumps.
    kh_reach_ = spec_.keyhole_radius_px * std::sqrt(spec_.ar_max) + 10 * spec_.keyhole_edge_px;
  }

  void render_meltpool(double t_us, std::span<double> out) const
  {
    std::copy(base_.begin(), base_.end(), out.begin());
    const double t = t_us * 1e-6;
    const double shimmer = std::sin(2 * std::numbers::pi * spec_.shimmer_hz * t);

    // per-pixel log offset accumulated over the keyhole and active anomalies
    const double ar = aspect_ratio_at(t_us);
    const double a = spec_.keyhole_radius_px * std::sqrt(ar);
    const double b = spec_.keyhole_radius_px / std::sqrt(ar);
    const double c = std::cos(spec_.keyhole_orientation_rad);
    const double s = std::sin(spec_.keyhole_orientation_rad);
    const double kh_offset = -spec_.keyhole_depth + spec_.shimmer_amplitude * shimmer;

    struct Blob
    {
      double x, y, radius, offset;
    };
    std::vector<Blob> blobs;
    for (std::size_t j = 0; j < spec_.anomalies.size(); ++j) {
      if (!anomaly_active(j, t_us)) continue;
      const auto & an = spec_.anomalies[j];
      const auto [bx, by] = anomaly_position(j, t_us);
      blobs.push_back({bx, by, an.radius_px, an.contrast_log + an.shimmer_amplitude * shimmer});
    }

    auto clamp_range = [](double lo, double hi, std::uint32_t n) {
      const long l = std::max(0L, static_cast<long>(std::floor(lo)));
      const long h = std::min(static_cast<long>(n) - 1, static_cast<long>(std::ceil(hi)));
      return std::pair<long, long>{l, h};
    };

    const auto [kx0, kx1] = clamp_range(cx_ - kh_reach_, cx_ + kh_reach_, geom_.width);
    const auto [ky0, ky1] = clamp_range(cy_ - kh_reach_, cy_ + kh_reach_, geom_.height);
    for (long y = ky0; y <= ky1; ++y) {
      for (long x = kx0; x <= kx1; ++x) {
        const double dx = x - cx_;
        const double dy = y - cy_;
        const double u = c * dx + s * dy;
        const double v = -s * dx + c * dy;
        const double rho = std::sqrt((u / a) * (u / a) + (v / b) * (v / b));
        const double m = soft_inside((rho - 1.0) * spec_.keyhole_radius_px, spec_.keyhole_edge_px);
        const std::size_t i = static_cast<std::size_t>(y) * geom_.width + static_cast<std::size_t>(x);
        out[i] = std::exp(base_log_[i] + m * kh_offset);
      }
    }
    for (const Blob & bl : blobs) {
      const double reach = bl.radius + 8.0;
      const auto [bx0, bx1] = clamp_range(bl.x - reach, bl.x + reach, geom_.width);
      const auto [by0, by1] = clamp_range(bl.y - reach, bl.y + reach, geom_.height);
      for (long y = by0; y <= by1; ++y) {
        for (long x = bx0; x <= bx1; ++x) {
          const double d = std::hypot(x - bl.x, y - bl.y);
          const double g = soft_inside(d - bl.radius, 1.0);
          const std::size_t i = static_cast<std::size_t>(y) * geom_.width + static_cast<std::size_t>(x);
          out[i] *= std::exp(g * bl.offset);
        }
      }
    }
  }

  SceneSpec spec_;
  SensorGeometry geom_;
  std::uint64_t duration_us_;
  double fps_;
  std::size_t frame_count_{0};
  double period_us_{0};
  double cx_{0}, cy_{0};
  // balloon
  double phase_x_{0}, phase_y_{0}, radius_{0};
  // meltpool
  std::vector<double> base_log_, base_;
  double kh_reach_{0};
};

static_assert(VideoSource<SceneSource>);
static_assert(VideoSource<IntensityVideo>);

struct RenderedScene
{
  IntensityVideo video;
  SceneTruth truth;
};

/// Materialized rendering of a scene plus its ground-truth metadata.
inline RenderedScene render_scene(
  const SceneSpec & spec, SensorGeometry geometry, std::uint64_t duration_us, double fps)
{
  SceneSource src(spec, geometry, duration_us, fps);
  return {materialize(src), src.truth()};
}

}  // namespace evmelt

#endif  // EVMELT_SCENES_HPP
