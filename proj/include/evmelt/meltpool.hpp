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

#ifndef EVMELT_MELTPOOL_HPP
#define EVMELT_MELTPOOL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "evmelt/framing.hpp"
#include "evmelt/io.hpp"

namespace evmelt::meltpool
{
struct PixelCoord
{
  std::uint32_t x{0};
  std::uint32_t y{0};
  friend bool operator==(const PixelCoord &, const PixelCoord &) = default;
};

struct Moments
{
  double total_weight{0};
  double cx{0};
  double cy{0};
  double mu20{0};  // weighted central moments, normalized by total weight
  double mu02{0};
  double mu11{0};
  friend bool operator==(const Moments &, const Moments &) = default;
};

/// One 8-connected group of active pixels.
struct BlobComponent
{
  std::vector<PixelCoord> pixels;  // raster order
  Moments moments;
  double density{0};  // mean |value| over the pixels

  std::size_t area() const { return pixels.size(); }
  double cx() const { return moments.cx; }
  double cy() const { return moments.cy; }
};

/// |value|-weighted centroid and central second moments over a pixel set.
inline Moments compute_moments(const std::vector<PixelCoord> & pixels, const Frame & frame)
{
  Moments m;
  double sx = 0, sy = 0;
  for (const auto & p : pixels) {
    const double w = std::abs(frame.at(p.x, p.y));
    m.total_weight += w;
    sx += w * p.x;
    sy += w * p.y;
  }
  if (m.total_weight <= 0) return m;
  m.cx = sx / m.total_weight;
  m.cy = sy / m.total_weight;
  for (const auto & p : pixels) {
    const double w = std::abs(frame.at(p.x, p.y));
    const double dx = p.x - m.cx;
    const double dy = p.y - m.cy;
    m.mu20 += w * dx * dx;
    m.mu02 += w * dy * dy;
    m.mu11 += w * dx * dy;
  }
  m.mu20 /= m.total_weight;
  m.mu02 /= m.total_weight;
  m.mu11 /= m.total_weight;
  return m;
}

struct ShapeMetrics
{
  double aspect_ratio{1};
  double orientation{0};  // major-axis angle from +x toward +y (image rows), (-pi/2, pi/2]
};

/// Aspect ratio sqrt(lmax/lmin) of the moment matrix. Each pixel is treated as a
/// unit square, which adds its own 1/12 variance on both axes; this keeps
/// one-pixel-wide shapes finite and makes an a x b rectangle come out at a/b.
inline ShapeMetrics shape_metrics(const Moments & m)
{
  constexpr double kPixelVariance = 1.0 / 12.0;
  const double a = m.mu20 + kPixelVariance;
  const double c = m.mu02 + kPixelVariance;
  const double b = m.mu11;
  const double mean = 0.5 * (a + c);
  const double disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
  const double lmax = mean + disc;
  const double lmin = std::max(mean - disc, std::numeric_limits<double>::min());
  ShapeMetrics s;
  s.aspect_ratio = std::max(1.0, std::sqrt(lmax / lmin));
  s.orientation = 0.5 * std::atan2(2 * b, a - c);
  if (s.orientation <= -std::numbers::pi / 2) s.orientation += std::numbers::pi;
  return s;
}

/// 3 x median |value| of the nonzero pixels; 1 when the frame is empty or all
/// nonzero magnitudes are equal.
inline double default_activity_threshold(const Frame & frame)
{
  std::vector<double> mags;
  for (double v : frame.values) {
    if (v != 0) mags.push_back(std::abs(v));
  }
  if (mags.empty()) return 1.0;
  const auto [lo, hi] = std::minmax_element(mags.begin(), mags.end());
  if (*lo == *hi) return 1.0;
  std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
  return 3.0 * mags[mags.size() / 2];
}

namespace detail
{
// Label 8-connected groups of `mask` pixels, discovered in raster order.
inline std::vector<std::vector<PixelCoord>> label_components(
  const std::vector<std::uint8_t> & mask, std::uint32_t width, std::uint32_t height)
{
  std::vector<std::vector<PixelCoord>> out;
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<PixelCoord> stack;
  for (std::uint32_t y = 0; y < height; ++y) {
    for (std::uint32_t x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      if (!mask[i] || seen[i]) continue;
      std::vector<PixelCoord> comp;
      seen[i] = 1;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const PixelCoord p = stack.back();
        stack.pop_back();
        comp.push_back(p);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const long nx = static_cast<long>(p.x) + dx;
            const long ny = static_cast<long>(p.y) + dy;
            if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
            const std::size_t j = static_cast<std::size_t>(ny) * width + static_cast<std::size_t>(nx);
            if (mask[j] && !seen[j]) {
              seen[j] = 1;
              stack.push_back({static_cast<std::uint32_t>(nx), static_cast<std::uint32_t>(ny)});
            }
          }
        }
      }
      std::sort(comp.begin(), comp.end(), [](const PixelCoord & a, const PixelCoord & b) {
        return std::tie(a.y, a.x) < std::tie(b.y, b.x);
      });
      out.push_back(std::move(comp));
    }
  }
  return out;
}

inline std::vector<BlobComponent> build_components(
  std::vector<std::vector<PixelCoord>> groups, const Frame & frame)
{
  std::vector<BlobComponent> comps;
  comps.reserve(groups.size());
  for (auto & g : groups) {
    BlobComponent c;
    c.pixels = std::move(g);
    c.moments = compute_moments(c.pixels, frame);
    c.density = c.moments.total_weight / static_cast<double>(c.pixels.size());
    comps.push_back(std::move(c));
  }
  // larger first; equal areas keep raster discovery order
  std::stable_sort(comps.begin(), comps.end(), [](const BlobComponent & a, const BlobComponent & b) {
    return a.area() > b.area();
  });
  return comps;
}
}  // namespace detail

/// Binarize |value| >= threshold and return 8-connected components, largest first.
inline std::vector<BlobComponent> segment(const Frame & frame, double activity_threshold)
{
  if (!(activity_threshold > 0)) throw std::invalid_argument("segment: threshold must be > 0");
  std::vector<std::uint8_t> mask(frame.values.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = std::abs(frame.values[i]) >= activity_threshold;
  }
  return detail::build_components(
    detail::label_components(mask, frame.geometry.width, frame.geometry.height), frame);
}

struct PoolGeometry
{
  double t_us{0};  // frame center
  BlobComponent pool;
  double aspect_ratio{1};
  double orientation{0};
};

struct PoolSample
{
  double t_us{0};
  std::optional<PoolGeometry> geometry;  // nullopt marks a frame with no active pixels
};

struct PoolParams
{
  std::optional<double> activity_threshold;  // unset: default_activity_threshold per frame
};

inline double threshold_for(const Frame & f, const std::optional<double> & fixed)
{
  return fixed ? *fixed : default_activity_threshold(f);
}

inline std::vector<PoolSample> pool_series(const std::vector<Frame> & frames, const PoolParams & params)
{
  if (frames.empty()) throw std::invalid_argument("pool_series: no frames");
  std::vector<PoolSample> out;
  out.reserve(frames.size());
  for (const Frame & f : frames) {
    PoolSample s{f.center_us(), std::nullopt};
    auto comps = segment(f, threshold_for(f, params.activity_threshold));
    if (!comps.empty()) {
      const ShapeMetrics sm = shape_metrics(comps.front().moments);
      s.geometry = PoolGeometry{s.t_us, std::move(comps.front()), sm.aspect_ratio, sm.orientation};
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct AnomalyParams
{
  double density_factor{3.0};
  double max_link_dist{10.0};  // pixels
  std::size_t min_track_len{5};
  std::size_t max_gap_frames{0};  // consecutive frames a track may miss and still be extended
  std::optional<double> activity_threshold;

  void check() const
  {
    if (!(density_factor >= 1)) throw std::invalid_argument("anomaly: density_factor must be >= 1");
    if (!(max_link_dist > 0)) throw std::invalid_argument("anomaly: max_link_dist must be > 0");
    if (min_track_len < 1) throw std::invalid_argument("anomaly: min_track_len must be >= 1");
  }
};

struct TrackPoint
{
  double t_us{0};
  double cx{0};
  double cy{0};
  double density{0};
  friend bool operator==(const TrackPoint &, const TrackPoint &) = default;
};

struct AnomalyTrack
{
  std::size_t id{0};
  std::vector<TrackPoint> points;
  friend bool operator==(const AnomalyTrack &, const AnomalyTrack &) = default;
};

inline double median_abs(const std::vector<PixelCoord> & pixels, const Frame & f)
{
  std::vector<double> v;
  v.reserve(pixels.size());
  for (const auto & p : pixels) v.push_back(std::abs(f.at(p.x, p.y)));
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

/// Candidate anomalies in one frame: components outside the pool that are denser
/// than density_factor x the pool's median |value|, plus sub-blobs of the pool
/// that exceed that level.
inline std::vector<BlobComponent> anomaly_candidates(const Frame & f, const AnomalyParams & params)
{
  auto comps = segment(f, threshold_for(f, params.activity_threshold));
  std::vector<BlobComponent> out;
  if (comps.empty()) return out;
  const BlobComponent & pool = comps.front();
  const double level = params.density_factor * median_abs(pool.pixels, f);
  for (std::size_t i = 1; i < comps.size(); ++i) {
    if (comps[i].density > level) out.push_back(comps[i]);
  }
  std::vector<std::uint8_t> mask(f.values.size(), 0);
  bool any = false;
  for (const auto & p : pool.pixels) {
    if (std::abs(f.at(p.x, p.y)) > level) {
      mask[static_cast<std::size_t>(p.y) * f.geometry.width + p.x] = 1;
      any = true;
    }
  }
  if (any) {
    auto subs = detail::build_components(
      detail::label_components(mask, f.geometry.width, f.geometry.height), f);
    for (auto & s : subs) out.push_back(std::move(s));
  }
  return out;
}

/// Greedy nearest-neighbour linking of per-frame candidates into tracks.
/// Pairs are taken in order of (distance, candidate index, track id).
inline std::vector<AnomalyTrack> detect_anomalies(
  const std::vector<Frame> & frames, const AnomalyParams & params)
{
  params.check();
  struct Open
  {
    AnomalyTrack track;
    std::size_t last_frame;
  };
  std::vector<Open> tracks;
  std::size_t next_id = 0;

  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const Frame & f = frames[fi];
    const auto cands = anomaly_candidates(f, params);
    struct Pair
    {
      double d;
      std::size_t cand;
      std::size_t track;
    };
    std::vector<Pair> pairs;
    for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
      const Open & o = tracks[ti];
      if (o.last_frame + 1 + params.max_gap_frames < fi) continue;
      const TrackPoint & last = o.track.points.back();
      for (std::size_t ci = 0; ci < cands.size(); ++ci) {
        const double d = std::hypot(cands[ci].cx() - last.cx, cands[ci].cy() - last.cy);
        if (d <= params.max_link_dist) pairs.push_back({d, ci, ti});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [&](const Pair & a, const Pair & b) {
      return std::tie(a.d, a.cand, tracks[a.track].track.id) <
             std::tie(b.d, b.cand, tracks[b.track].track.id);
    });
    std::vector<std::uint8_t> cand_used(cands.size(), 0), track_used(tracks.size(), 0);
    for (const Pair & p : pairs) {
      if (cand_used[p.cand] || track_used[p.track]) continue;
      cand_used[p.cand] = track_used[p.track] = 1;
      const auto & c = cands[p.cand];
      tracks[p.track].track.points.push_back({f.center_us(), c.cx(), c.cy(), c.density});
      tracks[p.track].last_frame = fi;
    }
    for (std::size_t ci = 0; ci < cands.size(); ++ci) {
      if (cand_used[ci]) continue;
      const auto & c = cands[ci];
      tracks.push_back({AnomalyTrack{next_id++, {{f.center_us(), c.cx(), c.cy(), c.density}}}, fi});
    }
  }

  std::vector<AnomalyTrack> out;
  for (auto & o : tracks) {
    if (o.track.points.size() >= params.min_track_len) out.push_back(std::move(o.track));
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = i;
  return out;
}

inline std::string pool_series_csv(const std::vector<PoolSample> & series)
{
  std::string out = "t_us,area,aspect_ratio,orientation\n";
  char buf[128];
  for (const auto & s : series) {
    if (s.geometry) {
      std::snprintf(
        buf, sizeof buf, "%.1f,%zu,%.9g,%.9g\n", s.t_us, s.geometry->pool.area(),
        s.geometry->aspect_ratio, s.geometry->orientation);
    } else {
      std::snprintf(buf, sizeof buf, "%.1f,0,,\n", s.t_us);  // gap
    }
    out += buf;
  }
  return out;
}

inline std::string tracks_csv(const std::vector<AnomalyTrack> & tracks)
{
  std::string out = "track_id,t_us,cx,cy,density\n";
  char buf[128];
  for (const auto & t : tracks) {
    for (const auto & p : t.points) {
      std::snprintf(buf, sizeof buf, "%zu,%.1f,%.4f,%.4f,%.6g\n", t.id, p.t_us, p.cx, p.cy, p.density);
      out += buf;
    }
  }
  return out;
}

/// Debug overlay: the frame as gray levels with component outlines drawn white.
inline io::Image8 outline_overlay(const Frame & frame, const std::vector<BlobComponent> & comps)
{
  io::Image8 img = to_image(frame, ImageMapping::symmetric_max());
  const std::uint32_t w = frame.geometry.width;
  const std::uint32_t h = frame.geometry.height;
  std::vector<std::uint8_t> in(frame.values.size(), 0);
  for (const auto & c : comps) {
    for (const auto & p : c.pixels) in[static_cast<std::size_t>(p.y) * w + p.x] = 1;
  }
  for (const auto & c : comps) {
    for (const auto & p : c.pixels) {
      bool edge = p.x == 0 || p.y == 0 || p.x + 1 == w || p.y + 1 == h;
      if (!edge) {
        edge = !in[static_cast<std::size_t>(p.y) * w + p.x - 1] ||
               !in[static_cast<std::size_t>(p.y) * w + p.x + 1] ||
               !in[static_cast<std::size_t>(p.y - 1) * w + p.x] ||
               !in[static_cast<std::size_t>(p.y + 1) * w + p.x];
      }
      if (edge) img.pixels[static_cast<std::size_t>(p.y) * w + p.x] = 255;
    }
  }
  return img;
}

}  // namespace evmelt::meltpool

#endif  // EVMELT_MELTPOOL_HPP
