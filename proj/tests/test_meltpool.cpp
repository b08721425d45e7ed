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

#include <iostream>
#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "evmelt/framing.hpp"
#include "evmelt/meltpool.hpp"
#include "evmelt/scenes.hpp"
#include "evmelt/sensor_sim.hpp"

namespace evmelt
{
using namespace evmelt::meltpool;

namespace
{
Frame make_frame(SensorGeometry g, const std::function<double(double, double)> & f, double t = 0)
{
  Frame fr{g, static_cast<timestamp_us>(t), 2, std::vector<double>(g.pixel_count(), 0.0), "test"};
  for (std::uint32_t y = 0; y < g.height; ++y) {
    for (std::uint32_t x = 0; x < g.width; ++x) fr.at(x, y) = f(x, y);
  }
  return fr;
}

double ellipse(double x, double y, double cx, double cy, double a, double b, double th)
{
  const double dx = x - cx, dy = y - cy;
  const double u = dx * std::cos(th) + dy * std::sin(th);
  const double v = -dx * std::sin(th) + dy * std::cos(th);
  return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0 ? 1.0 : 0.0;
}

// Pool disk of value 1 plus an optional dense blob of value `level`.
Frame pool_with_blob(double t, double bx, double by, double level = 10, double br = 2.5)
{
  return make_frame(
    {120, 100},
    [&](double x, double y) {
      if (std::hypot(x - bx, y - by) <= br) return level;
      return std::hypot(x - 60, y - 50) <= 20 ? 1.0 : 0.0;
    },
    t);
}

double wrap_pi(double a)
{
  while (a > std::numbers::pi / 2) a -= std::numbers::pi;
  while (a <= -std::numbers::pi / 2) a += std::numbers::pi;
  return a;
}
}  // namespace

TEST(segment, zero_frame_and_bad_threshold)
{
  const auto z = make_frame({10, 10}, [](double, double) { return 0.0; });
  EXPECT_TRUE(segment(z, 1.0).empty());
  EXPECT_THROW(segment(z, 0.0), std::invalid_argument);
}

TEST(segment, rectangle_aspect_ratio)
{
  for (auto [a, b] : {std::pair{20, 5}, std::pair{9, 3}, std::pair{4, 16}, std::pair{7, 7}}) {
    const auto f = make_frame({40, 40}, [&](double x, double y) {
      return (x >= 5 && x < 5 + a && y >= 8 && y < 8 + b) ? 2.0 : 0.0;
    });
    const auto comps = segment(f, 1.0);
    ASSERT_EQ(comps.size(), 1u);
    EXPECT_EQ(comps[0].area(), static_cast<std::size_t>(a * b));
    const double expect = static_cast<double>(std::max(a, b)) / std::min(a, b);
    EXPECT_NEAR(shape_metrics(comps[0].moments).aspect_ratio, expect, 0.05 * expect);
  }
}

TEST(segment, larger_component_first_and_diagonal_connectivity)
{
  const auto f = make_frame({20, 20}, [](double x, double y) {
    if (x < 2 && y < 2) return 1.0;                  // 4 px
    if (x >= 10 && x < 14 && y >= 10 && y < 13) return -1.0;  // 12 px, negative
    if (x == y && x >= 16) return 1.0;                // diagonal line, 4 px
    return 0.0;
  });
  const auto comps = segment(f, 0.5);
  ASSERT_EQ(comps.size(), 3u);
  EXPECT_EQ(comps[0].area(), 12u);
  EXPECT_EQ(comps[1].area(), 4u);
  EXPECT_EQ(comps[1].pixels.front(), (PixelCoord{0, 0}));  // raster discovery order on ties
  EXPECT_EQ(comps[2].area(), 4u);
  EXPECT_DOUBLE_EQ(comps[0].density, 1.0);
}

TEST(segment, stored_moments_recompute_exactly)
{
  const auto f = make_frame({50, 40}, [](double x, double y) {
    return std::sin(0.3 * x) * std::cos(0.2 * y) * 5.0;
  });
  for (const auto & c : segment(f, 1.5)) {
    EXPECT_EQ(compute_moments(c.pixels, f), c.moments);
    EXPECT_TRUE(std::is_sorted(c.pixels.begin(), c.pixels.end(), [](auto & a, auto & b) {
      return std::tie(a.y, a.x) < std::tie(b.y, b.x);
    }));
  }
}

TEST(shape, circle_is_round)
{
  for (double r : {3.0, 6.5, 15.0}) {
    const auto f = make_frame({40, 40}, [&](double x, double y) {
      return std::hypot(x - 19.5, y - 19.5) <= r ? 1.0 : 0.0;
    });
    const auto comps = segment(f, 0.5);
    ASSERT_EQ(comps.size(), 1u);
    EXPECT_NEAR(shape_metrics(comps[0].moments).aspect_ratio, 1.0, 0.1) << r;
  }
}

TEST(shape, rotation_by_ninety_degrees)
{
  const SensorGeometry g{64, 64};
  for (double th : {0.0, 0.4, 1.0, -0.7}) {
    const auto f = make_frame(g, [&](double x, double y) { return ellipse(x, y, 31.5, 31.5, 14, 6, th); });
    // (x, y) -> (H - 1 - y, x) is a 90 degree turn in image coordinates
    const auto r = make_frame(g, [&](double x, double y) {
      return f.at(static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(g.width - 1 - x));
    });
    const auto sf = shape_metrics(segment(f, 0.5).at(0).moments);
    const auto sr = shape_metrics(segment(r, 0.5).at(0).moments);
    EXPECT_NEAR(sf.aspect_ratio, sr.aspect_ratio, 0.05);
    EXPECT_NEAR(wrap_pi(sr.orientation - sf.orientation - std::numbers::pi / 2), 0.0, 0.05) << th;
    EXPECT_NEAR(wrap_pi(sf.orientation - th), 0.0, 0.05) << th;
    EXPECT_GT(sf.orientation, -std::numbers::pi / 2);
    EXPECT_LE(sf.orientation, std::numbers::pi / 2);
  }
}

TEST(threshold, default_rule)
{
  EXPECT_EQ(default_activity_threshold(make_frame({4, 4}, [](double, double) { return 0.0; })), 1.0);
  EXPECT_EQ(default_activity_threshold(make_frame({4, 4}, [](double, double) { return -2.0; })), 1.0);
  const auto f = make_frame({5, 1}, [](double x, double) { return x; });  // 1, 2, 3, 4
  EXPECT_EQ(default_activity_threshold(f), 9.0);
}

TEST(pool_series, gap_markers_and_errors)
{
  const std::vector<Frame> zeros(3, make_frame({8, 8}, [](double, double) { return 0.0; }));
  const auto s = pool_series(zeros, PoolParams{1.0});
  ASSERT_EQ(s.size(), 3u);
  for (const auto & p : s) EXPECT_FALSE(p.geometry);
  EXPECT_EQ(pool_series_csv(s), "t_us,area,aspect_ratio,orientation\n1.0,0,,\n1.0,0,,\n1.0,0,,\n");
  EXPECT_THROW(pool_series({}, PoolParams{}), std::invalid_argument);
}

TEST(pool_series, largest_component_is_the_pool)
{
  const auto f = make_frame({80, 60}, [](double x, double y) {
    if (ellipse(x, y, 40, 30, 15, 5, 0.0) > 0) return 4.0;
    return std::hypot(x - 5, y - 5) <= 2 ? 50.0 : 0.0;
  });
  const auto s = pool_series({f}, PoolParams{1.0});
  ASSERT_TRUE(s[0].geometry);
  EXPECT_NEAR(s[0].geometry->aspect_ratio, 3.0, 0.15);
  EXPECT_NEAR(s[0].geometry->pool.cx(), 40.0, 1e-9);
  EXPECT_EQ(s[0].t_us, f.center_us());
}

TEST(anomalies, none_without_dense_blobs)
{
  std::vector<Frame> frames;
  for (int k = 0; k < 10; ++k) frames.push_back(pool_with_blob(k * 10, -100, -100));
  AnomalyParams p;
  p.activity_threshold = 0.5;
  EXPECT_TRUE(detect_anomalies(frames, p).empty());
}

TEST(anomalies, dense_blob_inside_pool_is_tracked)
{
  std::vector<Frame> frames;
  for (int k = 0; k < 12; ++k) frames.push_back(pool_with_blob(k * 10, 50 + k, 50));
  AnomalyParams p;
  p.activity_threshold = 0.5;
  const auto tracks = detect_anomalies(frames, p);
  ASSERT_EQ(tracks.size(), 1u);
  ASSERT_EQ(tracks[0].points.size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_NEAR(tracks[0].points[i].cx, 50.0 + i, 1e-9);
    EXPECT_NEAR(tracks[0].points[i].cy, 50.0, 1e-9);
    if (i > 0) EXPECT_GT(tracks[0].points[i].t_us, tracks[0].points[i - 1].t_us);
  }
}

TEST(anomalies, two_parallel_blobs_keep_identity)
{
  std::vector<Frame> frames;
  for (int k = 0; k < 15; ++k) {
    const double x = 10 + 3 * k;
    frames.push_back(make_frame({120, 100}, [&](double px, double py) {
      if (std::hypot(px - 60, py - 50) <= 20) return 1.0;
      if (std::hypot(px - x, py - 10) <= 2.5) return 10.0;
      if (std::hypot(px - x, py - 90) <= 2.5) return 10.0;
      return 0.0;
    }, k * 10));
  }
  AnomalyParams p;
  p.activity_threshold = 0.5;
  p.max_link_dist = 10;
  const auto tracks = detect_anomalies(frames, p);
  ASSERT_EQ(tracks.size(), 2u);
  for (const auto & t : tracks) {
    ASSERT_EQ(t.points.size(), 15u);
    const double y0 = t.points.front().cy;
    for (const auto & pt : t.points) EXPECT_NEAR(pt.cy, y0, 1e-9);
  }
  EXPECT_EQ(tracks, detect_anomalies(frames, p));
}

TEST(anomalies, short_tracks_and_gaps)
{
  std::vector<Frame> frames;
  for (int k = 0; k < 10; ++k) {
    const bool visible = k != 4;  // one missed frame
    frames.push_back(pool_with_blob(k * 10, visible ? 30 + k : -100, 80));
  }
  AnomalyParams p;
  p.activity_threshold = 0.5;
  p.min_track_len = 5;
  // without bridging the blob splits into 4 + 5 points, and only the second survives
  auto tracks = detect_anomalies(frames, p);
  ASSERT_EQ(tracks.size(), 1u);
  EXPECT_EQ(tracks[0].points.size(), 5u);
  p.max_gap_frames = 1;
  tracks = detect_anomalies(frames, p);
  ASSERT_EQ(tracks.size(), 1u);
  EXPECT_EQ(tracks[0].points.size(), 9u);
  p.min_track_len = 10;
  EXPECT_TRUE(detect_anomalies(frames, p).empty());
}

TEST(anomalies, params_validation)
{
  AnomalyParams p;
  p.density_factor = 0.5;
  EXPECT_THROW(p.check(), std::invalid_argument);
  p = AnomalyParams{};
  p.max_link_dist = 0;
  EXPECT_THROW(p.check(), std::invalid_argument);
  p = AnomalyParams{};
  p.min_track_len = 0;
  EXPECT_THROW(p.check(), std::invalid_argument);
}

TEST(csv, tracks_format)
{
  std::vector<AnomalyTrack> t{{0, {{5.0, 1.5, 2.25, 10.0}}}};
  EXPECT_EQ(tracks_csv(t), "track_id,t_us,cx,cy,density\n0,5.0,1.5000,2.2500,10\n");
}

TEST(overlay, outlines_are_white)
{
  const auto f = make_frame({10, 10}, [](double x, double y) {
    if (x == 4 && y == 4) return 0.6;
    return (x >= 2 && x < 7 && y >= 2 && y < 7) ? 1.0 : 0.0;
  });
  const auto img = outline_overlay(f, segment(f, 0.5));
  EXPECT_EQ(img.at(2, 2), 255);
  EXPECT_EQ(img.at(6, 4), 255);
  EXPECT_EQ(img.at(4, 4), 204);  // interior keeps its gray level
  EXPECT_EQ(img.at(0, 0), 128);
}

TEST(scene, keyhole_width_orders_pool_area)
{
  double prev = 0;
  for (double r : {5.0, 7.0, 9.0, 11.0}) {
    SceneSpec sp;
    sp.kind = SceneKind::meltpool;
    sp.level = 1.0;
    sp.keyhole_radius_px = r;
    sp.ar_max = 1.0;  // hold the shape fixed
    const auto s = simulate(SceneSource(sp, {96, 72}, 100'000, 1000), SensorModel{});
    const auto frames = frame_sequence(s, 5000, ExposureCode::bandpass(10'000, 200));
    const auto series = pool_series(frames, PoolParams{3.0});
    double area = 0;
    std::size_t n = 0;
    for (const auto & p : series) {
      if (!p.geometry) continue;
      area += static_cast<double>(p.geometry->pool.area());
      ++n;
    }
    ASSERT_GT(n, 10u);
    area /= static_cast<double>(n);
    EXPECT_GT(area, prev) << r;
    prev = area;
  }
}

TEST(scene, two_opposite_anomalies_give_two_tracks)
{
  SceneSpec sp;
  sp.kind = SceneKind::meltpool;
  sp.level = 1.0;
  AnomalySpec a;
  a.t_on_us = 50'000;
  a.t_off_us = 350'000;
  sp.anomalies = {a, a};
  sp.anomalies[1].phase_rad = std::numbers::pi;
  SceneSource src(sp, kDavis346, 400'000, 1000);
  const auto s = simulate(src, SensorModel{});
  const auto frames = frame_sequence(s, 5000, ExposureCode::bandpass(10'000, 200));
  AnomalyParams p;
  p.activity_threshold = 3.0;
  const auto tracks = detect_anomalies(frames, p);
  ASSERT_EQ(tracks.size(), 2u);
  for (const auto & t : tracks) {
    // each track stays on one anomaly's path for its whole life
    const auto [x0, y0] = src.anomaly_position(0, t.points.front().t_us);
    const std::size_t j = std::hypot(t.points.front().cx - x0, t.points.front().cy - y0) < 5 ? 0 : 1;
    for (const auto & pt : t.points) {
      const auto [x, y] = src.anomaly_position(j, pt.t_us);
      EXPECT_LT(std::hypot(pt.cx - x, pt.cy - y), 3.0);
    }
  }
}

}  // namespace evmelt
