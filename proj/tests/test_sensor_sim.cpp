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
#include <map>

#include "evmelt/scenes.hpp"
#include "evmelt/sensor_sim.hpp"

namespace evmelt
{
namespace
{
IntensityVideo uniform_video(SensorGeometry g, double period_us, std::vector<double> levels)
{
  IntensityVideo v;
  v.geom = g;
  v.frame_period_us = period_us;
  for (double l : levels) v.frames.emplace_back(g.pixel_count(), l);
  return v;
}

SensorModel exact_model()
{
  SensorModel m;
  m.intensity_floor = 1e-12;
  return m;
}

std::map<std::pair<int, int>, std::vector<Event>> by_pixel(const EventStream & s)
{
  std::map<std::pair<int, int>, std::vector<Event>> out;
  for (const auto & e : s.events) out[{e.x, e.y}].push_back(e);
  return out;
}
}  // namespace

TEST(simulate, constant_video_is_silent)
{
  for (double level : {0.0, 1e-3, 1.0, 1e6}) {
    const auto s = simulate(uniform_video({8, 4}, 1000, {level, level, level}), SensorModel{});
    EXPECT_TRUE(s.empty()) << level;
    EXPECT_EQ(s.geometry, (SensorGeometry{8, 4}));
  }
}

TEST(simulate, step_of_two_thresholds_gives_two_positive_events)
{
  const double c = 0.15;
  const auto s = simulate(uniform_video({1, 1}, 1000, {1.0, std::exp(2 * c)}), exact_model());
  ASSERT_EQ(s.size(), 2u);
  for (const auto & e : s.events) EXPECT_EQ(e.p, 1);
  // crossings at 1/2 and 2/2 of the interval
  EXPECT_EQ(s.events[0].t, 500u);
  EXPECT_EQ(s.events[1].t, 1000u);
}

TEST(simulate, downward_step_gives_negative_events)
{
  const auto s = simulate(uniform_video({2, 2}, 1000, {1.0, std::exp(-0.45)}), exact_model());
  EXPECT_EQ(s.size(), 4u * 3u);
  for (const auto & e : s.events) EXPECT_EQ(e.p, -1);
}

TEST(simulate, default_floor_uses_peak)
{
  // with the default floor of 1e-6 x peak, a 1 -> e^{2C} step loses its last
  // crossing by a hair; an explicit floor keeps it
  const auto v = uniform_video({1, 1}, 1000, {1.0, std::exp(0.3)});
  EXPECT_EQ(simulate(v, SensorModel{}).size(), 1u);
  EXPECT_EQ(simulate(v, exact_model()).size(), 2u);
}

TEST(simulate, log_ramp_event_count_and_spacing)
{
  const double k = 10.0;  // log units per second
  const double c = 0.15;
  std::vector<double> levels;
  for (int i = 0; i <= 100; ++i) levels.push_back(std::exp(k * i * 0.01));
  const auto s = simulate(uniform_video({1, 1}, 10'000, levels), exact_model());
  ASSERT_EQ(s.size(), static_cast<std::size_t>(std::floor(k * 1.0 / c)));
  for (std::size_t n = 0; n < s.size(); ++n) {
    const double expect_us = (n + 1) * c / k * 1e6;
    EXPECT_NEAR(static_cast<double>(s.events[n].t), expect_us, 1.0) << n;
    EXPECT_EQ(s.events[n].p, 1);
  }
}

TEST(simulate, polarity_follows_ramp_direction)
{
  for (double slope : {-4.0, 4.0}) {
    SceneSpec sp;
    sp.kind = SceneKind::ramp;
    sp.ramp_slope = slope;
    const auto s = simulate(SceneSource(sp, {6, 5}, 1'000'000, 100), SensorModel{});
    ASSERT_FALSE(s.empty());
    for (const auto & e : s.events) EXPECT_EQ(e.p, slope > 0 ? 1 : -1);
  }
}

TEST(simulate, output_order_is_time_then_row_then_column)
{
  SceneSpec sp;
  sp.kind = SceneKind::balloon_pop;
  sp.pop_time_us = 200'000;
  const auto s = simulate(SceneSource(sp, {24, 24}, 400'000, 500), SensorModel{});
  ASSERT_GT(s.size(), 100u);
  EXPECT_TRUE(validate(s).ok);
  for (std::size_t i = 1; i < s.size(); ++i) {
    const auto & a = s.events[i - 1];
    const auto & b = s.events[i];
    EXPECT_TRUE(std::tie(a.t, a.y, a.x) <= std::tie(b.t, b.y, b.x)) << i;
  }
}

TEST(simulate, refractory_is_respected)
{
  SceneSpec sp;
  sp.kind = SceneKind::flicker;
  sp.flicker_amplitude = 2.0;
  for (std::uint64_t refr : {0ull, 300ull, 2000ull}) {
    SensorModel m;
    m.refractory_us = refr;
    const auto s = simulate(SceneSource(sp, {4, 3}, 100'000, 5000), m);
    ASSERT_FALSE(s.empty());
    for (const auto & [px, ev] : by_pixel(s)) {
      for (std::size_t i = 1; i < ev.size(); ++i) EXPECT_GE(ev[i].t - ev[i - 1].t, refr);
    }
  }
}

TEST(simulate, refractory_reduces_event_count)
{
  SceneSpec sp;
  sp.kind = SceneKind::flicker;
  sp.flicker_amplitude = 2.0;
  SceneSource src(sp, {4, 3}, 100'000, 5000);
  SensorModel m;
  const auto free_run = simulate(src, m).size();
  m.refractory_us = 2000;
  EXPECT_LT(simulate(src, m).size(), free_run);
}

TEST(simulate, zero_mismatch_ignores_seed)
{
  SceneSpec sp;
  sp.kind = SceneKind::balloon_pop;
  sp.pop_time_us = 100'000;
  SceneSource src(sp, {16, 16}, 300'000, 500);
  SensorModel a, b;
  a.rng_seed = 1;
  b.rng_seed = 99;
  EXPECT_EQ(simulate(src, a), simulate(src, b));
}

TEST(simulate, mismatch_is_deterministic_per_seed)
{
  SceneSpec sp;
  sp.kind = SceneKind::ramp;
  sp.ramp_slope = 5;
  SceneSource src(sp, {8, 8}, 1'000'000, 100);
  SensorModel m;
  m.mismatch_sigma = 0.2;
  m.rng_seed = 5;
  const auto s1 = simulate(src, m);
  EXPECT_EQ(s1, simulate(src, m));
  m.rng_seed = 6;
  EXPECT_NE(s1, simulate(src, m));
  // per-pixel counts now vary around the nominal 5 / 0.15 = 33
  std::set<std::size_t> counts;
  for (const auto & [px, ev] : by_pixel(s1)) counts.insert(ev.size());
  EXPECT_GT(counts.size(), 3u);
}

TEST(simulate, background_noise_rate_and_refractory)
{
  SensorModel m;
  m.background_rate_hz = 20;
  m.refractory_us = 100;
  const SensorGeometry g{20, 20};
  const auto s = simulate(uniform_video(g, 1e6, {1.0, 1.0, 1.0}), m);
  const double expected = 20.0 * g.pixel_count() * 2.0;
  EXPECT_NEAR(static_cast<double>(s.size()), expected, 0.1 * expected);
  EXPECT_TRUE(validate(s).ok);
  for (const auto & [px, ev] : by_pixel(s)) {
    for (std::size_t i = 1; i < ev.size(); ++i) EXPECT_GE(ev[i].t - ev[i - 1].t, 100u);
  }
  EXPECT_EQ(s, simulate(uniform_video(g, 1e6, {1.0, 1.0, 1.0}), m));
}

TEST(simulate, procedural_and_materialized_sources_agree)
{
  SceneSpec sp;
  sp.kind = SceneKind::meltpool;
  sp.level = 1.0;
  sp.pool_sigma_px = 8;
  sp.keyhole_radius_px = 4;
  AnomalySpec a;
  a.orbit_radius_px = 10;
  sp.anomalies.push_back(a);
  SceneSource src(sp, {40, 30}, 50'000, 1000);
  EXPECT_EQ(simulate(src, SensorModel{}), simulate(materialize(src), SensorModel{}));
}

TEST(simulate, rejects_invalid_inputs)
{
  SensorModel bad;
  bad.contrast_threshold = 0;
  EXPECT_THROW(bad.check(), std::invalid_argument);
  bad = SensorModel{};
  bad.mismatch_sigma = 1.0;
  EXPECT_THROW(bad.check(), std::invalid_argument);
  bad = SensorModel{};
  bad.intensity_floor = 0.0;
  EXPECT_THROW(bad.check(), std::invalid_argument);
  EXPECT_THROW(simulate(uniform_video({2, 2}, 1000, {1.0}), SensorModel{}), std::invalid_argument);
  EXPECT_THROW(simulate(uniform_video({2, 2}, 1000, {1.0, -1.0}), SensorModel{}), std::invalid_argument);
  EXPECT_THROW(uniform_video({2, 2}, 1000, {1.0, NAN}).check(), std::invalid_argument);
}

TEST(scenes, constant_scene_gives_empty_stream)
{
  SceneSpec sp;
  EXPECT_TRUE(simulate(SceneSource(sp, kDvs240, 100'000, 100), SensorModel{}).empty());
}

TEST(scenes, step_of_three_thresholds_fires_every_pixel_three_times)
{
  SceneSpec sp;
  sp.kind = SceneKind::step;
  sp.step_ratio = std::exp(3 * 0.15);
  const SensorGeometry g{12, 10};
  const auto s = simulate(SceneSource(sp, g, 100'000, 100), exact_model());
  ASSERT_EQ(s.size(), 3 * g.pixel_count());
  for (const auto & [px, ev] : by_pixel(s)) {
    EXPECT_EQ(ev.size(), 3u);
    for (const auto & e : ev) EXPECT_EQ(e.p, 1);
  }
}

TEST(scenes, meltpool_truth_echoes_generating_formula)
{
  SceneSpec sp;
  sp.kind = SceneKind::meltpool;
  SceneSource src(sp, kDavis346, 1'000'000, 100);
  const auto truth = src.truth();
  ASSERT_EQ(truth.aspect_ratio.size(), 101u);
  for (std::size_t k = 0; k < truth.aspect_ratio.size(); ++k) {
    const double t = truth.frame_times_us[k] * 1e-6;
    EXPECT_NEAR(truth.aspect_ratio[k], 1.75 + 0.75 * std::sin(2 * std::numbers::pi * 5 * t), 1e-12);
  }
}

TEST(scenes, anomaly_path_and_pop_time)
{
  SceneSpec sp;
  sp.kind = SceneKind::meltpool;
  AnomalySpec a;
  a.t_on_us = 100'000;
  a.t_off_us = 300'000;
  sp.anomalies.push_back(a);
  SceneSource src(sp, kDavis346, 500'000, 100);
  const auto truth = src.truth();
  ASSERT_EQ(truth.anomalies.size(), 1u);
  EXPECT_EQ(truth.anomalies[0].t_us.size(), 20u);
  EXPECT_DOUBLE_EQ(truth.anomalies[0].t_us.front(), 100'000);
  const auto [x, y] = src.anomaly_position(0, 0);
  EXPECT_DOUBLE_EQ(x, src.center_x() + 45);
  EXPECT_DOUBLE_EQ(y, src.center_y());

  SceneSpec bp;
  bp.kind = SceneKind::balloon_pop;
  EXPECT_EQ(SceneSource(bp, {16, 16}, 10'000'000, 10).truth().pop_time_us, 3e6);
}

TEST(scenes, rendering_is_deterministic_and_nonnegative)
{
  for (auto kind : {SceneKind::balloon_pop, SceneKind::meltpool, SceneKind::flicker}) {
    SceneSpec sp;
    sp.kind = kind;
    sp.seed = 3;
    sp.pop_time_us = 50'000;
    const auto a = render_scene(sp, {32, 24}, 100'000, 100);
    const auto b = render_scene(sp, {32, 24}, 100'000, 100);
    EXPECT_EQ(a.video.frames, b.video.frames);
    EXPECT_NO_THROW(a.video.check());
    EXPECT_EQ(a.video.frame_count(), 11u);
  }
}

TEST(scenes, spec_validation)
{
  SceneSpec sp;
  sp.level = 0;
  EXPECT_THROW(sp.check(), std::invalid_argument);
  sp = SceneSpec{};
  sp.kind = SceneKind::meltpool;
  sp.ar_min = 2;
  sp.ar_max = 1.5;
  EXPECT_THROW(sp.check(), std::invalid_argument);
  sp = SceneSpec{};
  EXPECT_THROW(SceneSource(sp, {4, 4}, 1000, 100), std::invalid_argument);  // < 2 frames
  sp.kind = SceneKind::balloon_pop;
  EXPECT_THROW(SceneSource(sp, {4, 4}, 1'000'000, 100), std::invalid_argument);  // pop after end
  EXPECT_EQ(parse_scene_kind("balloon_pop"), SceneKind::balloon_pop);
  EXPECT_THROW(parse_scene_kind("volcano"), std::invalid_argument);
}

TEST(video_dump, quantizes_against_scale)
{
  const auto v = uniform_video({2, 1}, 1000, {0.0, 5.0});
  const auto img = video_frame_image(v, 1, 10.0);
  EXPECT_EQ(img.pixels, (std::vector<std::uint16_t>{32768, 32768}));
  EXPECT_EQ(video_frame_image(v, 1, 1.0).pixels[0], 65535);
  EXPECT_NE(video_scale_sidecar(10.0, 1000).find("scale=10"), std::string::npos);
}

}  // namespace evmelt
