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

#ifndef EVMELT_CLI_HPP
#define EVMELT_CLI_HPP

#include <CLI11.hpp>
#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "evmelt/analytics.hpp"
#include "evmelt/codec.hpp"
#include "evmelt/event_model.hpp"
#include "evmelt/framing.hpp"
#include "evmelt/io.hpp"
#include "evmelt/meltpool.hpp"
#include "evmelt/scenes.hpp"
#include "evmelt/sensor_sim.hpp"

#ifndef EVMELT_VERSION
#define EVMELT_VERSION "0.0.0"
#endif

namespace evmelt::cli
{
enum class Exit : int { ok = 0, parse = 2, validation = 3, io = 4 };

/// Malformed config text, unknown keys, unparseable values, bad command line.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Flat view of a config: "section.key" -> raw value.
using KeyValues = std::map<std::string, std::string>;

/// Parse `[section]` / `key = value` text. Sections may themselves contain dots.
inline KeyValues parse_config_text(const std::string & text)
{
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error & e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  KeyValues kv;
  for (const auto & [section, child] : tree) {
    if (child.empty()) throw ConfigError("key '" + section + "' is outside any [section]");
    for (const auto & [key, value] : child) kv[section + "." + key] = value.data();
  }
  return kv;
}

/// Apply one `section.key=value` assignment.
inline void apply_override(KeyValues & kv, std::string_view assignment)
{
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not section.key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const auto dot = key.rfind('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == key.size()) {
    throw ConfigError("override key '" + key + "' is not section.key");
  }
  kv[key] = std::string(assignment.substr(eq + 1));
}

/// Typed, use-tracking access to a KeyValues map; unknown keys are an error.
class ConfigReader
{
public:
  explicit ConfigReader(const KeyValues & kv) : kv_(kv) {}

  bool has(const std::string & key) const { return kv_.count(key) != 0; }

  const std::string * raw(const std::string & key)
  {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  template <typename T>
  void read(const std::string & key, T & target)
  {
    if (const std::string * v = raw(key)) target = convert<T>(key, *v);
  }

  template <typename T>
  T get(const std::string & key, T fallback)
  {
    read(key, fallback);
    return fallback;
  }

  /// Names of sections that start with `prefix` followed only by digits.
  std::vector<std::string> numbered_sections(const std::string & prefix) const
  {
    std::set<std::pair<unsigned long, std::string>> found;
    for (const auto & [k, v] : kv_) {
      const auto dot = k.rfind('.');
      const std::string section = k.substr(0, dot);
      if (section.size() <= prefix.size() || section.compare(0, prefix.size(), prefix) != 0) continue;
      const std::string digits = section.substr(prefix.size());
      if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        continue;
      }
      found.insert({std::stoul(digits), section});
    }
    std::vector<std::string> out;
    for (const auto & f : found) out.push_back(f.second);
    return out;
  }

  void reject_unused() const
  {
    for (const auto & [k, v] : kv_) {
      if (!used_.count(k)) throw ConfigError("unknown config key '" + k + "'");
    }
  }

  template <typename T>
  static T convert(const std::string & key, const std::string & v)
  {
    auto fail = [&]() -> ConfigError {
      return ConfigError("bad value '" + v + "' for '" + key + "'");
    };
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
      if (v == "false" || v == "0" || v == "no" || v == "off") return false;
      throw fail();
    } else {
      T out{};
      const char * b = v.data();
      const char * e = v.data() + v.size();
      if constexpr (std::is_floating_point_v<T>) {
        if (!v.empty() && *b == '+') ++b;
      }
      const auto [p, ec] = std::from_chars(b, e, out);
      if (ec != std::errc() || p != e || b == e) throw fail();
      return out;
    }
  }

private:
  const KeyValues & kv_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------------------------
// Pipeline configuration

struct SceneConfig
{
  SceneSpec spec{};
  SensorGeometry geometry{kDavis346};
  std::uint64_t duration_us{1'000'000};
  double fps{1000.0};
  std::size_t dump_video_frames{0};
};

struct CodecConfig
{
  std::optional<std::filesystem::path> input;  // .evt1 or .csv; unset means simulate
  bool write_csv{false};
};

struct FramingConfig
{
  CodeKind code{CodeKind::bandpass};
  std::uint64_t window_us{10'000};
  std::uint64_t stride_us{5'000};
  std::uint32_t chips{16};
  std::uint64_t chip_seed{0};
  double f0_hz{200.0};
  double image_scale{0.0};  // 0 means scale each frame by its own max |value|
  std::vector<std::uint64_t> windows_us{1'000, 5'000, 20'000};
  std::uint64_t snapshot_us{500'000};  // offset from the first event

  ExposureCode make_code() const
  {
    switch (code) {
      case CodeKind::boxcar:
        return ExposureCode::boxcar(window_us);
      case CodeKind::flutter:
        return ExposureCode::flutter(window_us, chips, chip_seed);
      case CodeKind::bandpass:
        return ExposureCode::bandpass(window_us, f0_hz);
    }
    return ExposureCode::boxcar(window_us);
  }

  ImageMapping mapping() const
  {
    return image_scale > 0 ? ImageMapping::fixed_scale(image_scale) : ImageMapping::symmetric_max();
  }
};

struct AnalyticsConfig
{
  std::size_t bins{200};
  std::uint64_t rate_window_us{50'000};
  std::size_t smoothing{1};
  analytics::FootprintModel footprint{};
};

struct MeltpoolConfig
{
  std::optional<double> activity_threshold{3.0};  // unset: per-frame median rule
  meltpool::AnomalyParams anomaly{};
  std::optional<std::size_t> overlay_frame;  // unset: middle frame
};

struct PipelineConfig
{
  SceneConfig scene{};
  SensorModel sensor{};
  CodecConfig codec{};
  FramingConfig framing{};
  AnalyticsConfig analytics{};
  MeltpoolConfig meltpool{};
  std::filesystem::path out_dir{"out"};
  std::uint64_t seed{1};

  void check() const
  {
    scene.spec.check();
    if (!scene.geometry.valid()) throw std::invalid_argument("scene: invalid geometry");
    if (!(scene.fps > 0)) throw std::invalid_argument("scene: fps must be > 0");
    sensor.check();
    framing.make_code().check();
    if (framing.stride_us == 0) throw std::invalid_argument("framing: stride_us must be > 0");
    if (framing.windows_us.empty()) throw std::invalid_argument("framing: windows_us is empty");
    for (auto w : framing.windows_us) {
      if (w == 0) throw std::invalid_argument("framing: windows_us entries must be > 0");
    }
    if (analytics.bins == 0) throw std::invalid_argument("analytics: bins must be > 0");
    if (analytics.rate_window_us == 0) throw std::invalid_argument("analytics: rate_window_us > 0");
    if (analytics.smoothing == 0) throw std::invalid_argument("analytics: smoothing must be >= 1");
    analytics.footprint.check();
    if (meltpool.activity_threshold && !(*meltpool.activity_threshold > 0)) {
      throw std::invalid_argument("meltpool: activity_threshold must be > 0");
    }
    meltpool.anomaly.check();
  }
};

namespace detail
{
inline std::vector<std::uint64_t> parse_u64_list(const std::string & key, const std::string & v)
{
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    auto next = v.find(',', pos);
    if (next == std::string::npos) next = v.size();
    std::string item = v.substr(pos, next - pos);
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    out.push_back(ConfigReader::convert<std::uint64_t>(key, item));
    pos = next + 1;
  }
  return out;
}

inline std::optional<double> parse_threshold(ConfigReader & r, const std::string & key,
                                             std::optional<double> fallback)
{
  const std::string * v = r.raw(key);
  if (!v) return fallback;
  if (*v == "auto") return std::nullopt;
  return ConfigReader::convert<double>(key, *v);
}

inline void read_scene(ConfigReader & r, SceneConfig & c, std::uint64_t seed)
{
  SceneSpec & s = c.spec;
  if (const std::string * kind = r.raw("scene.kind")) {
    try {
      s.kind = parse_scene_kind(*kind);
    } catch (const std::invalid_argument & e) {
      throw ConfigError(e.what());
    }
  }
  s.seed = r.get("scene.seed", seed);
  r.read("scene.width", c.geometry.width);
  r.read("scene.height", c.geometry.height);
  r.read("scene.duration_us", c.duration_us);
  r.read("scene.fps", c.fps);
  r.read("scene.dump_video_frames", c.dump_video_frames);
  r.read("scene.level", s.level);
  r.read("scene.step_ratio", s.step_ratio);
  r.read("scene.step_time_us", s.step_time_us);
  r.read("scene.ramp_slope", s.ramp_slope);
  r.read("scene.flicker_amplitude", s.flicker_amplitude);
  r.read("scene.flicker_hz", s.flicker_hz);
  r.read("scene.pop_time_us", s.pop_time_us);
  r.read("scene.pop_tau_us", s.pop_tau_us);
  r.read("scene.balloon_radius_frac", s.balloon_radius_frac);
  r.read("scene.checker_period_px", s.checker_period_px);
  r.read("scene.checker_contrast", s.checker_contrast);
  r.read("scene.burst_expansion", s.burst_expansion);
  r.read("scene.sway_amplitude_px", s.sway_amplitude_px);
  r.read("scene.sway_hz", s.sway_hz);
  r.read("scene.pool_peak_factor", s.pool_peak_factor);
  r.read("scene.pool_sigma_px", s.pool_sigma_px);
  r.read("scene.keyhole_radius_px", s.keyhole_radius_px);
  r.read("scene.ar_min", s.ar_min);
  r.read("scene.ar_max", s.ar_max);
  r.read("scene.keyhole_hz", s.keyhole_hz);
  r.read("scene.keyhole_orientation_rad", s.keyhole_orientation_rad);
  r.read("scene.keyhole_depth", s.keyhole_depth);
  r.read("scene.keyhole_edge_px", s.keyhole_edge_px);
  r.read("scene.shimmer_amplitude", s.shimmer_amplitude);
  r.read("scene.shimmer_hz", s.shimmer_hz);
  for (const std::string & sec : r.numbered_sections("anomaly")) {
    AnomalySpec a;
    const bool enabled = r.get(sec + ".enabled", true);
    r.read(sec + ".orbit_radius_px", a.orbit_radius_px);
    r.read(sec + ".orbit_hz", a.orbit_hz);
    r.read(sec + ".phase_rad", a.phase_rad);
    r.read(sec + ".t_on_us", a.t_on_us);
    r.read(sec + ".t_off_us", a.t_off_us);
    r.read(sec + ".radius_px", a.radius_px);
    r.read(sec + ".contrast_log", a.contrast_log);
    r.read(sec + ".shimmer_amplitude", a.shimmer_amplitude);
    if (enabled) s.anomalies.push_back(a);
  }
}
}  // namespace detail

/// Build a typed config from the layered key-values. Throws ConfigError for
/// syntax problems; semantic validity is left to PipelineConfig::check().
inline PipelineConfig build_config(const KeyValues & kv)
{
  ConfigReader r(kv);
  PipelineConfig c;
  r.read("run.seed", c.seed);
  if (const std::string * out = r.raw("run.out")) c.out_dir = *out;

  detail::read_scene(r, c.scene, c.seed);

  SensorModel & m = c.sensor;
  m.rng_seed = r.get("sensor.seed", c.seed);
  r.read("sensor.contrast_threshold", m.contrast_threshold);
  r.read("sensor.refractory_us", m.refractory_us);
  r.read("sensor.mismatch_sigma", m.mismatch_sigma);
  r.read("sensor.background_rate_hz", m.background_rate_hz);
  if (r.has("sensor.intensity_floor")) m.intensity_floor = r.get("sensor.intensity_floor", 0.0);

  if (const std::string * in = r.raw("codec.input"); in && !in->empty()) c.codec.input = *in;
  r.read("codec.write_csv", c.codec.write_csv);

  FramingConfig & f = c.framing;
  if (const std::string * code = r.raw("framing.code")) {
    try {
      f.code = parse_code_kind(*code);
    } catch (const std::invalid_argument & e) {
      throw ConfigError(e.what());
    }
  }
  f.chip_seed = r.get("framing.chip_seed", c.seed);
  r.read("framing.window_us", f.window_us);
  r.read("framing.stride_us", f.stride_us);
  r.read("framing.chips", f.chips);
  r.read("framing.f0_hz", f.f0_hz);
  r.read("framing.image_scale", f.image_scale);
  r.read("framing.snapshot_us", f.snapshot_us);
  if (const std::string * w = r.raw("framing.windows_us")) {
    f.windows_us = detail::parse_u64_list("framing.windows_us", *w);
  }

  AnalyticsConfig & a = c.analytics;
  r.read("analytics.bins", a.bins);
  r.read("analytics.rate_window_us", a.rate_window_us);
  r.read("analytics.smoothing", a.smoothing);
  analytics::FootprintModel & fm = a.footprint;
  // the conventional baseline defaults to the simulated scene's own format
  fm.width = c.scene.geometry.width;
  fm.height = c.scene.geometry.height;
  fm.fps = c.scene.fps;
  fm.duration_us = c.scene.duration_us;
  r.read("footprint.bytes_per_event", fm.bytes_per_event);
  r.read("footprint.width", fm.width);
  r.read("footprint.height", fm.height);
  r.read("footprint.fps", fm.fps);
  r.read("footprint.bytes_per_pixel", fm.bytes_per_pixel);
  r.read("footprint.duration_us", fm.duration_us);
  r.read("footprint.event_range_db", fm.event_range_db);

  MeltpoolConfig & mp = c.meltpool;
  mp.activity_threshold = detail::parse_threshold(r, "meltpool.activity_threshold", mp.activity_threshold);
  mp.anomaly.activity_threshold = mp.activity_threshold;
  r.read("meltpool.density_factor", mp.anomaly.density_factor);
  r.read("meltpool.max_link_dist", mp.anomaly.max_link_dist);
  r.read("meltpool.min_track_len", mp.anomaly.min_track_len);
  r.read("meltpool.max_gap_frames", mp.anomaly.max_gap_frames);
  if (r.has("meltpool.overlay_frame")) {
    mp.overlay_frame = r.get<std::size_t>("meltpool.overlay_frame", 0);
  }

  r.reject_unused();
  return c;
}

inline const std::vector<std::string> & subcommands()
{
  static const std::vector<std::string> names{
    "simulate", "frames", "coded", "stats", "footprint", "meltpool",
    "demo-fig4", "demo-fig6", "demo-fig8", "demo-fig10"};
  return names;
}

/// Built-in defaults for a subcommand, layered under the config file.
inline KeyValues default_values(const std::string & subcommand)
{
  KeyValues kv{
    {"scene.kind", "meltpool"},
    {"scene.level", "1.0"},
  };
  auto anomaly = [&kv]() {
    kv["anomaly1.t_on_us"] = "200000";
    kv["anomaly1.t_off_us"] = "800000";
  };
  if (subcommand == "demo-fig4" || subcommand == "demo-fig10") anomaly();
  if (subcommand == "demo-fig8") {
    kv["scene.kind"] = "balloon_pop";
    kv["scene.level"] = "1000";
    kv["scene.width"] = "64";
    kv["scene.height"] = "64";
    kv["scene.duration_us"] = "10000000";
    kv["scene.fps"] = "500";
  }
  return kv;
}

// ---------------------------------------------------------------------------------------------
// Subcommand runners

namespace detail
{
inline std::string fmt(const char * f, double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

class Artifacts
{
public:
  Artifacts(std::filesystem::path dir, std::ostream & log) : dir_(std::move(dir)), log_(log)
  {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw io::IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  void write(const std::filesystem::path & rel, std::string_view data)
  {
    const auto path = dir_ / rel;
    if (path.has_parent_path()) {
      std::error_code ec;
      std::filesystem::create_directories(path.parent_path(), ec);
      if (ec) throw io::IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    }
    io::write_atomic(path, data);
    log_ << "wrote " << path.string() << "\n";
  }

  void write(const std::filesystem::path & rel, std::span<const std::uint8_t> data)
  {
    write(rel, std::string_view(reinterpret_cast<const char *>(data.data()), data.size()));
  }

private:
  std::filesystem::path dir_;
  std::ostream & log_;
};

inline std::string frame_name(std::size_t i)
{
  char name[32];
  std::snprintf(name, sizeof name, "frame_%06zu.pgm", i);
  return name;
}

inline EventStream load_or_simulate(const PipelineConfig & c, const SceneSource * src)
{
  if (c.codec.input) {
    const auto & path = *c.codec.input;
    if (path.extension() == ".csv") return codec::read_csv(io::read_text(path), c.scene.geometry);
    return codec::decode_evt1(io::read_bytes(path));
  }
  return simulate(*src, c.sensor);
}

inline void write_events(Artifacts & out, const PipelineConfig & c, const EventStream & s)
{
  out.write("events.evt1", codec::encode_evt1(s));
  if (c.codec.write_csv) out.write("events.csv", codec::write_csv(s));
}

inline void write_frames(Artifacts & out, const std::string & dir, const std::vector<Frame> & frames,
                         ImageMapping mapping)
{
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out.write(dir + "/" + frame_name(i), io::encode_pgm(to_image(frames[i], mapping)));
  }
  out.write(dir + "/manifest.txt", frame_manifest(frames));
}

inline std::string stream_summary(const EventStream & s)
{
  std::ostringstream os;
  os << "width=" << s.geometry.width << "\n";
  os << "height=" << s.geometry.height << "\n";
  os << "event_count=" << s.size() << "\n";
  if (!s.empty()) {
    os << "first_t_us=" << first_time(s) << "\n";
    os << "last_t_us=" << last_time(s) << "\n";
  }
  return os.str();
}

struct MeltpoolResult
{
  std::vector<meltpool::PoolSample> series;
  std::vector<meltpool::AnomalyTrack> tracks;
  std::size_t gaps{0};
};

inline MeltpoolResult run_meltpool(Artifacts & out, const PipelineConfig & c, const EventStream & s)
{
  const auto frames = frame_sequence(s, c.framing.stride_us, c.framing.make_code());
  if (frames.empty()) throw std::invalid_argument("meltpool: stream too short for one frame");
  MeltpoolResult r;
  r.series = meltpool::pool_series(frames, meltpool::PoolParams{c.meltpool.activity_threshold});
  r.tracks = meltpool::detect_anomalies(frames, c.meltpool.anomaly);
  for (const auto & p : r.series) r.gaps += p.geometry ? 0 : 1;
  out.write("pool_series.csv", meltpool::pool_series_csv(r.series));
  out.write("tracks.csv", meltpool::tracks_csv(r.tracks));
  const std::size_t k = std::min(c.meltpool.overlay_frame.value_or(frames.size() / 2), frames.size() - 1);
  const double thr = meltpool::threshold_for(frames[k], c.meltpool.activity_threshold);
  out.write("overlay.pgm", io::encode_pgm(meltpool::outline_overlay(frames[k], meltpool::segment(frames[k], thr))));
  return r;
}

inline std::string meltpool_summary(const MeltpoolResult & r)
{
  std::ostringstream os;
  os << "frames=" << r.series.size() << "\n";
  os << "gap_frames=" << r.gaps << "\n";
  os << "tracks=" << r.tracks.size() << "\n";
  for (const auto & t : r.tracks) {
    os << "track" << t.id << "_points=" << t.points.size() << "\n";
    os << "track" << t.id << "_t_first_us=" << fmt("%.1f", t.points.front().t_us) << "\n";
    os << "track" << t.id << "_t_last_us=" << fmt("%.1f", t.points.back().t_us) << "\n";
  }
  return os.str();
}

inline std::string burst_lines(const EventStream & s, const AnalyticsConfig & a)
{
  const auto cum = analytics::cumulative_fraction(s, a.bins);
  const auto rate = analytics::event_rate(s, a.rate_window_us);
  std::ostringstream os;
  os << "event_count=" << s.size() << "\n";
  os << "bins=" << a.bins << "\n";
  os << "bin_width_us=" << fmt("%.3f", cum.bin_width_us()) << "\n";
  auto burst = [&](const auto & curve, const char * key) {
    try {
      os << key << "=" << fmt("%.1f", analytics::detect_burst(curve, a.smoothing)) << "\n";
    } catch (const analytics::NoBurstError &) {
      os << key << "=none\n";
    } catch (const std::invalid_argument &) {
      os << key << "=none\n";  // too few bins to call a burst
    }
  };
  burst(cum, "cumulative_burst_us");
  burst(rate, "rate_burst_us");
  return os.str();
}

inline void write_curves(Artifacts & out, const EventStream & s, const AnalyticsConfig & a)
{
  out.write("cumulative.csv", analytics::to_csv(analytics::cumulative_fraction(s, a.bins)));
  out.write("rate.csv", analytics::to_csv(analytics::event_rate(s, a.rate_window_us)));
}
}  // namespace detail

/// Execute a subcommand with a validated config. Exceptions propagate to run().
inline void run_subcommand(const std::string & name, const PipelineConfig & c, std::ostream & log)
{
  c.check();
  std::optional<SceneSource> src;
  if (!c.codec.input || name.rfind("demo-", 0) == 0) {
    src.emplace(c.scene.spec, c.scene.geometry, c.scene.duration_us, c.scene.fps);
  }
  detail::Artifacts out(c.out_dir, log);
  const SceneSource * sp = src ? &*src : nullptr;
  const bool demo = name.rfind("demo-", 0) == 0;
  const EventStream s = demo ? simulate(*src, c.sensor) : detail::load_or_simulate(c, sp);

  if (name == "simulate") {
    detail::write_events(out, c, s);
    out.write("summary.txt", detail::stream_summary(s));
    if (src && c.scene.dump_video_frames > 0) {
      const double scale = src->peak_intensity();
      const std::size_t n = std::min(c.scene.dump_video_frames, src->frame_count());
      for (std::size_t k = 0; k < n; ++k) {
        out.write("video/" + detail::frame_name(k), io::encode_pgm(video_frame_image(*src, k, scale)));
      }
      out.write("video/scale.txt", video_scale_sidecar(scale, src->frame_time_us(1)));
    }
  } else if (name == "frames") {
    detail::write_frames(
      out, "frames", accumulate_sequence(s, c.framing.stride_us, c.framing.window_us),
      c.framing.mapping());
  } else if (name == "coded") {
    const auto frames = frame_sequence(s, c.framing.stride_us, c.framing.make_code());
    detail::write_frames(out, "coded", frames, c.framing.mapping());
    std::string energy = "index,t_start_us,energy\n";
    for (std::size_t i = 0; i < frames.size(); ++i) {
      energy += std::to_string(i) + "," + std::to_string(frames[i].t_start_us) + "," +
                detail::fmt("%.9g", frame_energy(frames[i])) + "\n";
    }
    out.write("coded/energy.csv", energy);
  } else if (name == "stats") {
    detail::write_curves(out, s, c.analytics);
    out.write("stats.txt", detail::burst_lines(s, c.analytics));
  } else if (name == "footprint") {
    const auto report = analytics::savings_report(s, c.analytics.footprint);
    out.write("footprint.txt", analytics::format_report(report, c.analytics.footprint));
  } else if (name == "meltpool") {
    const auto r = detail::run_meltpool(out, c, s);
    out.write("meltpool.txt", detail::meltpool_summary(r));
  } else if (name == "demo-fig4") {
    detail::write_events(out, c, s);
    const auto r = detail::run_meltpool(out, c, s);
    std::string truth = "anomaly,t_us,x,y\n";
    for (std::size_t j = 0; j < c.scene.spec.anomalies.size(); ++j) {
      for (const auto & p : r.series) {
        if (!src->anomaly_active(j, p.t_us)) continue;
        const auto [x, y] = src->anomaly_position(j, p.t_us);
        truth += std::to_string(j) + "," + detail::fmt("%.1f", p.t_us) + "," +
                 detail::fmt("%.4f", x) + "," + detail::fmt("%.4f", y) + "\n";
      }
    }
    out.write("anomaly_truth.csv", truth);
    out.write("fig4.txt", detail::stream_summary(s) + detail::meltpool_summary(r));
  } else if (name == "demo-fig6") {
    detail::write_events(out, c, s);
    const auto r = detail::run_meltpool(out, c, s);
    std::string csv = "t_us,measured,truth\n";
    std::vector<double> measured, truth;
    for (const auto & p : r.series) {
      const double gt = src->aspect_ratio_at(p.t_us);
      csv += detail::fmt("%.1f", p.t_us) + ",";
      if (p.geometry) {
        csv += detail::fmt("%.9g", p.geometry->aspect_ratio);
        measured.push_back(p.geometry->aspect_ratio);
        truth.push_back(gt);
      }
      csv += "," + detail::fmt("%.9g", gt) + "\n";
    }
    out.write("aspect.csv", csv);
    std::string summary = detail::stream_summary(s) + detail::meltpool_summary(r);
    summary += "pearson_r=" +
               (measured.size() >= 2 ? detail::fmt("%.6f", analytics::pearson(measured, truth))
                                     : std::string("none")) +
               "\n";
    out.write("fig6.txt", summary);
  } else if (name == "demo-fig8") {
    detail::write_events(out, c, s);
    detail::write_curves(out, s, c.analytics);
    std::string summary = detail::burst_lines(s, c.analytics);
    if (c.scene.spec.kind == SceneKind::balloon_pop) {
      summary += "pop_time_us=" + detail::fmt("%.1f", c.scene.spec.pop_time_us) + "\n";
    }
    out.write("fig8.txt", summary);
  } else if (name == "demo-fig10") {
    detail::write_events(out, c, s);
    if (s.empty()) throw std::invalid_argument("demo-fig10: no events");
    const timestamp_us t0 = first_time(s) + c.framing.snapshot_us;
    std::string manifest = "# file t_start_us window_us code\n";
    for (std::uint64_t w : c.framing.windows_us) {
      const Frame f = accumulate(s, t0, w);
      char name[48];
      std::snprintf(name, sizeof name, "window_%08llu_us.pgm", static_cast<unsigned long long>(w));
      out.write(std::string("windows/") + name, io::encode_pgm(to_image(f, c.framing.mapping())));
      manifest += std::string(name) + " " + std::to_string(t0) + " " + std::to_string(w) + " " +
                  f.code_descriptor + "\n";
    }
    const Frame coded = coded_frame(s, c.framing.make_code(), t0);
    out.write("windows/coded.pgm", io::encode_pgm(to_image(coded, c.framing.mapping())));
    manifest += "coded.pgm " + std::to_string(t0) + " " + std::to_string(coded.window_us) + " " +
                coded.code_descriptor + "\n";
    out.write("windows/manifest.txt", manifest);
  } else {
    throw ConfigError("unknown subcommand '" + name + "'");
  }
}

inline std::string error_line(Exit code, const char * kind, std::string message)
{
  std::replace(message.begin(), message.end(), '\n', ' ');
  std::replace(message.begin(), message.end(), '"', '\'');
  return "evmelt: error code=" + std::to_string(static_cast<int>(code)) + " kind=" + kind +
         " message=\"" + message + "\"\n";
}

/// Full command-line entry: `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream & out, std::ostream & err)
{
  CLI::App app{"Event-camera simulation and melt-pool analytics", "evmelt"};
  std::string command;
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  bool version = false;
  app.add_flag("--version", version, "print version and exit");
  app.add_option("command", command, "subcommand")->check(CLI::IsMember(subcommands()));
  app.add_option("--config", config_path, "config file ([section] key = value)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "seed for scene, sensor and flutter code");
  app.add_option("--set", sets, "override: section.key=value")->allow_extra_args(false);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError & e) {
    err << error_line(Exit::parse, "usage", e.what());
    return static_cast<int>(Exit::parse);
  }
  if (version) {
    out << "evmelt " << EVMELT_VERSION << "\n";
    return 0;
  }
  if (command.empty()) {
    err << error_line(Exit::parse, "usage", "missing subcommand");
    return static_cast<int>(Exit::parse);
  }

  try {
    KeyValues kv = default_values(command);
    if (!config_path.empty()) {
      for (const auto & [k, v] : parse_config_text(io::read_text(config_path))) kv[k] = v;
    }
    for (const auto & s : sets) apply_override(kv, s);
    if (seed) kv["run.seed"] = std::to_string(*seed);
    if (!out_dir.empty()) kv["run.out"] = out_dir;
    const PipelineConfig cfg = build_config(kv);
    run_subcommand(command, cfg, out);
  } catch (const ConfigError & e) {
    err << error_line(Exit::parse, "config", e.what());
    return static_cast<int>(Exit::parse);
  } catch (const io::IoError & e) {
    err << error_line(Exit::io, "io", e.what());
    return static_cast<int>(Exit::io);
  } catch (const codec::DecodeError & e) {
    err << error_line(Exit::validation, "decode", e.what());
    return static_cast<int>(Exit::validation);
  } catch (const std::filesystem::filesystem_error & e) {
    err << error_line(Exit::io, "io", e.what());
    return static_cast<int>(Exit::io);
  } catch (const std::exception & e) {
    err << error_line(Exit::validation, "validation", e.what());
    return static_cast<int>(Exit::validation);
  }
  return 0;
}

}  // namespace evmelt::cli

#endif  // EVMELT_CLI_HPP
