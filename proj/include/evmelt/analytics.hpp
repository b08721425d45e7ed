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

#ifndef EVMELT_ANALYTICS_HPP
#define EVMELT_ANALYTICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "evmelt/codec.hpp"
#include "evmelt/event_model.hpp"

namespace evmelt::analytics
{
// ---------------------------------------------------------------------------------------------
// Dynamic range

inline const double kDbPerBit = 20.0 * std::log10(2.0);  // 6.0206 dB

inline double db_to_bits(double db)
{
  if (!(db > 0)) throw std::invalid_argument("db_to_bits: argument must be > 0");
  return db / kDbPerBit;
}

inline double bits_to_db(double bits)
{
  if (!(bits > 0)) throw std::invalid_argument("bits_to_db: argument must be > 0");
  return bits * kDbPerBit;
}

// ---------------------------------------------------------------------------------------------
// Adaptive sampling curves

struct CumulativeCurve
{
  double start_us{0};                // left edge of bin 0 (t_first)
  std::vector<double> bin_edges_us;  // right edge of each bin
  std::vector<double> fraction;      // events with t <= right edge, over total

  double bin_width_us() const
  {
    return bin_edges_us.empty() ? 0.0
                                : (bin_edges_us.back() - start_us) / static_cast<double>(bin_edges_us.size());
  }
  double center_us(std::size_t k) const
  {
    return start_us + (static_cast<double>(k) + 0.5) * bin_width_us();
  }
};

struct RateCurve
{
  std::vector<double> bin_centers_us;
  std::vector<double> events_per_second;
  double window_us{0};
};

/// Uniform bins over [t_first, t_last]; the last edge is exactly t_last.
inline CumulativeCurve cumulative_fraction(const EventStream & stream, std::size_t bin_count)
{
  if (bin_count < 1) throw std::invalid_argument("cumulative_fraction: bin_count must be >= 1");
  if (stream.empty()) throw std::invalid_argument("no events");
  const auto & ev = stream.events;
  const double t0 = static_cast<double>(ev.front().t);
  const double t1 = static_cast<double>(ev.back().t);
  const double width = (t1 - t0) / static_cast<double>(bin_count);
  const double total = static_cast<double>(ev.size());

  CumulativeCurve c;
  c.start_us = t0;
  c.bin_edges_us.resize(bin_count);
  c.fraction.resize(bin_count);
  std::size_t idx = 0;
  for (std::size_t k = 0; k < bin_count; ++k) {
    const double edge = k + 1 == bin_count ? t1 : t0 + width * static_cast<double>(k + 1);
    c.bin_edges_us[k] = edge;
    while (idx < ev.size() && static_cast<double>(ev[idx].t) <= edge) ++idx;
    c.fraction[k] = static_cast<double>(idx) / total;
  }
  return c;
}

/// Tiled half-open windows [t_first + k w, t_first + (k+1) w) covering the stream.
inline RateCurve event_rate(const EventStream & stream, std::uint64_t window_us)
{
  if (window_us == 0) throw std::invalid_argument("event_rate: window_us must be > 0");
  RateCurve r;
  r.window_us = static_cast<double>(window_us);
  if (stream.empty()) return r;
  const auto & ev = stream.events;
  const timestamp_us t0 = ev.front().t;
  const std::size_t nbins = static_cast<std::size_t>((ev.back().t - t0) / window_us) + 1;
  std::vector<std::uint64_t> counts(nbins, 0);
  for (const Event & e : ev) ++counts[(e.t - t0) / window_us];
  r.bin_centers_us.resize(nbins);
  r.events_per_second.resize(nbins);
  for (std::size_t k = 0; k < nbins; ++k) {
    r.bin_centers_us[k] = static_cast<double>(t0) + (static_cast<double>(k) + 0.5) * r.window_us;
    r.events_per_second[k] = static_cast<double>(counts[k]) / (r.window_us * 1e-6);
  }
  return r;
}

class NoBurstError : public std::runtime_error
{
public:
  NoBurstError() : std::runtime_error("no burst") {}
};

namespace detail
{
inline std::vector<double> moving_average(const std::vector<double> & v, std::size_t width)
{
  if (width <= 1) return v;
  std::vector<double> out(v.size());
  const std::size_t half = width / 2;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(v.size() - 1, i + (width - 1 - half));
    double s = 0;
    for (std::size_t j = lo; j <= hi; ++j) s += v[j];
    out[i] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

// Index of the first maximum; throws when every entry ties. Values within a
// relative 1e-12 of each other count as tied, since cumulative slopes are
// differences of fractions and equal counts can differ in the last bit.
inline std::size_t first_argmax(const std::vector<double> & v)
{
  if (v.size() < 3) throw std::invalid_argument("detect_burst: need at least 3 bins");
  const double top = *std::max_element(v.begin(), v.end());
  const double tol = 1e-12 * std::max(1.0, std::abs(top));
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x >= top - tol; })) throw NoBurstError();
  const auto it = std::find_if(v.begin(), v.end(), [&](double x) { return x >= top - tol; });
  return static_cast<std::size_t>(it - v.begin());
}
}  // namespace detail

/// Center of the bin with the largest cumulative increase. The cumulative
/// function is sampled at bin edges, with F(left edge of bin 0) = 0, so bin k's
/// forward difference is fraction[k] - fraction[k-1].
inline double detect_burst(const CumulativeCurve & curve, std::size_t smoothing = 1)
{
  std::vector<double> slope(curve.fraction.size());
  for (std::size_t k = 0; k < slope.size(); ++k) {
    slope[k] = curve.fraction[k] - (k == 0 ? 0.0 : curve.fraction[k - 1]);
  }
  const std::size_t k = detail::first_argmax(detail::moving_average(slope, smoothing));
  return curve.center_us(k);
}

inline double detect_burst(const RateCurve & curve, std::size_t smoothing = 1)
{
  const std::size_t k =
    detail::first_argmax(detail::moving_average(curve.events_per_second, smoothing));
  return curve.bin_centers_us[k];
}

inline std::string curve_csv(const std::vector<double> & x, const std::vector<double> & y)
{
  std::string out = "bin_center_us,value\n";
  char buf[96];
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.3f,%.17g\n", x[i], y[i]);
    out += buf;
  }
  return out;
}

inline std::string to_csv(const CumulativeCurve & c)
{
  std::vector<double> centers(c.fraction.size());
  for (std::size_t k = 0; k < centers.size(); ++k) centers[k] = c.center_us(k);
  return curve_csv(centers, c.fraction);
}

inline std::string to_csv(const RateCurve & r) { return curve_csv(r.bin_centers_us, r.events_per_second); }

/// Pearson correlation of two equal-length series; throws when either is constant.
inline double pearson(const std::vector<double> & a, const std::vector<double> & b)
{
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("pearson: need two series of equal length >= 2");
  }
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0 || sbb <= 0) throw std::invalid_argument("pearson: constant series");
  return sab / std::sqrt(saa * sbb);
}

// ---------------------------------------------------------------------------------------------
// Memory footprint

struct FootprintModel
{
  std::uint64_t bytes_per_event{8};
  std::uint32_t width{346};
  std::uint32_t height{260};
  double fps{1000.0};
  double bytes_per_pixel{3.0};
  std::uint64_t duration_us{1'000'000};
  double event_range_db{120.0};  // dynamic range of the event sensor

  void check() const
  {
    if (bytes_per_event < 1) throw std::invalid_argument("footprint: bytes_per_event >= 1");
    if (width < 1 || height < 1) throw std::invalid_argument("footprint: width/height >= 1");
    if (!(fps > 0)) throw std::invalid_argument("footprint: fps > 0");
    if (!(bytes_per_pixel > 0)) throw std::invalid_argument("footprint: bytes_per_pixel > 0");
    if (!(event_range_db > 0)) throw std::invalid_argument("footprint: event_range_db > 0");
  }
};

/// EVT1 container size for the stream.
inline std::uint64_t event_footprint(const EventStream & stream, std::uint64_t bytes_per_event)
{
  if (bytes_per_event < 1) throw std::invalid_argument("event_footprint: bytes_per_event >= 1");
  return codec::kHeaderBytes + bytes_per_event * stream.events.size();
}

inline std::uint64_t conventional_frame_count(const FootprintModel & m)
{
  const long double frames = static_cast<long double>(m.fps) * m.duration_us / 1e6L;
  const long double nearest = std::round(frames);
  // treat values within rounding noise of an integer as that integer
  if (std::abs(frames - nearest) <= 1e-9L * std::max(1.0L, frames)) {
    return static_cast<std::uint64_t>(nearest);
  }
  return static_cast<std::uint64_t>(std::ceil(frames));
}

/// width * height * bytes_per_pixel * ceil(fps * duration), no container overhead.
inline double conventional_footprint(const FootprintModel & m)
{
  m.check();
  return static_cast<double>(m.width) * m.height * m.bytes_per_pixel *
         static_cast<double>(conventional_frame_count(m));
}

struct SavingsReport
{
  double event_bytes{0};
  double conventional_bytes{0};
  double raw_ratio{0};
  double equivalent_bits{0};     // bits a linear pixel needs to span event_range_db
  double hdr_pixel_bits{0};      // ceil(equivalent_bits)
  double hdr_packed_bytes{0};    // hdr_pixel_bits / 8, bit-packed storage
  double hdr_aligned_bytes{0};   // byte-aligned storage
  double dr_factor{0};           // hdr_packed_bytes / bytes_per_pixel
  double dr_adjusted_ratio{0};   // raw_ratio * dr_factor
  double dr_aligned_factor{0};
  double dr_adjusted_ratio_aligned{0};
};

/// Footprint comparison. The dynamic-range adjustment asks how large the
/// conventional recording would be if each pixel had to span the event sensor's
/// dynamic range: ceil(bits) per pixel instead of bytes_per_pixel bytes. The
/// factor exceeds 1 only when the baseline stores fewer bytes than that.
inline SavingsReport savings_report(const EventStream & stream, const FootprintModel & model)
{
  model.check();
  SavingsReport r;
  r.event_bytes = static_cast<double>(event_footprint(stream, model.bytes_per_event));
  r.conventional_bytes = conventional_footprint(model);
  r.raw_ratio = r.conventional_bytes / r.event_bytes;
  r.equivalent_bits = db_to_bits(model.event_range_db);
  r.hdr_pixel_bits = std::ceil(r.equivalent_bits - 1e-12);
  r.hdr_packed_bytes = r.hdr_pixel_bits / 8.0;
  r.hdr_aligned_bytes = std::ceil(r.hdr_packed_bytes);
  r.dr_factor = r.hdr_packed_bytes / model.bytes_per_pixel;
  r.dr_adjusted_ratio = r.raw_ratio * r.dr_factor;
  r.dr_aligned_factor = r.hdr_aligned_bytes / model.bytes_per_pixel;
  r.dr_adjusted_ratio_aligned = r.raw_ratio * r.dr_aligned_factor;
  return r;
}

/// Human-readable report followed by a `key=value` block.
inline std::string format_report(const SavingsReport & r, const FootprintModel & m)
{
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  std::ostringstream os;
  os << "Memory footprint comparison\n";
  os << "  event stream (EVT1, " << m.bytes_per_event << " B/event): " << num(r.event_bytes)
     << " bytes\n";
  os << "  conventional " << m.width << "x" << m.height << " @ " << num(m.fps) << " fps, "
     << num(m.bytes_per_pixel) << " B/px, " << m.duration_us << " us: " << num(r.conventional_bytes)
     << " bytes\n";
  os << "  raw ratio (conventional / event): " << num(r.raw_ratio) << "\n";
  os << "Dynamic-range adjustment\n";
  os << "  " << num(m.event_range_db) << " dB = " << num(r.equivalent_bits)
     << " bits (unit is bits per pixel, not bytes)\n";
  os << "  a conventional pixel spanning that range needs " << num(r.hdr_pixel_bits) << " bits = "
     << num(r.hdr_packed_bytes) << " B packed, " << num(r.hdr_aligned_bytes) << " B byte-aligned\n";
  os << "  factor = hdr_bytes / bytes_per_pixel = " << num(r.dr_factor) << " (packed), "
     << num(r.dr_aligned_factor) << " (aligned); "
     << (r.dr_factor > 1 ? "baseline under-provisioned, savings grow"
                         : "baseline already wider than needed, savings shrink")
     << "\n";
  os << "  adjusted ratio = raw_ratio * factor = " << num(r.dr_adjusted_ratio) << " (packed), "
     << num(r.dr_adjusted_ratio_aligned) << " (aligned)\n";
  os << "\n[savings]\n";
  os << "event_bytes=" << num(r.event_bytes) << "\n";
  os << "conventional_bytes=" << num(r.conventional_bytes) << "\n";
  os << "raw_ratio=" << num(r.raw_ratio) << "\n";
  os << "equivalent_bits=" << num(r.equivalent_bits) << "\n";
  os << "hdr_pixel_bits=" << num(r.hdr_pixel_bits) << "\n";
  os << "dr_factor=" << num(r.dr_factor) << "\n";
  os << "dr_adjusted_ratio=" << num(r.dr_adjusted_ratio) << "\n";
  os << "dr_aligned_factor=" << num(r.dr_aligned_factor) << "\n";
  os << "dr_adjusted_ratio_aligned=" << num(r.dr_adjusted_ratio_aligned) << "\n";
  return os.str();
}

}  // namespace evmelt::analytics

#endif  // EVMELT_ANALYTICS_HPP
