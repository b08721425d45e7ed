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
#ifndef EVMELT_TESTS_TEST_UTIL_HPP
#define EVMELT_TESTS_TEST_UTIL_HPP

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "evmelt/event_model.hpp"

namespace evmelt::test
{
/// Seeded random valid stream: nondecreasing times with gaps in [0, max_gap].
inline EventStream random_stream(
  std::uint64_t seed, std::size_t n, SensorGeometry g, std::uint64_t max_gap = 50,
  timestamp_us t0 = 0)
{
  std::mt19937_64 rng(seed);
  EventStream s{g, {}, std::nullopt};
  s.events.reserve(n);
  timestamp_us t = t0;
  for (std::size_t i = 0; i < n; ++i) {
    t += rng() % (max_gap + 1);
    s.events.push_back(
      {t, static_cast<std::uint16_t>(rng() % g.width), static_cast<std::uint16_t>(rng() % g.height),
       static_cast<std::int8_t>((rng() & 1) ? 1 : -1)});
  }
  return s;
}

inline EventStream make_stream(SensorGeometry g, std::vector<Event> ev)
{
  return EventStream{g, std::move(ev), std::nullopt};
}

inline std::filesystem::path data_dir() { return EVMELT_TEST_DATA_DIR; }

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string & name)
{
  const auto p = std::filesystem::path(EVMELT_TEST_SCRATCH_DIR) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}
}  // namespace evmelt::test

#endif  // EVMELT_TESTS_TEST_UTIL_HPP
