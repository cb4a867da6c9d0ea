// Copyright 2026 The PDC-FRS Authors.
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

#pragma once

#include <cstdint>
#include <random>

namespace pdcfrs {

using Rng = std::mt19937_64;

// Named sub-streams fanned out from one master seed. Components draw from
// their own stream so that changing one (say, the split) leaves the others
// untouched.
enum class Stream : std::uint32_t {
  kSplit = 1,
  kInit = 2,
  kPerturb = 3,
  kLocalTrain = 4,
  kClientOrder = 5,
  kAuxTrain = 6,
  kAuxNegatives = 7,
  kAuxInit = 8,
  kSweep = 9,
  kSynthetic = 10,
  kResample = 11,
};

// Deterministic engine for (seed, stream, a, b). The tuple is fed through
// std::seed_seq so nearby seeds give unrelated sequences.
inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t a = 0,
                    std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

}  // namespace pdcfrs
