// Copyright 2026 The dpens Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPENS_RANDOM_H_
#define DPENS_RANDOM_H_

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace dpens {

// Seeded generator with platform-independent derived distributions.
//
// The standard library distributions (std::normal_distribution and friends)
// are implementation-defined, so every variate used by this project is derived
// here directly from the 64-bit engine output. Results are bit-identical across
// compilers for a given seed.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of precision.
  double Uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on [lo, hi).
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform01(); }

  // Unbiased integer on [0, n). Requires n > 0.
  uint64_t UniformInt(uint64_t n);

  // Standard normal via the polar method.
  double Normal();

  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }

  template <typename T>
  void Shuffle(std::span<T> values) {
    for (size_t i = values.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(UniformInt(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Keyed hash of (master seed, stage name, index) used to give every pipeline
// stage and fold its own stable generator stream.
uint64_t DeriveSeed(uint64_t master, std::string_view stage, uint64_t index = 0);

// 64-bit FNV-1a, used for fingerprints and cache keys.
uint64_t Fnv1a(std::string_view bytes, uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace dpens

#endif  // DPENS_RANDOM_H_
