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

#include "dpens/random.h"

#include <atomic>
#include <cmath>
#include <iostream>

#include "dpens/error.h"

namespace dpens {
namespace {

std::atomic<bool> g_warnings_enabled{true};

uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kCatalog: return "catalog error";
    case ErrorCode::kShape: return "shape error";
    case ErrorCode::kInsufficientData: return "insufficient data";
    case ErrorCode::kAlignment: return "alignment error";
    case ErrorCode::kSingular: return "singular matrix";
    case ErrorCode::kEmpty: return "empty input";
    case ErrorCode::kNegativeWeight: return "negative weight";
    case ErrorCode::kBudgetExhausted: return "privacy budget exhausted";
    case ErrorCode::kUndefined: return "undefined result";
    case ErrorCode::kInvariant: return "invariant violation";
    case ErrorCode::kIo: return "i/o error";
  }
  return "unknown";
}

void LogWarning(std::string_view message) {
  if (g_warnings_enabled.load(std::memory_order_relaxed)) {
    std::cerr << "warning: " << message << '\n';
  }
}

void SetWarningsEnabled(bool enabled) {
  g_warnings_enabled.store(enabled, std::memory_order_relaxed);
}

uint64_t Rng::UniformInt(uint64_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "UniformInt: n must be positive");
  // Rejection sampling on the largest multiple of n.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::Normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * Uniform01() - 1.0;
    v = 2.0 * Uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

uint64_t Fnv1a(std::string_view bytes, uint64_t basis) {
  uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t DeriveSeed(uint64_t master, std::string_view stage, uint64_t index) {
  uint64_t h = SplitMix64(master);
  h = Fnv1a(stage, h);
  return SplitMix64(h ^ SplitMix64(index + 0x632be59bd9b4e019ULL));
}

}  // namespace dpens
