// Copyright 2026 The afde authors
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

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace afde {

// Seeded random source. One root seed fans out into named sub-streams
// ("init", "split", "sample", ...) so adding a consumer never perturbs the
// draws of another. The distributions are implemented here instead of using
// std:: ones because the standard leaves those implementation-defined and we
// promise identical output for identical seeds.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : root_(seed), gen_(mix(seed)) {}

  // Derive an independent stream from this rng's root seed and a label.
  Rng stream(std::string_view name) const {
    return Rng(mix(root_ ^ fnv1a(name)));
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n), n >= 1.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) return 0;
    // Rejection from the largest multiple of n below 2^64.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  std::uint32_t uniform_u32(std::uint32_t n) {
    return static_cast<std::uint32_t>(uniform_int(n));
  }

  // Standard normal via Box-Muller; consumes a fixed two uniforms per pair.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    // Guard against log(0).
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Standard Gumbel, for top-k sampling without replacement.
  double gumbel() {
    double u = uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    return -std::log(-std::log(u));
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    return h;
  }

  // splitmix64 finalizer; decorrelates nearby seeds before feeding mt19937_64.
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::uint64_t root_;
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace afde
