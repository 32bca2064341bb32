/*
 * Copyright 2026 The adadp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef ADADP_RANDOM_HPP_
#define ADADP_RANDOM_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>

namespace adadp {

// Seeded source of uniform, Laplace, and Gaussian variates. All noise in the
// library is drawn through this class so that a (seed, call sequence) pair
// reproduces bit-identical results on every platform. std::normal_distribution
// and friends are implementation-defined and therefore avoided.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform variate in the open interval (0, 1). The half-offset keeps both
  // endpoints unreachable, so logs of u and 1-u are always finite.
  double uniform() {
    const std::uint64_t x = engine_();
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, n) by rejection, free of modulo bias.
  std::uint64_t integer_below(std::uint64_t n) {
    if (n == 0) {
      throw std::domain_error("integer_below: n must be positive");
    }
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) {
      x = engine_();
    }
    return x % n;
  }

  // Centered Laplace variate with scale b, via inverse CDF.
  double laplace(double b) {
    if (b <= 0.0) {
      throw std::domain_error("laplace: scale must be positive");
    }
    const double w = uniform() - 0.5;
    return -b * (w < 0.0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::fabs(w));
  }

  // Centered Gaussian variate with standard deviation sigma. Box-Muller on
  // the uniform stream; the paired variate is cached per instance.
  double gaussian(double sigma) {
    if (sigma <= 0.0) {
      throw std::domain_error("gaussian: sigma must be positive");
    }
    if (have_cached_) {
      have_cached_ = false;
      return sigma * cached_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return sigma * r * std::cos(a);
  }

  // Independent substream for parallel work. Index i is mixed into the seed
  // with splitmix64 so that nearby indices yield unrelated streams.
  RandomSource substream(std::uint64_t i) const {
    return RandomSource(splitmix64(seed_ ^ splitmix64(i)));
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace adadp

#endif  // ADADP_RANDOM_HPP_
