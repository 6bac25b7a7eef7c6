// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "normlab/tensor.hpp"

namespace normlab {

// Every source of randomness in the library goes through one of these so that
// a run is fully determined by its seed. fork() derives an independent stream
// so that, e.g., the train/val split does not consume draws from the batch
// shuffler.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::mt19937_64& engine() noexcept { return engine_; }

  Rng fork(std::uint64_t salt) const { return Rng(splitmix(seed_ ^ (salt * 0x9E3779B97F4A7C15ull))); }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  std::uint64_t uniform_index(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }
  // log-uniform on [lo, hi], lo > 0
  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  void fill_uniform(Tensor& t, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = d(engine_);
  }
  void fill_normal(Tensor& t, double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> d(mean, stddev);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = d(engine_);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), engine_);
  }

private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// Random orthogonal matrix via Gram-Schmidt on a Gaussian matrix. Used to
// build recurrent transition matrices with a prescribed spectral radius.
Tensor random_orthogonal(std::size_t n, Rng& rng);

}  // namespace normlab
