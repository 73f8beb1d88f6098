#pragma once

// Error types, seeded RNG streams and a small deterministic parallel-for.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pealloc {

/// Precondition or shape violation by the caller.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

/// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// No finite solution exists (e.g. a rate target below an asymptote).
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values or divergence during training.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed user input (CSV, config, model files).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of stream `index` under `master`. Streams with different
/// (master, tag, index) triples are statistically independent.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t tag,
                                 std::uint64_t index = 0) {
  return mix_seed(mix_seed(mix_seed(master) ^ tag) ^ index);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t tag,
                    std::uint64_t index = 0) {
  return Rng{stream_seed(master, tag, index)};
}

/// Uniform double on [0, 1) built from the top 53 bits; identical across
/// standard libraries, unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Standard normal via Box-Muller (portable bit-for-bit).
inline double standard_normal(Rng& rng) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  double u1 = 0.0;
  do {
    u1 = uniform01(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

/// Exp(1) draw, i.e. |h|^2 for a unit circularly-symmetric complex Gaussian.
inline double unit_exponential(Rng& rng) {
  double u = 0.0;
  do {
    u = uniform01(rng);
  } while (u <= 0.0);
  return -std::log(u);
}

inline unsigned& thread_budget() {
  static unsigned n = 1;
  return n;
}

/// Number of workers used by parallel_for; 0 selects hardware concurrency.
inline void set_threads(unsigned n) {
  thread_budget() = n == 0 ? std::max(1u, std::thread::hardware_concurrency()) : n;
}

/// Runs body(i) for i in [0, n). Results must be written to per-index slots;
/// every task draws randomness from its own stream, so output does not
/// depend on the worker count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(thread_budget(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace pealloc
