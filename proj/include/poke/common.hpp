// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace poke {

// Error classes map 1:1 to CLI exit codes and stay stable across versions.
enum class ErrorClass : int {
  config = 2,    // bad configuration / arguments
  io = 3,        // filesystem, encoding, missing files
  numeric = 4,   // non-finite values, failed solves
  geometry = 5,  // degenerate geometric input
  data = 6,      // malformed or inconsistent datasets
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& msg)
      : std::runtime_error(msg), cls_(cls) {}
  ErrorClass error_class() const { return cls_; }
  int exit_code() const { return static_cast<int>(cls_); }

 private:
  ErrorClass cls_;
};

[[noreturn]] inline void fail(ErrorClass cls, const std::string& msg) {
  throw Error(cls, msg);
}

inline void require(bool cond, ErrorClass cls, const std::string& msg) {
  if (!cond) fail(cls, msg);
}

// splitmix64; used to derive independent sub-seeds from one master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(mix_seed(seed, stream));
}

// Static range split over [0, n). Worker w handles [begin, end).
// Deterministic for a fixed thread count; threads <= 1 runs inline.
template <typename Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    fn(0, std::size_t(0), n);
    return;
  }
  std::size_t t = std::min<std::size_t>(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (std::size_t w = 0; w < t; ++w) {
    std::size_t begin = n * w / t;
    std::size_t end = n * (w + 1) / t;
    pool.emplace_back([&fn, w, begin, end] { fn(static_cast<int>(w), begin, end); });
  }
  for (auto& th : pool) th.join();
}

inline int default_thread_count() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace poke
