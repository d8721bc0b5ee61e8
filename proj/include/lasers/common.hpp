#ifndef LASERS_COMMON_HPP
#define LASERS_COMMON_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lasers {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Column-stacked coding units: rows = signal dimension, cols = signal count.
using SignalMatrix = Eigen::MatrixXd;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct CheckpointError : DataError {
  using DataError::DataError;
};
struct DivergenceError : Error {
  using Error::Error;
};
struct SingularSupportError : Error {
  using Error::Error;
};

// Deterministic random source. The engine sequence is pinned by the standard;
// distributions are hand-rolled so streams never depend on the C++ library
// implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal, Box-Muller. Consumes two draws per call.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Uniform integer in [0, n), n > 0.
  std::uint64_t bounded(std::uint64_t n) {
    return std::uint64_t((static_cast<unsigned __int128>(gen_()) * n) >> 64);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[bounded(i)]);
  }

 private:
  std::mt19937_64 gen_;
};

// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per
// thread. Chunks are disjoint, so results are identical to a serial run as
// long as fn only writes to its own index range.
template <typename Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    fn(std::int64_t(0), n);
    return;
  }
  const int workers = int(std::min<std::int64_t>(threads, n));
  const std::int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(workers));
  for (int t = 0; t < workers; ++t) {
    const std::int64_t begin = t * chunk;
    const std::int64_t end = std::min<std::int64_t>(begin + chunk, n);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& th : pool) th.join();
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw DimensionError(msg);
}

}  // namespace lasers

#endif
