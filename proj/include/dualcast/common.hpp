#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace dualcast {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

// ---------------------------------------------------------------------------
// Seeding and random numbers
//
// All stochastic components (tree subsampling, bag construction, network
// initialization, ...) draw from an Rng seeded through derive_seed, so a run
// is reproducible from a single root seed regardless of execution order.
// ---------------------------------------------------------------------------

inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  return mix_seed(root ^ mix_seed(stream + 1));
}

// Deterministic generator with portable uniform/normal transforms (the
// std::* distributions are implementation-defined, so we roll the mapping
// from raw bits ourselves).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(bits() >> 11) * 0x1.0p-53;
  }

  // Uniform integer on [0, n).
  int uniform_int(int n) {
    require(n > 0, "uniform_int: n must be positive");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r = bits();
    while (r >= limit) r = bits();
    return static_cast<int>(r % bound);
  }

  // Standard normal via Box-Muller.
  double normal() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cache_ = r * std::sin(theta);
    has_cache_ = true;
    return r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<std::size_t>(i)],
                v[static_cast<std::size_t>(uniform_int(i + 1))]);
    }
  }

  // First k elements of a shuffled 0..n-1 index vector, returned sorted.
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    shuffle(idx);
    idx.resize(static_cast<std::size_t>(std::min(k, n)));
    std::sort(idx.begin(), idx.end());
    return idx;
  }

  Rng fork(std::uint64_t stream) { return Rng(derive_seed(bits(), stream)); }

 private:
  std::mt19937_64 gen_;
  double cache_ = 0.0;
  bool has_cache_ = false;
};

// ---------------------------------------------------------------------------
// Parallel helpers
// ---------------------------------------------------------------------------

// Runs fn(i) for i in [0, n) over a thread pool. Tasks must write only to
// their own output slots; exceptions are rethrown on the calling thread.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  int workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers <= 0) workers = 4;
  workers = std::min(workers, n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::atomic<int> next{0};
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Small numeric helpers
// ---------------------------------------------------------------------------

inline double mean(const Vector& v) {
  require(v.size() > 0, "mean of empty vector");
  return v.mean();
}

// Sample standard deviation (divide by N-1).
inline double sample_std(const Vector& v) {
  require(v.size() >= 2, "sample_std needs at least 2 values");
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() /
                   static_cast<double>(v.size() - 1));
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vector from_std(const std::vector<double>& v) {
  Vector out(static_cast<Index>(v.size()));
  for (Index i = 0; i < out.size(); ++i)
    out[i] = v[static_cast<std::size_t>(i)];
  return out;
}

}  // namespace dualcast
