#pragma once

#include <algorithm>
#include <atomic>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace strata {

using cplx = std::complex<double>;
using Index = std::ptrdiff_t;

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class GridError : public Error {
 public:
  using Error::Error;
};

class SpectralError : public Error {
 public:
  using Error::Error;
};

/// A harmonic system became (numerically) singular: the shift hit an eigenvalue.
class ResonanceError : public Error {
 public:
  ResonanceError(const std::string& what, Index l, Index m)
      : Error(what + " (harmonic l=" + std::to_string(l) + ", m=" + std::to_string(m) + ")"),
        l_(l),
        m_(m) {}
  Index l() const noexcept { return l_; }
  Index m() const noexcept { return m_; }

 private:
  Index l_;
  Index m_;
};

class OracleCapError : public Error {
 public:
  using Error::Error;
};

/// Operation counter for the cost model. Counts are integers so the totals do
/// not depend on the order in which workers add to them.
class OpCounter {
 public:
  void add(std::uint64_t n) noexcept { count_.fetch_add(n, std::memory_order_relaxed); }
  std::uint64_t value() const noexcept { return count_.load(std::memory_order_relaxed); }
  void reset() noexcept { count_.store(0, std::memory_order_relaxed); }

 private:
  std::atomic<std::uint64_t> count_{0};
};

inline void count_ops(OpCounter* c, std::uint64_t n) {
  if (c != nullptr) c->add(n);
}

/// Static-chunked parallel loop over [0, n). Each index is handled by exactly
/// one worker, so results are independent of the worker count.
template <class F>
void parallel_for(Index n, int threads, F&& body) {
  if (n <= 0) return;
  const int workers = static_cast<int>(std::max<Index>(1, std::min<Index>(threads, n)));
  if (workers == 1) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (Index i = w; i < n; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline int default_threads() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace strata
