#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace psg {

inline constexpr const char* kVersion = "1.0.0";

using NodeId = std::uint32_t;

/// Unordered node pair, stored with u <= v.
struct EdgePair {
  NodeId u{0};
  NodeId v{0};

  EdgePair() = default;
  EdgePair(NodeId a, NodeId b) : u(a < b ? a : b), v(a < b ? b : a) {}

  bool operator==(const EdgePair& o) const { return u == o.u && v == o.v; }
  bool operator<(const EdgePair& o) const {
    return u != o.u ? u < o.u : v < o.v;
  }
};

struct EdgePairHash {
  std::size_t operator()(const EdgePair& e) const {
    std::uint64_t x = (std::uint64_t(e.u) << 32) | e.v;
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return std::size_t(x ^ (x >> 31));
  }
};

// Error classes. The CLI maps each to a one-line "error: [<class>] ..."
// message; the class tag is machine-parseable.
class Error : public std::runtime_error {
 public:
  Error(std::string cls, const std::string& msg)
      : std::runtime_error(msg), cls_(std::move(cls)) {}
  const std::string& error_class() const { return cls_; }

 private:
  std::string cls_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error("parse", msg) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error("validate", msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error("io", msg) {}
};

class TrainAbortError : public Error {
 public:
  explicit TrainAbortError(const std::string& msg) : Error("train", msg) {}
};

/// Chunked parallel loop. Each index writes only its own output slot, so
/// results are identical for any worker count. workers <= 1 runs inline.
inline void parallel_for(std::size_t n, int workers,
                         const std::function<void(std::size_t)>& body) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::size_t nthreads = std::min<std::size_t>(std::size_t(workers), n);
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  std::size_t chunk = (n + nthreads - 1) / nthreads;
  for (std::size_t t = 0; t < nthreads; ++t) {
    std::size_t lo = t * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace psg
