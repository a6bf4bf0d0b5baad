// Shared plumbing: error types, deterministic RNG, logging, hashing.
#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chunkforge {

// ----------------------------- errors -----------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error { public: using Error::Error; };
class DomainError : public Error { public: using Error::Error; };
class IndexError : public Error { public: using Error::Error; };
class StateError : public Error { public: using Error::Error; };
class ParseError : public Error { public: using Error::Error; };
class TilingError : public Error { public: using Error::Error; };
class AlignmentError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class CheckpointError : public Error { public: using Error::Error; };

// ----------------------------- rng -----------------------------

// Deterministic RNG with explicit double construction so that streams are
// bitwise reproducible across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Modulo bias is irrelevant at the sizes used
  // here; determinism is what matters.
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(next_u64() % static_cast<std::uint64_t>(n));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates, explicit so the permutation is library-independent.
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// ----------------------------- logging -----------------------------

enum class LogLevel { debug = 0, info = 1, warn = 2 };

inline LogLevel log_threshold() {
  static LogLevel level = [] {
    const char* env = std::getenv("CHUNKFORGE_LOG");
    if (env == nullptr) return LogLevel::info;
    std::string_view v(env);
    if (v == "debug") return LogLevel::debug;
    if (v == "warn") return LogLevel::warn;
    return LogLevel::info;
  }();
  return level;
}

inline void log_msg(LogLevel level, const std::string& msg) {
  if (level < log_threshold()) return;
  const char* tag = level == LogLevel::debug ? "debug"
                    : level == LogLevel::info ? "info"
                                              : "warn";
  std::cerr << "[" << tag << "] " << msg << "\n";
}

inline void log_debug(const std::string& msg) { log_msg(LogLevel::debug, msg); }
inline void log_info(const std::string& msg) { log_msg(LogLevel::info, msg); }
inline void log_warn(const std::string& msg) { log_msg(LogLevel::warn, msg); }

// ----------------------------- formatting -----------------------------

// Shortest round-trip-safe decimal rendering of a double.
inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string format_fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
  return buf;
}

// ----------------------------- hashing -----------------------------

// FNV-1a, used for vocabulary fingerprints in checkpoints.
inline std::uint64_t fnv1a(std::string_view s,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace chunkforge
