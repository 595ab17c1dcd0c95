#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace s2no {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using SpMatX = Eigen::SparseMatrix<S>;

/// Error type for contract violations (bad inputs, non-convergence, format errors).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

template <class... Ts>
[[noreturn]] inline void fail(const Ts&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  throw Error(os.str());
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(msg);
}

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 gives a portable bit stream; the helpers below
// avoid std::uniform_* distributions whose outputs differ across standard
// libraries.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Derive a stream seed from a base seed and an index, used so that per-sample
/// work is reproducible independently of iteration order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t s = base;
  (void)splitmix64(s);
  s ^= 0x51'7c'c1'b7'27'22'0a'95ull * (index + 1);
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Unbiased integer in [0, bound) via rejection sampling.
  std::uint64_t uniform_below(std::uint64_t bound) {
    if (bound == 0) fail("Rng::uniform_below: bound must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  /// Uniform double in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  /// In-place Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// FNV-1a hashing, used for config hashes and dataset sample identity.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Little-endian binary IO helpers (x86-64 host; writes are raw).
// ---------------------------------------------------------------------------

template <class T>
void write_pod(std::ostream& os, const T& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
  static_assert(std::is_trivially_copyable_v<T>);
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) fail("binary read failed (truncated file?)");
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const auto len = read_pod<std::uint32_t>(is);
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (!is) fail("binary read failed (truncated string)");
  return s;
}

inline void write_magic(std::ostream& os, const char* magic) {
  os.write(magic, static_cast<std::streamsize>(std::strlen(magic)));
}

inline void expect_magic(std::istream& is, const char* magic) {
  const std::size_t len = std::strlen(magic);
  std::string buf(len, '\0');
  is.read(buf.data(), static_cast<std::streamsize>(len));
  if (!is || buf != magic) fail("bad magic: expected '", magic, "'");
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("cannot open '", path, "' for writing");
  return os;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("cannot open '", path, "' for reading");
  return is;
}

inline std::string tool_version() { return "s2no 0.1.0"; }

}  // namespace s2no
