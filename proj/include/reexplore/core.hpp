#pragma once

// Shared value types: grid cells, boolean cell masks, angle helpers and the
// exception family used across the library.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace reexplore {

/// Integer grid coordinate. x is the column, y the row (row 0 at the top).
struct Cell {
  int x{0};
  int y{0};

  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Row-major ordering, (y, x) lexicographic. Used for every deterministic
/// tie-break in the library.
struct CellOrder {
  bool operator()(const Cell& a, const Cell& b) const {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  }
};

inline bool cell_less(const Cell& a, const Cell& b) { return CellOrder{}(a, b); }

inline int manhattan(const Cell& a, const Cell& b) {
  return std::abs(a.x - b.x) + std::abs(a.y - b.y);
}

inline double euclidean(const Cell& a, const Cell& b) {
  return std::hypot(double(a.x - b.x), double(a.y - b.y));
}

inline int chebyshev(const Cell& a, const Cell& b) {
  return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
}

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, kTwoPi);  // [-pi, pi]
  if (r <= -kPi) r += kTwoPi;
  return r;
}

inline double angular_distance(double a, double b) { return std::abs(wrap_angle(a - b)); }

/// Bearing of `to` seen from `from`, in grid coordinates.
inline double bearing(const Cell& from, const Cell& to) {
  return std::atan2(double(to.y - from.y), double(to.x - from.x));
}

inline double deg(double rad) { return rad * 180.0 / kPi; }
inline double rad(double degrees) { return degrees * kPi / 180.0; }

// ---------------------------------------------------------------------------
// Errors

enum class ErrorCode {
  kParse,
  kNonRectangular,
  kLabelOnWall,
  kEmptyMap,
  kUnknownCharacter,
  kOutOfBounds,
  kUnreachable,
  kShapeMismatch,
  kAgentNotFree,
  kInvalidArgument,
  kZeroResultant,
  kEmptyFrontierSet,
  kEmptyHierarchy,
  kInvalidIndex,
  kNoDecision,
  kNoLabeledTarget,
  kMalformedReflection,
  kUnparseableJudge,
  kDuplicateId,
  kMalformedLibrary,
  kDimensionMismatch,
  kClient,
  kUndefined,
  kConfig,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by text-generation / embedding backends.
class ClientError : public Error {
 public:
  explicit ClientError(const std::string& what) : Error(ErrorCode::kClient, what) {}
};

// ---------------------------------------------------------------------------

/// Dense boolean layer over a width x height grid.
class CellMask {
 public:
  CellMask() = default;
  CellMask(int width, int height) : width_(width), height_(height), bits_(std::size_t(width) * height, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }

  bool in_bounds(const Cell& c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }

  bool test(const Cell& c) const { return in_bounds(c) && bits_[index(c)] != 0; }
  void set(const Cell& c, bool v = true) { bits_.at(index(c)) = v ? 1 : 0; }

  std::size_t count() const { return std::size_t(std::count(bits_.begin(), bits_.end(), 1)); }

  /// Set cells in row-major order.
  std::vector<Cell> cells() const {
    std::vector<Cell> out;
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x)
        if (bits_[index({x, y})]) out.push_back({x, y});
    return out;
  }

  bool same_shape(const CellMask& o) const { return width_ == o.width_ && height_ == o.height_; }

  friend bool operator==(const CellMask&, const CellMask&) = default;

 private:
  std::size_t index(const Cell& c) const { return std::size_t(c.y) * width_ + c.x; }

  int width_{0};
  int height_{0};
  std::vector<std::uint8_t> bits_;
};

inline constexpr Cell kNeighbors4[4] = {{0, -1}, {-1, 0}, {1, 0}, {0, 1}};  // (y,x) order


/// Seeded generator. Wraps std::mt19937_64 with bounded draws that do not
/// depend on the standard library's distribution implementations, so maps and
/// clusterings are identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw Error(ErrorCode::kInvalidArgument, "Rng::below(0)");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do v = engine_(); while (v >= limit);
    return v % n;
  }

  int between(int lo, int hi) { return lo + int(below(std::uint64_t(hi - lo + 1))); }

  /// Uniform double in [0, 1).
  double unit() { return double(engine_() >> 11) * 0x1.0p-53; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace reexplore
