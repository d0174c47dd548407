#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lanegraph {

// ---------------------------------------------------------------------------
// Small geometry types
// ---------------------------------------------------------------------------

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }

struct Cell {
  int i = 0;  // row
  int j = 0;  // column
  friend bool operator==(const Cell&, const Cell&) = default;
};

inline bool cell_less(const Cell& a, const Cell& b) {
  return a.i != b.i ? a.i < b.i : a.j < b.j;
}

// Chebyshev distance; adjacent 8-neighbors are at distance 1.
inline int cheb_dist(const Cell& a, const Cell& b) {
  return std::max(std::abs(a.i - b.i), std::abs(a.j - b.j));
}

// ---------------------------------------------------------------------------
// Angles. Stored in radians in [0, 2pi); operations normalize on entry.
// ---------------------------------------------------------------------------

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

inline double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return a;
}

// Absolute circular difference in [0, pi].
inline double angle_diff(double a, double b) {
  double d = std::fabs(wrap_angle(a) - wrap_angle(b));
  return d > kTwoPi - d ? kTwoPi - d : d;
}

// Direction of a grid move, treating columns as x and rows as y.
inline double cell_direction(const Cell& from, const Cell& to) {
  return wrap_angle(std::atan2(double(to.i - from.i), double(to.j - from.j)));
}

// ---------------------------------------------------------------------------
// GridMap: dense H x W x C float grid, channel-major then row then column.
// All values 64-bit in memory; the on-disk format is 32-bit (see tensor io).
// ---------------------------------------------------------------------------

struct GridMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  static GridMap zeros(int channels, int height, int width) {
    GridMap m;
    m.channels = channels;
    m.height = height;
    m.width = width;
    m.data.assign(static_cast<std::size_t>(channels) * height * width, 0.0);
    return m;
  }

  std::size_t index(int c, int i, int j) const {
    return (static_cast<std::size_t>(c) * height + i) * width + j;
  }
  double& at(int c, int i, int j) { return data[index(c, i, j)]; }
  double at(int c, int i, int j) const { return data[index(c, i, j)]; }

  bool in_bounds(int i, int j) const {
    return i >= 0 && j >= 0 && i < height && j < width;
  }
  bool square() const { return height == width; }
};

// ---------------------------------------------------------------------------
// GridSpec: placement of a square grid in world coordinates.
// origin is the world coordinate of the corner of cell (0,0).
// ---------------------------------------------------------------------------

struct GridSpec {
  int cells_per_side = 0;
  double meters_per_cell = 0.0;
  Vec2 origin;

  Vec2 cell_center(int i, int j) const {
    return {origin.x + (j + 0.5) * meters_per_cell,
            origin.y + (i + 0.5) * meters_per_cell};
  }
  Cell cell_of(Vec2 p) const {
    return {static_cast<int>(std::floor((p.y - origin.y) / meters_per_cell)),
            static_cast<int>(std::floor((p.x - origin.x) / meters_per_cell))};
  }
  bool in_bounds(const Cell& c) const {
    return c.i >= 0 && c.j >= 0 && c.i < cells_per_side && c.j < cells_per_side;
  }
  double extent() const { return cells_per_side * meters_per_cell; }
};

// Input grids: 256 cells at 0.25 m/cell. Label/affordance grids: 128 cells at
// exactly twice the cell size, covering the same 64 m extent.
inline GridSpec input_grid_spec() { return {256, 0.25, {0.0, 0.0}}; }
inline GridSpec label_grid_spec() { return {128, 0.5, {0.0, 0.0}}; }

// ---------------------------------------------------------------------------
// Tensor file format "LGT1": 4 magic bytes, little-endian u32 triple
// (channels, height, width), then the data as little-endian 32-bit floats in
// stored order. Bit-exact across platforms.
// ---------------------------------------------------------------------------

void write_tensor(const GridMap& map, const std::string& path);
GridMap read_tensor(const std::string& path);

// PPM (P6) export of one channel, grayscale triplicated to RGB. Values are
// clamped to [0,1] before quantization.
void write_ppm(const GridMap& map, int channel, const std::string& path);

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 has a bit-exact standardized sequence; the
// helpers below avoid std distributions, whose output is
// implementation-defined.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    // splitmix64; passes through the whole 64-bit state each call.
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double real01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * real01(); }

  // Inclusive integer range.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(real01() * double(hi - lo + 1));
  }

  // Standard normal via Box-Muller; one pair per two calls.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = real01();
    double u2 = real01();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace lanegraph
