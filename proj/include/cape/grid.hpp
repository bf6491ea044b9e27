#pragma once

// Dense 2D/3D grids and the raster operations shared by the loss, the
// metrics and the synthetic generator.
//
// Every grid is stored as a (depth, rows, cols) volume in row-major order;
// a 2D grid is a volume of depth 1. Coordinates are therefore always
// (z, y, x) internally, with z == 0 for 2D data.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace cape {

struct GridIndex {
  std::int64_t z = 0;
  std::int64_t y = 0;
  std::int64_t x = 0;

  auto operator<=>(const GridIndex&) const = default;
};

/// Real-valued position in pixel units.
struct Point {
  double z = 0.0;
  double y = 0.0;
  double x = 0.0;

  bool operator==(const Point&) const = default;
};

double distance(const Point& a, const Point& b);
std::string to_string(const GridIndex& idx);

/// Nearest integer with halves rounded toward negative infinity.
std::int64_t round_half_down(double v);
GridIndex round_point(const Point& p);

class Shape {
 public:
  Shape() = default;
  /// Extents slowest-first: {rows, cols} or {depth, rows, cols}.
  explicit Shape(std::span<const std::size_t> extents);
  Shape(std::initializer_list<std::size_t> extents);

  int ndim() const { return ndim_; }
  std::size_t depth() const { return dims_[0]; }
  std::size_t rows() const { return dims_[1]; }
  std::size_t cols() const { return dims_[2]; }
  std::size_t size() const { return dims_[0] * dims_[1] * dims_[2]; }
  /// Extents as they were given (2 or 3 entries).
  std::vector<std::size_t> extents() const;

  bool contains(const GridIndex& idx) const {
    return idx.z >= 0 && idx.y >= 0 && idx.x >= 0 &&
           idx.z < static_cast<std::int64_t>(dims_[0]) &&
           idx.y < static_cast<std::int64_t>(dims_[1]) &&
           idx.x < static_cast<std::int64_t>(dims_[2]);
  }
  bool contains(const Point& p) const;

  std::size_t linear(const GridIndex& idx) const {
    return (static_cast<std::size_t>(idx.z) * dims_[1] + static_cast<std::size_t>(idx.y)) * dims_[2] +
           static_cast<std::size_t>(idx.x);
  }
  GridIndex unravel(std::size_t lin) const {
    const auto x = lin % dims_[2];
    lin /= dims_[2];
    return {static_cast<std::int64_t>(lin / dims_[1]), static_cast<std::int64_t>(lin % dims_[1]),
            static_cast<std::int64_t>(x)};
  }

  bool operator==(const Shape&) const = default;

 private:
  std::array<std::size_t, 3> dims_{1, 0, 0};
  int ndim_ = 0;
};

std::string to_string(const Shape& shape);

/// Offsets of the 8 (2D) or 26 (3D) Chebyshev neighbours.
std::span<const GridIndex> neighbour_offsets(int ndim);

class ScalarGrid {
 public:
  ScalarGrid() = default;
  explicit ScalarGrid(Shape shape, float fill = 0.0f);
  ScalarGrid(Shape shape, std::vector<float> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  float operator[](std::size_t lin) const { return data_[lin]; }
  float& operator[](std::size_t lin) { return data_[lin]; }
  float at(const GridIndex& idx) const { return data_[shape_.linear(idx)]; }
  float& at(const GridIndex& idx) { return data_[shape_.linear(idx)]; }

  std::span<const float> values() const { return data_; }
  std::span<float> values() { return data_; }

  bool operator==(const ScalarGrid&) const = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Throws unless every value is finite and non-negative.
void require_distance_map(const ScalarGrid& grid, const char* what);

class BinaryMask {
 public:
  BinaryMask() = default;
  explicit BinaryMask(Shape shape, bool fill = false);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return bits_.size(); }

  bool operator[](std::size_t lin) const { return bits_[lin] != 0; }
  bool test(const GridIndex& idx) const { return bits_[shape_.linear(idx)] != 0; }
  void set(std::size_t lin, bool v = true) { bits_[lin] = v ? 1 : 0; }
  void set(const GridIndex& idx, bool v = true) { set(shape_.linear(idx), v); }

  std::size_t count() const;
  std::vector<std::size_t> foreground() const;

  bool operator==(const BinaryMask&) const = default;

 private:
  Shape shape_;
  std::vector<std::uint8_t> bits_;
};

inline constexpr double kDefaultDistanceCap = 20.0;
inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// Exact squared Euclidean distance to the nearest foreground cell, computed
/// with the separable lower-envelope transform. Cells in a grid without any
/// foreground get +inf.
std::vector<double> squared_distance_transform(const BinaryMask& mask);

/// min(EDT, d_max). Throws empty_foreground on an all-background mask.
ScalarGrid distance_transform(const BinaryMask& mask, double d_max = kDefaultDistanceCap);

/// Euclidean-ball dilation: a cell is set iff its distance to the input
/// foreground is <= radius.
BinaryMask dilate(const BinaryMask& mask, double radius);

/// Integer line stepping through the rounded vertices; 8-connected in 2D,
/// 26-connected in 3D.
BinaryMask rasterize_polyline(std::span<const Point> points, const Shape& shape);

/// Appends the cells of the digital segment a->b (both ends included) to out.
void append_line_cells(const GridIndex& a, const GridIndex& b, std::vector<GridIndex>& out);

BinaryMask threshold_below(const ScalarGrid& grid, float threshold);

}  // namespace cape
