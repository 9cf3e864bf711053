#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace wildfire {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
};

double dot(Vec2 a, Vec2 b);
double norm(Vec2 a);
double distance(Vec2 a, Vec2 b);

class GridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Uniform cell-centered grid. Cell (i, j) has its center at
/// origin + (i*h, j*h); i runs along x, j along y.
struct GridSpec {
  int nx = 0;
  int ny = 0;
  double h = 0.0;
  Vec2 origin;

  /// Square domain [-side/2, side/2]^2 covered by side/h cells per axis.
  static GridSpec square(double side, double h);

  void validate() const;
  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i);
  }
  Vec2 center(int i, int j) const { return {origin.x + i * h, origin.y + j * h}; }
  double cell_area() const { return h * h; }

  Vec2 lower() const { return {origin.x - 0.5 * h, origin.y - 0.5 * h}; }
  Vec2 upper() const { return {origin.x + (nx - 0.5) * h, origin.y + (ny - 0.5) * h}; }
  bool contains(Vec2 p) const;
  Vec2 clamp(Vec2 p) const;
  /// Index of the cell containing p (p must be inside the covered rectangle).
  std::array<int, 2> cell_of(Vec2 p) const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const GridSpec& spec, double fill = 0.0);

  const GridSpec& spec() const { return spec_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(int i, int j) { return values_[spec_.index(i, j)]; }
  double operator()(int i, int j) const { return values_[spec_.index(i, j)]; }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(double s);
  /// this += s * o
  ScalarField& axpy(double s, const ScalarField& o);

  double max() const;
  double min() const;
  bool all_finite() const;

 private:
  GridSpec spec_;
  std::vector<double> values_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double s, ScalarField a);

class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(const GridSpec& spec, Vec2 fill = {});

  const GridSpec& spec() const { return spec_; }
  Vec2& operator()(int i, int j) { return values_[spec_.index(i, j)]; }
  Vec2 operator()(int i, int j) const { return values_[spec_.index(i, j)]; }
  double max_norm() const;

 private:
  GridSpec spec_;
  std::vector<Vec2> values_;
};

/// Per-cell boolean region (deployment band, unsafe set, ...).
class CellMask {
 public:
  CellMask() = default;
  explicit CellMask(const GridSpec& spec, bool fill = false);

  const GridSpec& spec() const { return spec_; }
  bool operator()(int i, int j) const { return cells_[spec_.index(i, j)] != 0; }
  bool operator[](std::size_t k) const { return cells_[k] != 0; }
  void set(int i, int j, bool v) { cells_[spec_.index(i, j)] = v ? 1 : 0; }
  void set(std::size_t k, bool v) { cells_[k] = v ? 1 : 0; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }

  friend bool operator==(const CellMask&, const CellMask&) = default;

 private:
  GridSpec spec_;
  std::vector<unsigned char> cells_;
};

// Finite-difference primitives. Boundary handling is zero-flux everywhere:
// ghost cells mirror their interior neighbour.

/// 5-point Laplacian with reflected ghost values.
ScalarField laplacian(const ScalarField& f);

/// v . grad f by first-order upwinding per component.
ScalarField advect_upwind(const ScalarField& f, const VectorField& v);

/// Central-flux divergence operators for a constant unit velocity:
/// div(e_x f) and div(e_y f), with zero flux through the domain boundary.
/// They are exactly linear in the velocity and telescope to zero total mass.
ScalarField flux_divergence_x(const ScalarField& f);
ScalarField flux_divergence_y(const ScalarField& f);

/// Midpoint-rule integral over the domain.
double integrate(const ScalarField& f);
/// Integral restricted to a mask.
double integrate(const ScalarField& f, const CellMask& mask);
/// Integral of a pointwise product (optionally masked).
double inner(const ScalarField& a, const ScalarField& b);
double inner(const ScalarField& a, const ScalarField& b, const CellMask& mask);

/// Convolution with the unnormalized kernel exp(-|r|^2 / (2 sigma^2)) using
/// h^2 quadrature weights; values outside the domain are zero. The kernel
/// is separable, so it is applied as two 1D passes truncated at
/// kConvolutionRadius * sigma.
ScalarField convolve(const ScalarField& f, double kernel_sigma);
inline constexpr double kConvolutionRadius = 6.0;

/// Cells whose centers lie within `radius` of some center of a masked cell.
CellMask dilate(const CellMask& mask, double radius);

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what);

}  // namespace wildfire
