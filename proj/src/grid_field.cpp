#include "wildfire/grid_field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wildfire {

double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }
double distance(Vec2 a, Vec2 b) { return norm(a - b); }

GridSpec GridSpec::square(double side, double h) {
  if (!(side > 0.0) || !(h > 0.0)) throw GridError("grid side and spacing must be positive");
  const int n = static_cast<int>(std::lround(side / h));
  GridSpec g{n, n, h, {-0.5 * side + 0.5 * h, -0.5 * side + 0.5 * h}};
  g.validate();
  return g;
}

void GridSpec::validate() const {
  if (nx < 3 || ny < 3) throw GridError("grid needs at least 3 cells per axis");
  if (!(h > 0.0) || !std::isfinite(h)) throw GridError("grid spacing must be positive");
  if (!std::isfinite(origin.x) || !std::isfinite(origin.y)) throw GridError("grid origin must be finite");
}

bool GridSpec::contains(Vec2 p) const {
  const Vec2 lo = lower(), hi = upper();
  return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
}

Vec2 GridSpec::clamp(Vec2 p) const {
  const Vec2 lo = lower(), hi = upper();
  return {std::clamp(p.x, lo.x, hi.x), std::clamp(p.y, lo.y, hi.y)};
}

std::array<int, 2> GridSpec::cell_of(Vec2 p) const {
  int i = static_cast<int>(std::floor((p.x - origin.x) / h + 0.5));
  int j = static_cast<int>(std::floor((p.y - origin.y) / h + 0.5));
  return {std::clamp(i, 0, nx - 1), std::clamp(j, 0, ny - 1)};
}

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) throw GridError(std::string("grid mismatch in ") + what);
}

ScalarField::ScalarField(const GridSpec& spec, double fill) : spec_(spec), values_(spec.size(), fill) {}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  require_same_grid(spec_, o.spec_, "ScalarField::operator+=");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
  require_same_grid(spec_, o.spec_, "ScalarField::operator-=");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
  return *this;
}

ScalarField& ScalarField::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

ScalarField& ScalarField::axpy(double s, const ScalarField& o) {
  require_same_grid(spec_, o.spec_, "ScalarField::axpy");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += s * o.values_[k];
  return *this;
}

double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }
double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }

bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double s, ScalarField a) { return a *= s; }

VectorField::VectorField(const GridSpec& spec, Vec2 fill) : spec_(spec), values_(spec.size(), fill) {}

double VectorField::max_norm() const {
  double m = 0.0;
  for (const Vec2& v : values_) m = std::max(m, norm(v));
  return m;
}

CellMask::CellMask(const GridSpec& spec, bool fill) : spec_(spec), cells_(spec.size(), fill ? 1 : 0) {}

std::size_t CellMask::count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), static_cast<unsigned char>(1)));
}

namespace {

// Reflected ghost: index -1 maps to 0 and n maps to n-1.
int reflect(int k, int n) { return k < 0 ? 0 : (k >= n ? n - 1 : k); }

}  // namespace

ScalarField laplacian(const ScalarField& f) {
  const GridSpec& g = f.spec();
  ScalarField out(g);
  const double inv_h2 = 1.0 / (g.h * g.h);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double c = f(i, j);
      const double sum = f(reflect(i + 1, g.nx), j) + f(reflect(i - 1, g.nx), j) + f(i, reflect(j + 1, g.ny)) +
                         f(i, reflect(j - 1, g.ny));
      out(i, j) = (sum - 4.0 * c) * inv_h2;
    }
  }
  return out;
}

ScalarField advect_upwind(const ScalarField& f, const VectorField& v) {
  const GridSpec& g = f.spec();
  require_same_grid(g, v.spec(), "advect_upwind");
  ScalarField out(g);
  const double inv_h = 1.0 / g.h;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const Vec2 vel = v(i, j);
      const double c = f(i, j);
      const double dx = vel.x >= 0.0 ? c - f(reflect(i - 1, g.nx), j) : f(reflect(i + 1, g.nx), j) - c;
      const double dy = vel.y >= 0.0 ? c - f(i, reflect(j - 1, g.ny)) : f(i, reflect(j + 1, g.ny)) - c;
      out(i, j) = (vel.x * dx + vel.y * dy) * inv_h;
    }
  }
  return out;
}

ScalarField flux_divergence_x(const ScalarField& f) {
  const GridSpec& g = f.spec();
  ScalarField out(g);
  const double inv_2h = 0.5 / g.h;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double right = i + 1 < g.nx ? f(i, j) + f(i + 1, j) : 0.0;
      const double left = i > 0 ? f(i - 1, j) + f(i, j) : 0.0;
      out(i, j) = (right - left) * inv_2h;
    }
  }
  return out;
}

ScalarField flux_divergence_y(const ScalarField& f) {
  const GridSpec& g = f.spec();
  ScalarField out(g);
  const double inv_2h = 0.5 / g.h;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double up = j + 1 < g.ny ? f(i, j) + f(i, j + 1) : 0.0;
      const double down = j > 0 ? f(i, j - 1) + f(i, j) : 0.0;
      out(i, j) = (up - down) * inv_2h;
    }
  }
  return out;
}

double integrate(const ScalarField& f) {
  double sum = 0.0;
  for (double v : f.values()) sum += v;
  return sum * f.spec().cell_area();
}

double integrate(const ScalarField& f, const CellMask& mask) {
  require_same_grid(f.spec(), mask.spec(), "integrate");
  double sum = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k)
    if (mask[k]) sum += f[k];
  return sum * f.spec().cell_area();
}

double inner(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.spec(), b.spec(), "inner");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += a[k] * b[k];
  return sum * a.spec().cell_area();
}

double inner(const ScalarField& a, const ScalarField& b, const CellMask& mask) {
  require_same_grid(a.spec(), b.spec(), "inner");
  require_same_grid(a.spec(), mask.spec(), "inner");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (mask[k]) sum += a[k] * b[k];
  return sum * a.spec().cell_area();
}

ScalarField convolve(const ScalarField& f, double kernel_sigma) {
  if (!(kernel_sigma > 0.0)) throw GridError("convolution kernel sigma must be positive");
  const GridSpec& g = f.spec();
  const int radius = static_cast<int>(std::ceil(kConvolutionRadius * kernel_sigma / g.h));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  for (int k = -radius; k <= radius; ++k) {
    const double d = k * g.h;
    taps[static_cast<std::size_t>(k + radius)] = std::exp(-d * d / (2.0 * kernel_sigma * kernel_sigma));
  }

  // Pass 1 along x, pass 2 along y; the h^2 weight is split evenly.
  ScalarField tmp(g);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int lo = std::max(-radius, -i), hi = std::min(radius, g.nx - 1 - i);
      double acc = 0.0;
      for (int k = lo; k <= hi; ++k) acc += taps[static_cast<std::size_t>(k + radius)] * f(i + k, j);
      tmp(i, j) = acc * g.h;
    }
  }
  ScalarField out(g);
  for (int j = 0; j < g.ny; ++j) {
    const int lo = std::max(-radius, -j), hi = std::min(radius, g.ny - 1 - j);
    for (int i = 0; i < g.nx; ++i) {
      double acc = 0.0;
      for (int k = lo; k <= hi; ++k) acc += taps[static_cast<std::size_t>(k + radius)] * tmp(i, j + k);
      out(i, j) = acc * g.h;
    }
  }
  return out;
}

CellMask dilate(const CellMask& mask, double radius) {
  const GridSpec& g = mask.spec();
  if (radius <= 0.0) return mask;
  const int reach = static_cast<int>(std::floor(radius / g.h + 1e-9));
  const double r2 = (radius / g.h) * (radius / g.h) + 1e-9;
  CellMask out(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!mask(i, j)) continue;
      for (int dj = -reach; dj <= reach; ++dj)
        for (int di = -reach; di <= reach; ++di) {
          const int a = i + di, b = j + dj;
          if (a < 0 || b < 0 || a >= g.nx || b >= g.ny || di * di + dj * dj > r2) continue;
          out.set(a, b, true);
        }
    }
  return out;
}

}  // namespace wildfire
