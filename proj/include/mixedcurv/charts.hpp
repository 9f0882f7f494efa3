#pragma once

// Ready-made charts: Euclidean space, spheres in hyperspherical coordinates,
// hyperbolic space in horospherical coordinates, Riemannian products and
// metrics given entrywise by expressions.

#include "mixedcurv/expression.hpp"
#include "mixedcurv/geomcore.hpp"

#include <memory>
#include <numbers>

namespace mixedcurv::charts {

inline std::vector<std::string> default_names(const std::string& stem, int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back(stem + std::to_string(i + 1));
  return v;
}

inline ChartManifold euclidean(int n, std::vector<std::string> names = {}) {
  ChartManifold m;
  m.dim = n;
  m.domain.assign(n, Interval{});
  m.metric = [n](const Vector&) -> Matrix { return Matrix::Identity(n, n); };
  m.label = "R^" + std::to_string(n);
  m.coord_names = names.empty() ? default_names("x", n) : std::move(names);
  m.constant_curvature = 0.0;
  return m;
}

/// Round sphere of curvature c > 0: g = r²(dψ1² + sin²ψ1 dψ2² + sin²ψ1 sin²ψ2 dψ3² + …), r = 1/√c.
inline ChartManifold sphere(int n, double c = 1.0, std::vector<std::string> names = {}) {
  ChartManifold m;
  m.dim = n;
  const double r2 = 1.0 / c;
  for (int i = 0; i < n; ++i) {
    if (i + 1 < n) m.domain.push_back({0.0, std::numbers::pi, false});
    else m.domain.push_back({-std::numbers::pi, std::numbers::pi, true});
  }
  m.metric = [n, r2](const Vector& x) -> Matrix {
    Matrix g = Matrix::Zero(n, n);
    double w = r2;
    for (int i = 0; i < n; ++i) {
      g(i, i) = w;
      const double s = std::sin(x[i]);
      w *= s * s;
    }
    return g;
  };
  m.label = "S^" + std::to_string(n) + (c == 1.0 ? "" : "(c=" + expr::format_number(c) + ")");
  m.coord_names = names.empty() ? default_names("psi", n) : std::move(names);
  m.constant_curvature = c;
  return m;
}

/// Hyperbolic space of curvature c < 0: g = dt² + e^{2√(−c) t} Σ dy_i² (scaled by 1/(−c)).
inline ChartManifold hyperbolic(int n, double c = -1.0, std::vector<std::string> names = {}) {
  ChartManifold m;
  m.dim = n;
  m.domain.assign(n, Interval{});
  const double k = std::sqrt(-c);
  m.metric = [n, k](const Vector& x) -> Matrix {
    Matrix g = Matrix::Identity(n, n);
    const double w = std::exp(2.0 * k * x[0]);
    for (int i = 1; i < n; ++i) g(i, i) = w;
    return g;
  };
  m.label = "H^" + std::to_string(n) + (c == -1.0 ? "" : "(c=" + expr::format_number(c) + ")");
  if (names.empty()) {
    names.push_back("t");
    for (int i = 1; i < n; ++i) names.push_back("y" + std::to_string(i));
  }
  m.coord_names = std::move(names);
  m.constant_curvature = c;
  return m;
}

inline ChartManifold space_form(int n, double c, std::vector<std::string> names = {}) {
  if (c > 0) return sphere(n, c, std::move(names));
  if (c < 0) return hyperbolic(n, c, std::move(names));
  return euclidean(n, std::move(names));
}

/// Riemannian product, coordinates concatenated.
inline ChartManifold product(const std::vector<ChartManifold>& factors) {
  ChartManifold m;
  std::vector<int> offset;
  for (const auto& f : factors) {
    offset.push_back(m.dim);
    m.dim += f.dim;
    m.domain.insert(m.domain.end(), f.domain.begin(), f.domain.end());
    for (int i = 0; i < f.dim; ++i) m.coord_names.push_back(f.coord_name(i));
    m.label += (m.label.empty() ? "" : "x") + f.label;
  }
  const int n = m.dim;
  m.metric = [factors, offset, n](const Vector& x) -> Matrix {
    Matrix g = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < factors.size(); ++i) {
      const int d = factors[i].dim;
      g.block(offset[i], offset[i], d, d) = factors[i].metric(x.segment(offset[i], d));
    }
    return g;
  };
  if (factors.size() == 1) m.constant_curvature = factors[0].constant_curvature;
  return m;
}

/// Metric given entrywise by expressions in the coordinate names; only the upper
/// triangle of `entries` is read.
inline ChartManifold from_expressions(std::vector<std::string> names, const std::vector<std::vector<std::string>>& entries,
                                      std::vector<Interval> domain = {}, std::string label = "metric") {
  const int n = static_cast<int>(names.size());
  if (static_cast<int>(entries.size()) != n)
    throw Error(ErrorKind::DimensionMismatch, "metric needs " + std::to_string(n) + " rows");
  auto programs = std::make_shared<std::vector<expr::Program>>();
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(entries[i].size()) != n)
      throw Error(ErrorKind::DimensionMismatch, "metric row " + std::to_string(i) + " has wrong length");
    for (int j = 0; j < n; ++j) {
      const int a = std::min(i, j), b = std::max(i, j);
      programs->push_back(WarpExpression(entries[a][b]).compile(names));
    }
  }
  ChartManifold m;
  m.dim = n;
  m.domain = domain.empty() ? std::vector<Interval>(n) : std::move(domain);
  m.coord_names = std::move(names);
  m.label = std::move(label);
  m.metric = [programs, n](const Vector& x) -> Matrix {
    Matrix g(n, n);
    const std::span<const double> v(x.data(), static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = (*programs)[i * n + j](v);
    return g;
  };
  return m;
}

}  // namespace mixedcurv::charts
