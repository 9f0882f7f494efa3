#pragma once

// Chart-level tensor calculus: metric jets by finite differences, Levi-Civita
// coefficients, the curvature tensor and its traces, divergence, gradient and
// Laplacian.
//
// Conventions (fixed throughout the library):
//   R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z
//   R_abcd  = g(R(∂_c,∂_d)∂_b, ∂_a),   so  K(X,Y) = R(X,Y,X,Y) / |X∧Y|²  > 0 on spheres
//   Ric_bd  = R^a_bad,                tau = g^bd Ric_bd  (full trace, not half)
//   Δu      = −div(grad u)            (geometer's sign: Δ(sin t) = sin t on the line)

#include "mixedcurv/errors.hpp"
#include "mixedcurv/linalg.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace mixedcurv {

struct Interval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  /// Periodic coordinates are never rejected by domain checks; metric entries are
  /// smooth functions of the angle so differencing across the seam is harmless.
  bool periodic = false;

  bool bounded() const { return std::isfinite(lower) && std::isfinite(upper); }
  double length() const { return upper - lower; }
};

using MetricField = std::function<Matrix(const Vector&)>;
using VectorField = std::function<Vector(const Vector&)>;
using ScalarField = std::function<double(const Vector&)>;

/// A Riemannian metric on one coordinate chart.
struct ChartManifold {
  int dim = 0;
  std::vector<Interval> domain;
  MetricField metric;
  std::string label;
  std::vector<std::string> coord_names;
  /// Set for charts of space forms; enables closed-form extremal invariants.
  std::optional<double> constant_curvature;

  std::string coord_name(int i) const {
    if (i < static_cast<int>(coord_names.size())) return coord_names[i];
    return "x" + std::to_string(i);
  }
};

enum class DiffScheme { Central2, Central4 };
enum class StepScaling { Absolute, RelativeToCoordinate };

struct DiffConfig {
  DiffScheme scheme = DiffScheme::Central4;
  double base_step = 1e-4;
  StepScaling step_scaling = StepScaling::Absolute;

  double step(double coordinate) const {
    if (step_scaling == StepScaling::RelativeToCoordinate)
      return base_step * std::max(1.0, std::abs(coordinate));
    return base_step;
  }
  /// Stencil half-width in units of the step.
  int reach() const { return scheme == DiffScheme::Central4 ? 2 : 1; }
};

// ---------------------------------------------------------------------------
// finite differences over arbitrary Eigen-valued (or scalar) functions

namespace fd {

template <class F>
auto first(const F& f, const Vector& x, int axis, const DiffConfig& cfg) {
  const double h = cfg.step(x[axis]);
  Vector xp = x, xm = x;
  if (cfg.scheme == DiffScheme::Central2) {
    xp[axis] += h;
    xm[axis] -= h;
    using R = decltype(f(x));
    R r = (f(xp) - f(xm)) / (2.0 * h);
    return r;
  }
  Vector xp2 = x, xm2 = x;
  xp[axis] += h;
  xm[axis] -= h;
  xp2[axis] += 2.0 * h;
  xm2[axis] -= 2.0 * h;
  using R = decltype(f(x));
  R r = (-f(xp2) + 8.0 * f(xp) - 8.0 * f(xm) + f(xm2)) / (12.0 * h);
  return r;
}

/// ∂²f/∂x_a∂x_b; `center` is f(x), reused by the pure second derivative.
template <class F, class R>
R second(const F& f, const Vector& x, int a, int b, const DiffConfig& cfg, const R& center) {
  if (a != b) {
    auto da = [&](const Vector& y) { return first(f, y, a, cfg); };
    return first(da, x, b, cfg);
  }
  const double h = cfg.step(x[a]);
  Vector xp = x, xm = x;
  xp[a] += h;
  xm[a] -= h;
  if (cfg.scheme == DiffScheme::Central2) {
    R r = (f(xp) - 2.0 * center + f(xm)) / (h * h);
    return r;
  }
  Vector xp2 = x, xm2 = x;
  xp2[a] += 2.0 * h;
  xm2[a] -= 2.0 * h;
  R r = (-f(xp2) + 16.0 * f(xp) - 30.0 * center + 16.0 * f(xm) - f(xm2)) / (12.0 * h * h);
  return r;
}

}  // namespace fd

// ---------------------------------------------------------------------------

inline void check_in_domain(const ChartManifold& m, const Vector& x, const DiffConfig& cfg) {
  if (x.size() != m.dim)
    throw Error(ErrorKind::DimensionMismatch,
                "point has " + std::to_string(x.size()) + " coordinates, chart '" + m.label + "' has " +
                    std::to_string(m.dim));
  for (int i = 0; i < m.dim; ++i) {
    if (!std::isfinite(x[i])) throw Error(ErrorKind::PointOutsideDomain, "non-finite coordinate");
    if (i >= static_cast<int>(m.domain.size())) continue;
    const Interval& iv = m.domain[i];
    if (iv.periodic) continue;
    const double margin = cfg.reach() * cfg.step(x[i]);
    if (!(x[i] > iv.lower + margin && x[i] < iv.upper - margin)) {
      std::ostringstream os;
      os << "coordinate " << m.coord_name(i) << " = " << x[i] << " not inside (" << iv.lower << ", "
         << iv.upper << ") shrunk by " << margin << " on chart '" << m.label << "'";
      throw Error(ErrorKind::PointOutsideDomain, os.str());
    }
  }
}

/// Metric at x, validated symmetric, finite and positive definite.
inline Matrix metric_at(const ChartManifold& m, const Vector& x) {
  Matrix g = m.metric(x);
  if (g.rows() != m.dim || g.cols() != m.dim)
    throw Error(ErrorKind::DimensionMismatch, "metric of chart '" + m.label + "' has wrong shape");
  if (!g.allFinite()) throw Error(ErrorKind::NumericalBreakdown, "metric not finite on '" + m.label + "'");
  const double asym = (g - g.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::MetricNotPositiveDefinite, "metric not symmetric (asymmetry " + std::to_string(asym) + ")");
  Eigen::LLT<Matrix> llt(g);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    std::ostringstream os;
    os << "smallest eigenvalue " << es.eigenvalues().minCoeff() << " on chart '" << m.label << "'";
    throw Error(ErrorKind::MetricNotPositiveDefinite, os.str());
  }
  return g;
}

/// Metric with its first and (optionally) second coordinate derivatives at one point.
struct MetricJet {
  Matrix g;
  Matrix ginv;
  std::vector<Matrix> dg;                // dg[c] = ∂_c g
  std::vector<std::vector<Matrix>> ddg;  // ddg[c][d] = ∂_c∂_d g
};

inline MetricJet metric_jet(const ChartManifold& m, const Vector& x, const DiffConfig& cfg, bool second_order) {
  check_in_domain(m, x, cfg);
  MetricJet jet;
  jet.g = metric_at(m, x);
  jet.ginv = jet.g.inverse();
  const int n = m.dim;
  auto f = [&](const Vector& y) -> Matrix { return m.metric(y); };
  jet.dg.resize(n);
  for (int c = 0; c < n; ++c) {
    jet.dg[c] = fd::first(f, x, c, cfg);
    if (!jet.dg[c].allFinite()) throw Error(ErrorKind::NumericalBreakdown, "non-finite metric derivative");
  }
  if (second_order) {
    jet.ddg.assign(n, std::vector<Matrix>(n));
    for (int c = 0; c < n; ++c)
      for (int d = c; d < n; ++d) {
        jet.ddg[c][d] = fd::second(f, x, c, d, cfg, jet.g);
        if (!jet.ddg[c][d].allFinite())
          throw Error(ErrorKind::NumericalBreakdown, "non-finite second metric derivative");
        jet.ddg[d][c] = jet.ddg[c][d];
      }
  }
  return jet;
}

/// Γ^a_bc from a jet.
inline Tensor3 christoffel_from_jet(const MetricJet& jet) {
  const int n = static_cast<int>(jet.g.rows());
  Tensor3 first_kind(n);  // Γ_dbc
  for (int d = 0; d < n; ++d)
    for (int b = 0; b < n; ++b)
      for (int c = b; c < n; ++c) {
        const double v = 0.5 * (jet.dg[b](d, c) + jet.dg[c](d, b) - jet.dg[d](b, c));
        first_kind(d, b, c) = v;
        first_kind(d, c, b) = v;
      }
  Tensor3 gamma(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = b; c < n; ++c) {
        double s = 0.0;
        for (int d = 0; d < n; ++d) s += jet.ginv(a, d) * first_kind(d, b, c);
        gamma(a, b, c) = s;
        gamma(a, c, b) = s;
      }
  return gamma;
}

inline Tensor3 christoffel(const ChartManifold& m, const Vector& x, const DiffConfig& cfg = {}) {
  return christoffel_from_jet(metric_jet(m, x, cfg, false));
}

struct CurvatureAtPoint {
  Vector point;
  Matrix metric;
  Tensor3 gamma;
  Tensor4 riemann_lowered;
  Matrix ricci;
  double tau = 0.0;

  /// R(X,Y,Z,W) = g(R(Z,W)Y, X).
  double riemann(const Vector& X, const Vector& Y, const Vector& Z, const Vector& W) const {
    return riemann_lowered.contract(X, Y, Z, W);
  }
};

inline CurvatureAtPoint curvature_at(const ChartManifold& m, const Vector& x, const DiffConfig& cfg = {}) {
  const MetricJet jet = metric_jet(m, x, cfg, true);
  const int n = m.dim;
  CurvatureAtPoint out;
  out.point = x;
  out.metric = jet.g;
  out.gamma = christoffel_from_jet(jet);
  const Tensor3& G = out.gamma;

  // dGamma(e, a, b, c) = ∂_e Γ^a_bc
  std::vector<double> dgam(static_cast<std::size_t>(n) * n * n * n, 0.0);
  auto dG = [&](int e, int a, int b, int c) -> double& {
    return dgam[((static_cast<std::size_t>(e) * n + a) * n + b) * n + c];
  };
  for (int e = 0; e < n; ++e) {
    const Matrix dginv = -jet.ginv * jet.dg[e] * jet.ginv;
    for (int b = 0; b < n; ++b)
      for (int c = b; c < n; ++c) {
        Vector first_kind(n), dfirst_kind(n);
        for (int d = 0; d < n; ++d) {
          first_kind[d] = 0.5 * (jet.dg[b](d, c) + jet.dg[c](d, b) - jet.dg[d](b, c));
          dfirst_kind[d] = 0.5 * (jet.ddg[e][b](d, c) + jet.ddg[e][c](d, b) - jet.ddg[e][d](b, c));
        }
        const Vector v = dginv * first_kind + jet.ginv * dfirst_kind;
        for (int a = 0; a < n; ++a) {
          dG(e, a, b, c) = v[a];
          dG(e, a, c, b) = v[a];
        }
      }
  }

  // R^a_bcd = ∂_c Γ^a_db − ∂_d Γ^a_cb + Γ^a_ce Γ^e_db − Γ^a_de Γ^e_cb
  Tensor4 up(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = c + 1; d < n; ++d) {
          double v = dG(c, a, d, b) - dG(d, a, c, b);
          for (int e = 0; e < n; ++e) v += G(a, c, e) * G(e, d, b) - G(a, d, e) * G(e, c, b);
          up(a, b, c, d) = v;
          up(a, b, d, c) = -v;
        }
  out.riemann_lowered = Tensor4(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          double v = 0.0;
          for (int e = 0; e < n; ++e) v += jet.g(a, e) * up(e, b, c, d);
          out.riemann_lowered(a, b, c, d) = v;
        }

  out.ricci = Matrix::Zero(n, n);
  for (int b = 0; b < n; ++b)
    for (int d = 0; d < n; ++d) {
      double v = 0.0;
      for (int a = 0; a < n; ++a) v += up(a, b, a, d);
      out.ricci(b, d) = v;
    }
  out.ricci = 0.5 * (out.ricci + out.ricci.transpose()).eval();
  out.tau = (jet.ginv.cwiseProduct(out.ricci)).sum();
  if (!std::isfinite(out.tau)) throw Error(ErrorKind::NumericalBreakdown, "non-finite curvature");
  return out;
}

/// Sectional curvature of span{X,Y}; the quotient form makes it independent of the basis.
inline double sectional(const CurvatureAtPoint& c, const Vector& X, const Vector& Y) {
  const Matrix& g = c.metric;
  const double xx = g_norm_sq(g, X), yy = g_norm_sq(g, Y), xy = g_inner(g, X, Y);
  const double area_sq = xx * yy - xy * xy;
  if (!(area_sq > 1e-24))
    throw Error(ErrorKind::DegeneratePlane, "|X^Y| = " + std::to_string(std::sqrt(std::max(0.0, area_sq))));
  return c.riemann(X, Y, X, Y) / area_sq;
}

inline double sectional(const ChartManifold& m, const Vector& x, const Vector& X, const Vector& Y,
                        const DiffConfig& cfg = {}) {
  return sectional(curvature_at(m, x, cfg), X, Y);
}

/// Matrix A with A(a,c) = (∇_c X)^a.
inline Matrix covariant_derivative(const ChartManifold& m, const VectorField& field, const Vector& x,
                                   const Tensor3& gamma, const DiffConfig& cfg) {
  const int n = m.dim;
  const Vector X = field(x);
  Matrix A(n, n);
  for (int c = 0; c < n; ++c) {
    const Vector dX = fd::first(field, x, c, cfg);
    for (int a = 0; a < n; ++a) {
      double v = dX[a];
      for (int b = 0; b < n; ++b) v += gamma(a, c, b) * X[b];
      A(a, c) = v;
    }
  }
  return A;
}

/// Div X = Σ_i g(∇_{e_i} X, e_i) over a g-orthonormal basis.
inline double divergence(const ChartManifold& m, const VectorField& field, const Vector& x,
                         const DiffConfig& cfg = {}) {
  const MetricJet jet = metric_jet(m, x, cfg, false);
  const Tensor3 gamma = christoffel_from_jet(jet);
  const Matrix A = covariant_derivative(m, field, x, gamma, cfg);
  const Matrix E = g_orthonormal_basis(jet.g);
  double s = 0.0;
  for (int i = 0; i < m.dim; ++i) s += g_inner(jet.g, A * E.col(i), E.col(i));
  return s;
}

/// (1/√det g) ∂_a(√det g X^a); an independent route to the divergence.
inline double divergence_coordinate(const ChartManifold& m, const VectorField& field, const Vector& x,
                                    const DiffConfig& cfg = {}) {
  check_in_domain(m, x, cfg);
  auto density = [&](const Vector& y) { return std::sqrt(m.metric(y).determinant()); };
  double s = 0.0;
  for (int a = 0; a < m.dim; ++a) {
    auto comp = [&](const Vector& y) { return density(y) * field(y)[a]; };
    s += fd::first(comp, x, a, cfg);
  }
  return s / density(x);
}

/// grad u = g^{-1} du.
inline Vector gradient(const ChartManifold& m, const ScalarField& u, const Vector& x, const DiffConfig& cfg = {}) {
  check_in_domain(m, x, cfg);
  Vector du(m.dim);
  for (int a = 0; a < m.dim; ++a) du[a] = fd::first(u, x, a, cfg);
  return metric_at(m, x).ldlt().solve(du);
}

/// Laplacian over the whole chart or along the leaves of a coordinate block.
struct LaplaceMode {
  /// Empty = full Laplacian; otherwise the coordinate indices of the base block.
  std::vector<int> leaf_coords;

  static LaplaceMode full() { return {}; }
  static LaplaceMode leafwise(std::vector<int> coords) { return {std::move(coords)}; }
};

/// Geometer's sign: Δu = −div grad u.
inline double laplacian(const ChartManifold& m, const ScalarField& u, const Vector& x, const DiffConfig& cfg = {},
                        const LaplaceMode& mode = LaplaceMode::full()) {
  check_in_domain(m, x, cfg);
  std::vector<int> coords = mode.leaf_coords;
  if (coords.empty())
    for (int i = 0; i < m.dim; ++i) coords.push_back(i);
  const int q = static_cast<int>(coords.size());

  const Matrix full_g = metric_at(m, x);
  if (!mode.leaf_coords.empty()) {
    std::vector<bool> in_leaf(m.dim, false);
    for (int c : coords) in_leaf[c] = true;
    for (int a : coords)
      for (int b = 0; b < m.dim; ++b)
        if (!in_leaf[b] && std::abs(full_g(a, b)) > 1e-10)
          throw Error(ErrorKind::NotBlockDiagonal,
                      "g(" + m.coord_name(a) + "," + m.coord_name(b) + ") = " + std::to_string(full_g(a, b)));
  }

  auto leaf_metric = [&](const Vector& y) -> Matrix {
    const Matrix G = m.metric(y);
    Matrix r(q, q);
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j) r(i, j) = G(coords[i], coords[j]);
    return r;
  };
  MetricJet jet;
  jet.g = leaf_metric(x);
  jet.ginv = jet.g.inverse();
  jet.dg.resize(q);
  for (int i = 0; i < q; ++i) jet.dg[i] = fd::first(leaf_metric, x, coords[i], cfg);
  const Tensor3 gamma = christoffel_from_jet(jet);

  const double u0 = u(x);
  Vector du(q);
  Matrix ddu(q, q);
  for (int i = 0; i < q; ++i) du[i] = fd::first(u, x, coords[i], cfg);
  for (int i = 0; i < q; ++i)
    for (int j = i; j < q; ++j) {
      ddu(i, j) = fd::second(u, x, coords[i], coords[j], cfg, u0);
      ddu(j, i) = ddu(i, j);
    }
  double s = 0.0;
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b) {
      double hess = ddu(a, b);
      for (int c = 0; c < q; ++c) hess -= gamma(c, a, b) * du[c];
      s += jet.ginv(a, b) * hess;
    }
  if (!std::isfinite(s)) throw Error(ErrorKind::NumericalBreakdown, "non-finite Laplacian");
  return -s;
}

}  // namespace mixedcurv
