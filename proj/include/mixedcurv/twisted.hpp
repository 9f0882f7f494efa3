#pragma once

// Multiply twisted products F1 ×_u F2 × … × Fk with expression warpings, and
// midpoint quadrature along coordinate leaves.

#include "mixedcurv/expression.hpp"
#include "mixedcurv/extremal.hpp"
#include "mixedcurv/structure.hpp"

#include <algorithm>
#include <memory>
#include <sstream>

namespace mixedcurv {

/// g = g_F1 ⊕ u_2² g_F2 ⊕ … ⊕ u_k² g_Fk on the concatenated chart.
struct TwistedProduct {
  ChartManifold manifold;
  DistributionSet distributions;  // coordinate blocks: base first, then the fibers
  std::vector<int> base_coords;
  std::vector<std::vector<int>> fiber_coords;
  std::vector<WarpExpression> warpings;
  bool is_warped = true;

  struct Compiled {
    std::vector<expr::Program> u;
    std::vector<std::vector<expr::Program>> du;  // du[i][a] = ∂u_i/∂(base coordinate a)
  };
  std::shared_ptr<const Compiled> compiled;

  int k() const { return 1 + static_cast<int>(fiber_coords.size()); }
  std::vector<int> ranks() const {
    std::vector<int> r{static_cast<int>(base_coords.size())};
    for (const auto& f : fiber_coords) r.push_back(static_cast<int>(f.size()));
    return r;
  }

  /// u_i at x; i counts fibers from 0.
  double warping(int i, const Vector& x) const {
    return compiled->u[i](std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }
  ScalarField warping_field(int i) const {
    auto c = compiled;
    return [c, i](const Vector& x) {
      return c->u[i](std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    };
  }

  /// ‖P_1 ∇ log u_i‖², from symbolic derivatives and the base metric.
  double log_gradient_sq(int i, const Vector& x) const {
    const std::span<const double> v(x.data(), static_cast<std::size_t>(x.size()));
    const int q = static_cast<int>(base_coords.size());
    const double u = compiled->u[i](v);
    Vector d(q);
    for (int a = 0; a < q; ++a) d[a] = compiled->du[i][a](v) / u;
    const Matrix g = metric_at(manifold, x);
    Matrix g1(q, q);
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b) g1(a, b) = g(base_coords[a], base_coords[b]);
    return d.dot(g1.ldlt().solve(d));
  }
};

namespace detail {

inline std::string format_point(const ChartManifold& m, const Vector& x) {
  std::ostringstream os;
  os << "(";
  for (int i = 0; i < x.size(); ++i) os << (i ? ", " : "") << m.coord_name(i) << "=" << x[i];
  os << ")";
  return os.str();
}

}  // namespace detail

/// One warping per fiber. u_i may depend on the base coordinates and on the
/// coordinates of its own fiber only. Positivity is checked on a midpoint grid.
inline TwistedProduct build_twisted_product(const ChartManifold& base, const std::vector<ChartManifold>& fibers,
                                            const std::vector<WarpExpression>& warpings, int check_grid = 9) {
  if (fibers.empty()) throw Error(ErrorKind::DimensionMismatch, "a twisted product needs at least one fiber");
  if (warpings.size() != fibers.size())
    throw Error(ErrorKind::DimensionMismatch, std::to_string(fibers.size()) + " fibers but " +
                                                  std::to_string(warpings.size()) + " warpings");
  TwistedProduct tp;
  std::vector<ChartManifold> factors{base};
  factors.insert(factors.end(), fibers.begin(), fibers.end());
  std::vector<std::string> names;
  int offset = 0;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    std::vector<int> idx;
    for (int a = 0; a < factors[f].dim; ++a) {
      const std::string nm = factors[f].coord_name(a);
      if (std::find(names.begin(), names.end(), nm) != names.end())
        throw Error(ErrorKind::ValidationError, "coordinate name '" + nm + "' used twice");
      names.push_back(nm);
      idx.push_back(offset + a);
    }
    offset += factors[f].dim;
    if (f == 0) tp.base_coords = idx;
    else tp.fiber_coords.push_back(idx);
  }

  auto compiled = std::make_shared<TwistedProduct::Compiled>();
  for (std::size_t i = 0; i < warpings.size(); ++i) {
    std::vector<std::string> allowed;
    for (int a : tp.base_coords) allowed.push_back(names[a]);
    const std::size_t nbase = allowed.size();
    for (int a : tp.fiber_coords[i]) allowed.push_back(names[a]);
    for (const auto& v : warpings[i].free_variables()) {
      const auto it = std::find(allowed.begin(), allowed.end(), v);
      if (it == allowed.end())
        throw Error(ErrorKind::ValidationError, "warping " + std::to_string(i + 2) + " '" + warpings[i].source_text() +
                                                    "' depends on '" + v + "', which is neither a base coordinate nor in fiber " +
                                                    std::to_string(i + 2));
      if (static_cast<std::size_t>(it - allowed.begin()) >= nbase) tp.is_warped = false;
    }
    compiled->u.push_back(warpings[i].compile(names));
    std::vector<expr::Program> grads;
    for (int a : tp.base_coords) grads.push_back(warpings[i].derivative(names[a]).compile(names));
    compiled->du.push_back(std::move(grads));
  }
  tp.compiled = compiled;
  tp.warpings = warpings;

  ChartManifold m;
  m.dim = offset;
  m.coord_names = names;
  for (const auto& f : factors) {
    std::vector<Interval> dom = f.domain;
    dom.resize(f.dim);
    m.domain.insert(m.domain.end(), dom.begin(), dom.end());
  }
  m.label = base.label;
  for (std::size_t i = 0; i < fibers.size(); ++i)
    m.label += " x_{" + warpings[i].canonical() + "} " + fibers[i].label;
  const auto base_coords = tp.base_coords;
  const auto fiber_coords = tp.fiber_coords;
  const int n = m.dim;
  m.metric = [factors, compiled, base_coords, fiber_coords, n](const Vector& x) -> Matrix {
    Matrix g = Matrix::Zero(n, n);
    const int q = static_cast<int>(base_coords.size());
    g.block(0, 0, q, q) = factors[0].metric(x.segment(0, q));
    const std::span<const double> v(x.data(), static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < fiber_coords.size(); ++i) {
      const int s = fiber_coords[i].front(), d = static_cast<int>(fiber_coords[i].size());
      const double u = compiled->u[i](v);
      g.block(s, s, d, d) = u * u * factors[i + 1].metric(x.segment(s, d));
    }
    return g;
  };
  tp.manifold = m;

  OptimizerParams grid;
  grid.grid_per_axis = check_grid;
  for (const auto& x : detail::region_points(m, grid))
    for (std::size_t i = 0; i < warpings.size(); ++i) {
      const double u = tp.warping(static_cast<int>(i), x);
      if (!(u > 0) || !std::isfinite(u))
        throw Error(ErrorKind::NonPositiveWarping, "u_" + std::to_string(i + 2) + " = " + std::to_string(u) + " at " +
                                                       detail::format_point(m, x));
    }

  std::vector<std::vector<int>> blocks{tp.base_coords};
  blocks.insert(blocks.end(), tp.fiber_coords.begin(), tp.fiber_coords.end());
  tp.distributions = DistributionSet::from_coordinates(m, blocks);
  return tp;
}

/// lhs = S_mix(D_1, D_1^⊥) from the curvature tensor, rhs = Σ n_i Δ^{(1)}u_i / u_i
/// from the leafwise Laplacian. For k = 2 this is the full mixed scalar
/// curvature; for k ≥ 3 the fiber-fiber planes are left out (see
/// fiber_fiber_smix).
inline IdentityResult evaluate_twisted_smix(const TwistedProduct& tp, const Vector& x, const DiffConfig& cfg = {}) {
  IdentityResult r;
  r.lhs = curvature_decomposition(tp.distributions, x, cfg).smix_complement[0];
  for (int i = 0; i + 1 < tp.k(); ++i) {
    const double lap = laplacian(tp.manifold, tp.warping_field(i), x, cfg, LaplaceMode::leafwise(tp.base_coords));
    r.rhs += static_cast<double>(tp.fiber_coords[i].size()) * lap / tp.warping(i, x);
  }
  r.residual = std::abs(r.lhs - r.rhs);
  return r;
}

/// Σ_{2≤i<j} S_mix(D_i, D_j); −n_i n_j ⟨∇log u_i, ∇log u_j⟩ for warpings on the base.
inline double fiber_fiber_smix(const TwistedProduct& tp, const Vector& x, const DiffConfig& cfg = {}) {
  const auto d = curvature_decomposition(tp.distributions, x, cfg);
  double s = 0;
  for (int i = 1; i < tp.k(); ++i)
    for (int j = i + 1; j < tp.k(); ++j) s += d.pairwise(i, j);
  return s;
}

inline double twisted_smix_residual(const TwistedProduct& tp, const Vector& x, const DiffConfig& cfg = {}) {
  return evaluate_twisted_smix(tp, x, cfg).residual;
}

// ---------------------------------------------------------------------------
// quadrature along coordinate leaves

struct QuadratureNode {
  Vector point;
  double weight = 0;
};

/// Tensor-product midpoint rule over the leaf through `anchor` spanned by the
/// coordinates `leaf`, weighted by the leaf volume density √det(g|leaf). On a
/// periodic axis the midpoint rule is the rectangle rule.
inline std::vector<QuadratureNode> leaf_quadrature(const ChartManifold& m, const std::vector<int>& leaf, const Vector& anchor,
                                                   int resolution) {
  if (resolution < 1) throw Error(ErrorKind::ValidationError, "quadrature resolution must be positive");
  if (leaf.empty()) throw Error(ErrorKind::DimensionMismatch, "empty leaf");
  const int q = static_cast<int>(leaf.size());
  std::vector<double> lo(q), width(q);
  double cell = 1;
  for (int i = 0; i < q; ++i) {
    const int a = leaf[i];
    if (a < 0 || a >= m.dim) throw Error(ErrorKind::DimensionMismatch, "leaf coordinate out of range");
    const Interval iv = a < static_cast<int>(m.domain.size()) ? m.domain[a] : Interval{};
    if (!iv.bounded()) throw Error(ErrorKind::UnboundedLeaf, "coordinate " + m.coord_name(a) + " is unbounded");
    lo[i] = iv.lower;
    width[i] = iv.length() / resolution;
    cell *= width[i];
  }
  std::vector<QuadratureNode> out;
  std::vector<int> idx(q, 0);
  for (;;) {
    Vector x = anchor;
    for (int i = 0; i < q; ++i) x[leaf[i]] = lo[i] + (idx[i] + 0.5) * width[i];
    const Matrix g = metric_at(m, x);
    Matrix gl(q, q);
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j) gl(i, j) = g(leaf[i], leaf[j]);
    out.push_back({x, cell * std::sqrt(gl.determinant())});
    int i = q - 1;
    while (i >= 0 && ++idx[i] == resolution) idx[i--] = 0;
    if (i < 0) break;
  }
  return out;
}

}  // namespace mixedcurv
