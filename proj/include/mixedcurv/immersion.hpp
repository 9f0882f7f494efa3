#pragma once

// Isometric immersions between charts: differential, isometry check, the
// ambient second fundamental form with its block and mixed parts, the Gauss
// equation and its traces.

#include "mixedcurv/expression.hpp"
#include "mixedcurv/structure.hpp"

#include <memory>

namespace mixedcurv {

/// f: source chart → ambient chart. Derivative callbacks are optional; when
/// absent they are produced by finite differences and flagged as such.
struct ImmersionData {
  ChartManifold source;
  std::optional<DistributionSet> distributions;
  ChartManifold ambient;
  std::function<Vector(const Vector&)> map;
  /// m×n Jacobian.
  std::function<Matrix(const Vector&)> differential;
  /// second[a*n + b] = ∂_a∂_b f
  std::function<std::vector<Vector>(const Vector&)> second;

  bool differential_is_numerical() const { return !differential; }
};

namespace detail {

inline Matrix jacobian(const ImmersionData& imm, const Vector& x, const DiffConfig& cfg) {
  if (imm.differential) return imm.differential(x);
  const int n = imm.source.dim;
  const Vector f0 = imm.map(x);
  Matrix J(f0.size(), n);
  for (int a = 0; a < n; ++a) J.col(a) = fd::first(imm.map, x, a, cfg);
  return J;
}

inline std::vector<Vector> map_second(const ImmersionData& imm, const Vector& x, const DiffConfig& cfg) {
  if (imm.second) return imm.second(x);
  const int n = imm.source.dim;
  std::vector<Vector> out(static_cast<std::size_t>(n * n));
  if (imm.differential) {
    for (int a = 0; a < n; ++a) {
      const Matrix dJ = fd::first(imm.differential, x, a, cfg);
      for (int b = 0; b < n; ++b) out[a * n + b] = dJ.col(b);
    }
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) out[a * n + b] = out[b * n + a] = 0.5 * (out[a * n + b] + out[b * n + a]);
    return out;
  }
  const Vector f0 = imm.map(x);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) out[a * n + b] = out[b * n + a] = fd::second(imm.map, x, a, b, cfg, f0);
  return out;
}

}  // namespace detail

/// Map given by one expression per ambient coordinate in the source coordinate
/// names; Jacobian and Hessian come from symbolic derivatives.
inline ImmersionData immersion_from_expressions(ChartManifold source, ChartManifold ambient,
                                                const std::vector<std::string>& components,
                                                std::optional<DistributionSet> distributions = {}) {
  const int n = source.dim;
  const int m = static_cast<int>(components.size());
  if (m != ambient.dim)
    throw Error(ErrorKind::DimensionMismatch, "map has " + std::to_string(m) + " components but the ambient has dimension " +
                                                  std::to_string(ambient.dim));
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back(source.coord_name(i));
  struct Compiled {
    std::vector<expr::Program> f, df, ddf;  // df[k*n + a], ddf[(k*n + a)*n + b]
  };
  auto c = std::make_shared<Compiled>();
  for (const auto& src : components) {
    const WarpExpression e(src);
    c->f.push_back(e.compile(names));
    for (int a = 0; a < n; ++a) {
      const WarpExpression da = e.derivative(names[a]);
      c->df.push_back(da.compile(names));
      for (int b = 0; b < n; ++b) c->ddf.push_back(da.derivative(names[b]).compile(names));
    }
  }
  ImmersionData imm;
  imm.source = std::move(source);
  imm.ambient = std::move(ambient);
  imm.distributions = std::move(distributions);
  auto view = [n](const Vector& x) { return std::span<const double>(x.data(), static_cast<std::size_t>(n)); };
  imm.map = [c, m, view](const Vector& x) {
    Vector y(m);
    for (int k = 0; k < m; ++k) y[k] = c->f[k](view(x));
    return y;
  };
  imm.differential = [c, m, n, view](const Vector& x) {
    Matrix J(m, n);
    for (int k = 0; k < m; ++k)
      for (int a = 0; a < n; ++a) J(k, a) = c->df[k * n + a](view(x));
    return J;
  };
  imm.second = [c, m, n, view](const Vector& x) {
    std::vector<Vector> out(static_cast<std::size_t>(n * n), Vector(m));
    for (int k = 0; k < m; ++k)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) out[a * n + b][k] = c->ddf[(k * n + a) * n + b](view(x));
    return out;
  };
  return imm;
}

/// max |Jᵀ ḡ J − g| at x.
inline double isometry_residual(const ImmersionData& imm, const Vector& x, const DiffConfig& cfg = {}) {
  check_in_domain(imm.source, x, cfg);
  const Matrix J = detail::jacobian(imm, x, cfg);
  if (J.rows() != imm.ambient.dim || J.cols() != imm.source.dim)
    throw Error(ErrorKind::DimensionMismatch, "differential has the wrong shape");
  const Eigen::JacobiSVD<Matrix> svd(J);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (!(smin >= 1e-8)) throw Error(ErrorKind::RankDeficientDifferential, "smallest singular value " + std::to_string(smin));
  const Matrix gbar = metric_at(imm.ambient, imm.map(x));
  const Matrix g = metric_at(imm.source, x);
  return (J.transpose() * gbar * J - g).cwiseAbs().maxCoeff();
}

/// Ambient second fundamental form on an adapted frame of the source.
struct AmbientSFF {
  Vector point;
  Vector image;
  Matrix ambient_metric;   // ḡ at f(x)
  AdaptedFrame frame;      // source frame (a single block when no distributions are given)
  Matrix pushed;           // f_* e_a as columns
  std::vector<std::vector<Vector>> hbar;  // hbar[a][b] = h̄(e_a, e_b)
  Vector Hbar;
  std::vector<Vector> Hbar_blocks;
  double norm_hbar_sq = 0;
  double norm_Hbar_sq = 0;
  /// ‖h̄^mix_ij‖² = Σ over ordered pairs (a∈i, b∈j) and (b,a), so that ‖h̄‖² splits exactly.
  Matrix mixed_norms;
  std::vector<double> block_hbar_sq;
  std::vector<double> block_Hbar_sq;
  bool has_blocks = false;

  double mixed_total() const {
    double s = 0;
    for (int i = 0; i < mixed_norms.rows(); ++i)
      for (int j = i + 1; j < mixed_norms.cols(); ++j) s += mixed_norms(i, j);
    return s;
  }
};

inline AmbientSFF ambient_sff(const ImmersionData& imm, const Vector& x, const DiffConfig& cfg = {},
                              std::optional<std::uint64_t> seed = {}, double tol_iso = 1e-8) {
  const double iso = isometry_residual(imm, x, cfg);
  if (iso > tol_iso) throw Error(ErrorKind::NotIsometric, "isometry residual " + std::to_string(iso));
  const int n = imm.source.dim;
  const int m = imm.ambient.dim;
  AmbientSFF s;
  s.point = x;
  s.image = imm.map(x);
  s.has_blocks = imm.distributions.has_value();
  if (s.has_blocks) {
    s.frame = adapted_frame(*imm.distributions, x, seed);
  } else {
    s.frame.point = x;
    s.frame.metric = metric_at(imm.source, x);
    s.frame.vectors = g_orthonormal_basis(s.frame.metric);
    s.frame.block_index.assign(n, 0);
    s.frame.block_start = {0, n};
  }
  const Matrix J = detail::jacobian(imm, x, cfg);
  const auto ddf = detail::map_second(imm, x, cfg);
  const Tensor3 gbar_gamma = christoffel(imm.ambient, s.image, cfg);
  s.ambient_metric = metric_at(imm.ambient, s.image);
  const Matrix& gb = s.ambient_metric;
  s.pushed = J * s.frame.vectors;

  // ḡ-orthonormal basis of f_*(T_xM) for the normal projector
  std::vector<Vector> tangent;
  for (int a = 0; a < n; ++a) {
    Vector v = g_orthogonalize(gb, tangent, s.pushed.col(a));
    tangent.push_back(v / std::sqrt(g_norm_sq(gb, v)));
  }
  auto normal_part = [&](Vector v) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& t : tangent) v -= g_inner(gb, v, t) * t;
    return v;
  };

  // ∇̄_{∂c} f_*∂d = ∂c∂d f + Γ̄(∂c f, ∂d f); its normal part is h̄(∂c, ∂d)
  std::vector<Vector> hcoord(static_cast<std::size_t>(n * n));
  for (int c = 0; c < n; ++c)
    for (int d = c; d < n; ++d) {
      Vector v = ddf[c * n + d];
      for (int k = 0; k < m; ++k) {
        double acc = 0;
        for (int p = 0; p < m; ++p)
          for (int q = 0; q < m; ++q) acc += gbar_gamma(k, p, q) * J(p, c) * J(q, d);
        v[k] += acc;
      }
      hcoord[c * n + d] = hcoord[d * n + c] = normal_part(v);
    }

  const Matrix& E = s.frame.vectors;
  const int k = s.frame.k();
  s.hbar.assign(n, std::vector<Vector>(n, Vector::Zero(m)));
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      Vector v = Vector::Zero(m);
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) v += E(c, a) * E(d, b) * hcoord[c * n + d];
      s.hbar[a][b] = s.hbar[b][a] = v;
    }
  s.Hbar = Vector::Zero(m);
  s.Hbar_blocks.assign(k, Vector::Zero(m));
  for (int a = 0; a < n; ++a) {
    s.Hbar += s.hbar[a][a];
    s.Hbar_blocks[s.frame.block_index[a]] += s.hbar[a][a];
  }
  s.norm_Hbar_sq = g_norm_sq(gb, s.Hbar);
  s.mixed_norms = Matrix::Zero(k, k);
  s.block_hbar_sq.assign(k, 0.0);
  s.block_Hbar_sq.assign(k, 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const double v = g_norm_sq(gb, s.hbar[a][b]);
      s.norm_hbar_sq += v;
      const int i = s.frame.block_index[a], j = s.frame.block_index[b];
      if (i == j) s.block_hbar_sq[i] += v;
      else s.mixed_norms(std::min(i, j), std::max(i, j)) += v;
    }
  for (int i = 0; i < k; ++i) s.block_Hbar_sq[i] = g_norm_sq(gb, s.Hbar_blocks[i]);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < i; ++j) s.mixed_norms(i, j) = s.mixed_norms(j, i);
  return s;
}

/// Largest deviation from the Gauss equation over all frame 4-tuples:
/// ḡ(R̄(Y,Z)U,V) − g(R(Y,Z)U,V) − ḡ(h̄(Y,U),h̄(Z,V)) + ḡ(h̄(Z,U),h̄(Y,V)).
inline double gauss_residual(const ImmersionData& imm, const Vector& x, const DiffConfig& cfg = {}) {
  const AmbientSFF s = ambient_sff(imm, x, cfg);
  const auto R = curvature_at(imm.source, x, cfg);
  const auto Rb = curvature_at(imm.ambient, s.image, cfg);
  const int n = imm.source.dim;
  const Matrix& E = s.frame.vectors;
  const Matrix& F = s.pushed;
  const Matrix& gb = s.ambient_metric;
  double worst = 0;
  for (int y = 0; y < n; ++y)
    for (int z = 0; z < n; ++z)
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
          // g(R(Y,Z)U,V) = R(V,U,Y,Z) in the library's index order
          const double amb = Rb.riemann(F.col(v), F.col(u), F.col(y), F.col(z));
          const double intr = R.riemann(E.col(v), E.col(u), E.col(y), E.col(z));
          const double hh = g_inner(gb, s.hbar[y][u], s.hbar[z][v]) - g_inner(gb, s.hbar[z][u], s.hbar[y][v]);
          worst = std::max(worst, std::abs(amb - intr - hh));
        }
  return worst;
}

enum class TraceIdentity { SI, SII };

/// SI: τ̄|_M − τ = ‖h̄‖² − ‖H̄‖². SII: the same restricted to block `block`.
inline IdentityResult evaluate_trace_identity(const ImmersionData& imm, const Vector& x, TraceIdentity id, int block = 0,
                                              const DiffConfig& cfg = {}) {
  const AmbientSFF s = ambient_sff(imm, x, cfg);
  if (id == TraceIdentity::SII && !s.has_blocks)
    throw Error(ErrorKind::PrerequisiteNotMet, "SII needs distributions on the source");
  if (block < 0 || block >= s.frame.k()) throw Error(ErrorKind::DimensionMismatch, "block index out of range");
  const auto Rb = curvature_at(imm.ambient, s.image, cfg);
  const auto R = curvature_at(imm.source, x, cfg);
  const Matrix Kb = frame_sectional(Rb, s.pushed);
  const Matrix K = frame_sectional(R, s.frame.vectors);
  const int n = imm.source.dim;
  IdentityResult r;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      if (id == TraceIdentity::SII && (s.frame.block_index[a] != block || s.frame.block_index[b] != block)) continue;
      r.lhs += Kb(a, b) - K(a, b);
    }
  r.rhs = id == TraceIdentity::SI ? s.norm_hbar_sq - s.norm_Hbar_sq : s.block_hbar_sq[block] - s.block_Hbar_sq[block];
  r.residual = std::abs(r.lhs - r.rhs);
  return r;
}

inline double trace_identity_residual(const ImmersionData& imm, const Vector& x, TraceIdentity id, int block = 0,
                                      const DiffConfig& cfg = {}) {
  return evaluate_trace_identity(imm, x, id, block, cfg).residual;
}

}  // namespace mixedcurv
