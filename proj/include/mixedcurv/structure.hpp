#pragma once

// Almost k-product structure on a chart: adapted frames, second fundamental
// forms and integrability tensors of each block and of its complement, mean
// curvature vectors, mixed scalar curvature and the divergence identities that
// tie them together.

#include "mixedcurv/geomcore.hpp"

#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace mixedcurv {

struct BlockSpec {
  std::vector<VectorField> fields;
  /// When set, the fields are first projected onto the g-orthogonal complement of
  /// all preceding blocks; this is how a block is declared as "the rest of TM".
  bool project_onto_complement = false;
};

/// k pairwise g-orthogonal distributions spanning the tangent space of a chart.
struct DistributionSet {
  ChartManifold manifold;
  std::vector<BlockSpec> blocks;
  /// Present when every block is spanned by coordinate fields.
  std::optional<std::vector<std::vector<int>>> coordinate_blocks;

  int k() const { return static_cast<int>(blocks.size()); }
  std::vector<int> ranks() const {
    std::vector<int> r;
    for (const auto& b : blocks) r.push_back(static_cast<int>(b.fields.size()));
    return r;
  }

  static DistributionSet from_coordinates(ChartManifold m, const std::vector<std::vector<int>>& index_blocks) {
    DistributionSet d;
    const int n = m.dim;
    d.manifold = std::move(m);
    for (const auto& idx : index_blocks) {
      BlockSpec b;
      for (int i : idx) {
        if (i < 0 || i >= n) throw Error(ErrorKind::DimensionMismatch, "coordinate index out of range");
        b.fields.push_back([n, i](const Vector&) {
          Vector v = Vector::Zero(n);
          v[i] = 1.0;
          return v;
        });
      }
      d.blocks.push_back(std::move(b));
    }
    d.coordinate_blocks = index_blocks;
    return d;
  }
};

struct AdaptedFrame {
  Vector point;
  Matrix metric;
  Matrix vectors;  // columns e_0 … e_{n-1}, grouped by block
  std::vector<int> block_index;
  std::vector<int> block_start;  // first column of each block, plus n at the end

  int k() const { return static_cast<int>(block_start.size()) - 1; }
  int rank(int i) const { return block_start[i + 1] - block_start[i]; }
  Vector e(int a) const { return vectors.col(a); }
};

namespace detail {

/// Haar-random orthogonal q×q matrix from a seed.
inline Matrix random_orthogonal(int q, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix A(q, q);
  for (int j = 0; j < q; ++j)
    for (int i = 0; i < q; ++i) A(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(A);
  Matrix Q = qr.householderQ() * Matrix::Identity(q, q);
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < q; ++j)
    if (R(j, j) < 0) Q.col(j) *= -1.0;
  return Q;
}

}  // namespace detail

/// Blockwise modified Gram-Schmidt in declaration order. A seed applies a fixed
/// random rotation inside every block, so the frame stays a smooth field of x.
inline AdaptedFrame adapted_frame(const DistributionSet& d, const Vector& x, std::optional<std::uint64_t> seed = {}) {
  const ChartManifold& m = d.manifold;
  const int n = m.dim;
  if (d.k() < 2) throw Error(ErrorKind::DimensionMismatch, "need at least two distributions");
  int total = 0;
  for (int r : d.ranks()) total += r;
  if (total != n)
    throw Error(ErrorKind::DimensionMismatch,
                "ranks sum to " + std::to_string(total) + " but the chart has dimension " + std::to_string(n));

  AdaptedFrame f;
  f.point = x;
  f.metric = metric_at(m, x);
  const Matrix& g = f.metric;
  f.vectors = Matrix::Zero(n, n);
  std::vector<Vector> all;
  int col = 0;
  for (int i = 0; i < d.k(); ++i) {
    f.block_start.push_back(col);
    std::vector<Vector> mine;
    for (const auto& field : d.blocks[i].fields) {
      Vector v = field(x);
      if (v.size() != n) throw Error(ErrorKind::DimensionMismatch, "vector field has wrong size");
      const double scale = std::sqrt(g_norm_sq(g, v));
      if (d.blocks[i].project_onto_complement) v = g_orthogonalize(g, all, v);
      v = g_orthogonalize(g, mine, v);
      const double len = std::sqrt(g_norm_sq(g, v));
      if (!(len > 1e-8 * std::max(scale, 1e-300)) || !(scale > 0))
        throw Error(ErrorKind::RankDeficientBlock, "block " + std::to_string(i + 1) + " at the queried point");
      v /= len;
      mine.push_back(v);
      all.push_back(v);
      f.block_index.push_back(i);
      f.vectors.col(col++) = v;
    }
  }
  f.block_start.push_back(col);

  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const int i = f.block_index[a], j = f.block_index[b];
      if (i == j) continue;
      const double c = g_inner(g, f.vectors.col(a), f.vectors.col(b));
      if (std::abs(c) > 1e-10)
        throw Error(ErrorKind::BlocksNotOrthogonal,
                    "blocks " + std::to_string(i + 1) + " and " + std::to_string(j + 1) + ": " + std::to_string(c));
    }

  if (seed) {
    for (int i = 0; i < f.k(); ++i) {
      const int q = f.rank(i);
      if (q < 2) continue;
      const Matrix Q = detail::random_orthogonal(q, counter_seed(*seed, static_cast<std::uint64_t>(i)));
      f.vectors.middleCols(f.block_start[i], q) = (f.vectors.middleCols(f.block_start[i], q) * Q).eval();
    }
  }
  return f;
}

/// Second fundamental form, integrability tensor and mean curvature of one block
/// and of its complement, stored by their values on the adapted frame.
struct FundamentalData {
  int block = 0;
  std::vector<int> cols;       // frame columns of D_i
  std::vector<int> perp_cols;  // frame columns of D_i^⊥
  // h[a][b] = h_i(e_cols[a], e_cols[b]) ∈ D_i^⊥ (coordinate components)
  std::vector<std::vector<Vector>> h, T;
  std::vector<std::vector<Vector>> h_perp, T_perp;
  Vector H, H_perp;
  double norm_h_sq = 0, norm_T_sq = 0, norm_H_sq = 0;
  double norm_h_perp_sq = 0, norm_T_perp_sq = 0, norm_H_perp_sq = 0;
  double umbilic_deviation = 0;       // ‖h_i − (H_i/n_i) g‖²
  double umbilic_deviation_perp = 0;  // same for D_i^⊥
};

struct FrameGeometry {
  AdaptedFrame frame;
  Tensor3 gamma;
  /// nabla[a][b] = ∇_{e_a} e_b
  std::vector<std::vector<Vector>> nabla;
  std::vector<FundamentalData> blocks;
};

namespace detail {

inline FundamentalData block_data(const FrameGeometry& fg, int i) {
  const AdaptedFrame& f = fg.frame;
  const Matrix& g = f.metric;
  const int n = static_cast<int>(f.vectors.cols());
  FundamentalData fd;
  fd.block = i;
  for (int a = 0; a < n; ++a) (f.block_index[a] == i ? fd.cols : fd.perp_cols).push_back(a);

  auto project = [&](const Vector& v, const std::vector<int>& onto) {
    Vector r = Vector::Zero(n);
    for (int c : onto) r += g_inner(g, v, f.vectors.col(c)) * f.vectors.col(c);
    return r;
  };
  auto fill = [&](const std::vector<int>& own, const std::vector<int>& other, std::vector<std::vector<Vector>>& h,
                  std::vector<std::vector<Vector>>& T, Vector& H, double& nh, double& nT, double& nH,
                  double& umb) {
    const int q = static_cast<int>(own.size());
    h.assign(q, std::vector<Vector>(q));
    T.assign(q, std::vector<Vector>(q));
    H = Vector::Zero(n);
    nh = nT = 0;
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b) {
        const Vector& ab = fg.nabla[own[a]][own[b]];
        const Vector& ba = fg.nabla[own[b]][own[a]];
        h[a][b] = 0.5 * project(ab + ba, other);
        T[a][b] = 0.5 * project(ab - ba, other);
        nh += g_norm_sq(g, h[a][b]);
        nT += g_norm_sq(g, T[a][b]);
      }
    for (int a = 0; a < q; ++a) H += h[a][a];
    nH = g_norm_sq(g, H);
    umb = 0;
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b) {
        Vector dev = h[a][b];
        if (a == b) dev -= H / q;
        umb += g_norm_sq(g, dev);
      }
  };
  fill(fd.cols, fd.perp_cols, fd.h, fd.T, fd.H, fd.norm_h_sq, fd.norm_T_sq, fd.norm_H_sq, fd.umbilic_deviation);
  fill(fd.perp_cols, fd.cols, fd.h_perp, fd.T_perp, fd.H_perp, fd.norm_h_perp_sq, fd.norm_T_perp_sq,
       fd.norm_H_perp_sq, fd.umbilic_deviation_perp);
  return fd;
}

}  // namespace detail

/// Frame, connection coefficients, ∇_{e_a}e_b and every block's fundamental data at x.
inline FrameGeometry frame_geometry(const DistributionSet& d, const Vector& x, const DiffConfig& cfg = {},
                                    std::optional<std::uint64_t> seed = {}) {
  const ChartManifold& m = d.manifold;
  const int n = m.dim;
  FrameGeometry fg;
  fg.gamma = christoffel(m, x, cfg);
  fg.frame = adapted_frame(d, x, seed);
  const Matrix& E = fg.frame.vectors;

  auto frame_field = [&](const Vector& y) -> Matrix { return adapted_frame(d, y, seed).vectors; };
  std::vector<Matrix> dE(n);
  for (int c = 0; c < n; ++c) dE[c] = fd::first(frame_field, x, c, cfg);

  fg.nabla.assign(n, std::vector<Vector>(n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      Vector w = Vector::Zero(n);
      for (int c = 0; c < n; ++c) w += E(c, a) * dE[c].col(b);
      for (int k = 0; k < n; ++k) {
        double s = 0;
        for (int c = 0; c < n; ++c)
          for (int e = 0; e < n; ++e) s += fg.gamma(k, c, e) * E(c, a) * E(e, b);
        w[k] += s;
      }
      fg.nabla[a][b] = w;
    }
  for (int i = 0; i < fg.frame.k(); ++i) fg.blocks.push_back(detail::block_data(fg, i));
  return fg;
}

inline FundamentalData fundamental_data(const DistributionSet& d, int i, const Vector& x, const DiffConfig& cfg = {},
                                        std::optional<std::uint64_t> seed = {}) {
  if (i < 0 || i >= d.k()) throw Error(ErrorKind::DimensionMismatch, "block index out of range");
  return frame_geometry(d, x, cfg, seed).blocks[i];
}

struct CurvatureDecomposition {
  Matrix pairwise;  // S_mix(D_i, D_j), symmetric with zero diagonal
  double total = 0;
  std::vector<double> per_block_tau;
  std::vector<double> smix_complement;  // S_mix(D_i, D_i^⊥)
  double tau = 0;
};

/// Sectional curvatures of all frame planes: K(a,b) = K(e_a, e_b), zero diagonal.
inline Matrix frame_sectional(const CurvatureAtPoint& c, const Matrix& E) {
  const int n = static_cast<int>(E.cols());
  Matrix K = Matrix::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      K(a, b) = c.riemann(E.col(a), E.col(b), E.col(a), E.col(b));
      K(b, a) = K(a, b);
    }
  return K;
}

inline CurvatureDecomposition decompose(const CurvatureAtPoint& curv, const AdaptedFrame& f) {
  const Matrix K = frame_sectional(curv, f.vectors);
  const int k = f.k();
  const int n = static_cast<int>(f.vectors.cols());
  CurvatureDecomposition out;
  out.pairwise = Matrix::Zero(k, k);
  out.per_block_tau.assign(k, 0.0);
  out.smix_complement.assign(k, 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      const int i = f.block_index[a], j = f.block_index[b];
      if (i == j) out.per_block_tau[i] += K(a, b);
      else {
        if (a < b) {
          out.pairwise(i, j) += K(a, b);
          if (i != j) out.pairwise(j, i) += K(a, b);
        }
        out.smix_complement[i] += K(a, b);
      }
    }
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) out.total += out.pairwise(i, j);
  out.tau = curv.tau;
  return out;
}

inline CurvatureDecomposition curvature_decomposition(const DistributionSet& d, const Vector& x,
                                                      const DiffConfig& cfg = {},
                                                      std::optional<std::uint64_t> seed = {}) {
  return decompose(curvature_at(d.manifold, x, cfg), adapted_frame(d, x, seed));
}

// ---------------------------------------------------------------------------
// structural identities

enum class StructuralIdentity { PW, PW3K, UMB, SMIX3, DKSMIX };

inline std::string_view to_string(StructuralIdentity id) {
  switch (id) {
    case StructuralIdentity::PW: return "PW";
    case StructuralIdentity::PW3K: return "PW3K";
    case StructuralIdentity::UMB: return "UMB";
    case StructuralIdentity::SMIX3: return "SMIX3";
    case StructuralIdentity::DKSMIX: return "DKSMIX";
  }
  return "?";
}

struct IdentityResult {
  double lhs = 0;
  double rhs = 0;
  double residual = 0;
};

/// Both sides evaluated on independent paths: the divergence side differentiates
/// the mean-curvature field numerically, the other side uses frame data and the
/// curvature tensor at x. `block` selects D_1 for PW (zero-based).
inline IdentityResult evaluate_structural_identity(StructuralIdentity id, const DistributionSet& d, const Vector& x,
                                                   const DiffConfig& cfg = {}, int block = 0) {
  IdentityResult r;
  switch (id) {
    case StructuralIdentity::SMIX3: {
      const auto dec = curvature_decomposition(d, x, cfg);
      r.lhs = dec.tau;
      r.rhs = 2.0 * dec.total;
      for (double t : dec.per_block_tau) r.rhs += t;
      break;
    }
    case StructuralIdentity::DKSMIX: {
      const auto dec = curvature_decomposition(d, x, cfg);
      r.lhs = 2.0 * dec.total;
      for (double s : dec.smix_complement) r.rhs += s;
      break;
    }
    case StructuralIdentity::PW: {
      if (block < 0 || block >= d.k()) throw Error(ErrorKind::DimensionMismatch, "block index out of range");
      auto xi = [&](const Vector& y) -> Vector {
        const auto fg = frame_geometry(d, y, cfg);
        return fg.blocks[block].H + fg.blocks[block].H_perp;
      };
      r.lhs = divergence(d.manifold, xi, x, cfg);
      const auto fg = frame_geometry(d, x, cfg);
      const auto& b = fg.blocks[block];
      const auto dec = decompose(curvature_at(d.manifold, x, cfg), fg.frame);
      r.rhs = dec.smix_complement[block] + b.norm_h_sq + b.norm_h_perp_sq - b.norm_H_sq - b.norm_H_perp_sq -
              b.norm_T_sq - b.norm_T_perp_sq;
      break;
    }
    case StructuralIdentity::PW3K:
    case StructuralIdentity::UMB: {
      const auto fg = frame_geometry(d, x, cfg);
      if (id == StructuralIdentity::UMB) {
        for (const auto& b : fg.blocks) {
          const double dev = std::max(b.umbilic_deviation, b.umbilic_deviation_perp);
          if (dev > 1e-6)
            throw Error(ErrorKind::NotUmbilic,
                        "block " + std::to_string(b.block + 1) + " deviation " + std::to_string(dev));
        }
      }
      auto xi = [&](const Vector& y) -> Vector {
        const auto g = frame_geometry(d, y, cfg);
        Vector s = Vector::Zero(d.manifold.dim);
        for (const auto& b : g.blocks) s += b.H + b.H_perp;
        return s;
      };
      r.lhs = divergence(d.manifold, xi, x, cfg);
      const auto dec = decompose(curvature_at(d.manifold, x, cfg), fg.frame);
      r.rhs = 2.0 * dec.total;
      const int n = d.manifold.dim;
      for (const auto& b : fg.blocks) {
        if (id == StructuralIdentity::PW3K) {
          r.rhs += b.norm_h_sq - b.norm_H_sq - b.norm_T_sq + b.norm_h_perp_sq - b.norm_H_perp_sq - b.norm_T_perp_sq;
        } else {
          const double ni = static_cast<double>(b.cols.size());
          const double np = static_cast<double>(n) - ni;
          r.rhs -= (ni - 1.0) / ni * b.norm_H_sq + (np - 1.0) / np * b.norm_H_perp_sq + b.norm_T_sq + b.norm_T_perp_sq;
        }
      }
      break;
    }
  }
  r.residual = std::abs(r.lhs - r.rhs);
  return r;
}

inline double check_structural_identity(StructuralIdentity id, const DistributionSet& d, const Vector& x,
                                        const DiffConfig& cfg = {}) {
  return evaluate_structural_identity(id, d, x, cfg).residual;
}

}  // namespace mixedcurv
