#pragma once

// Extremal curvature invariants: suprema of the ambient mixed scalar curvature
// over orthonormal subspace configurations, found by random-restart ascent
// with Givens rotations, plus closed forms on space forms.

#include "mixedcurv/structure.hpp"

#include <algorithm>
#include <numeric>

namespace mixedcurv {

/// k pairwise orthogonal subspaces at a point: ḡ-orthonormal columns grouped by rank.
struct SubspaceConfig {
  Vector point;
  Matrix basis;  // N × Σn_i, coordinates
  std::vector<int> ranks;

  int total_rank() const { return std::accumulate(ranks.begin(), ranks.end(), 0); }
  std::vector<int> labels() const {
    std::vector<int> l;
    for (int i = 0; i < static_cast<int>(ranks.size()); ++i) l.insert(l.end(), ranks[i], i);
    return l;
  }
};

struct OptimizerParams {
  int restarts = 64;
  int max_iters = 500;
  double ascent_tol = 1e-8;
  double rotation_step0 = 0.1;
  std::uint64_t seed = 0;
  int grid_per_axis = 9;
  int max_points = 4096;
  /// Sampling box; defaults to the ambient domain, with infinite sides replaced by a unit window.
  std::optional<std::vector<Interval>> region;
  /// Explicit sample points override the grid.
  std::optional<std::vector<Vector>> points;
  unsigned threads = 1;
  bool record_traces = false;
  DiffConfig diff{};
};

enum class ObjectiveKind { SMIX, SMIX_CONSTRAINED, NEG_SUM_BLOCK_TAU, QRICCI };

struct Objective {
  ObjectiveKind kind = ObjectiveKind::SMIX;
  std::optional<DistributionSet> distributions;  // SMIX_CONSTRAINED only
  int q = 0;                                     // QRICCI only

  static Objective smix() { return {}; }
  static Objective constrained(DistributionSet d) { return {ObjectiveKind::SMIX_CONSTRAINED, std::move(d), 0}; }
  static Objective neg_sum_block_tau() { return {ObjectiveKind::NEG_SUM_BLOCK_TAU, {}, 0}; }
  static Objective qricci(int q) { return {ObjectiveKind::QRICCI, {}, q}; }
};

struct PointValue {
  Vector point;
  double value = 0;
};

struct ExtremalResult {
  double value = 0;
  SubspaceConfig argmax;
  std::vector<PointValue> per_point_field;
  int iterations = 0;
  int restarts_used = 0;
  /// Always true: a finite search only bounds the supremum from below.
  bool certified_lower_bound = true;
  bool closed_form = false;
  /// Optimizer value used to cross-check a closed form.
  std::optional<double> cross_check;
  /// restart_values[point][restart]: final objective of every restart.
  std::vector<std::vector<double>> restart_values;
  /// traces[point][restart]: objective after every sweep (record_traces only).
  std::vector<std::vector<std::vector<double>>> traces;
};

// ---------------------------------------------------------------------------
// evaluation of configurations

namespace detail {

inline void require_orthonormal(const Matrix& g, const Matrix& basis) {
  const Matrix G = basis.transpose() * g * basis;
  const double err = (G - Matrix::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
  if (err > 1e-10) throw Error(ErrorKind::NotOrthonormal, "Gram error " + std::to_string(err));
}

/// Completes ḡ-orthonormal columns to a full ḡ-orthonormal basis.
inline Matrix complete_basis(const Matrix& g, const Matrix& cols) {
  const int N = static_cast<int>(g.rows());
  std::vector<Vector> vs;
  for (int a = 0; a < cols.cols(); ++a) vs.push_back(cols.col(a));
  for (int e = 0; e < N && static_cast<int>(vs.size()) < N; ++e) {
    Vector v = g_orthogonalize(g, vs, Vector::Unit(N, e));
    const double len = std::sqrt(g_norm_sq(g, v));
    if (len > 1e-6) vs.push_back(v / len);
  }
  Matrix B(N, N);
  for (int a = 0; a < N; ++a) B.col(a) = vs[a];
  return B;
}

}  // namespace detail

/// S̄_mix(V_1,…,V_k) = Σ_{i<j} Σ_{a∈V_i, b∈V_j} K̄(e_a, e_b).
inline double smix_of_config(const CurvatureAtPoint& curv, const SubspaceConfig& c) {
  detail::require_orthonormal(curv.metric, c.basis);
  const auto lab = c.labels();
  double s = 0;
  for (int a = 0; a < c.basis.cols(); ++a)
    for (int b = a + 1; b < c.basis.cols(); ++b)
      if (lab[a] != lab[b]) s += curv.riemann(c.basis.col(a), c.basis.col(b), c.basis.col(a), c.basis.col(b));
  return s;
}

inline double smix_of_config(const ChartManifold& ambient, const SubspaceConfig& c, const DiffConfig& cfg = {}) {
  if (c.basis.rows() != ambient.dim || c.total_rank() != c.basis.cols())
    throw Error(ErrorKind::DimensionMismatch, "configuration does not fit the ambient chart");
  return smix_of_config(curvature_at(ambient, c.point, cfg), c);
}

/// Derivative at θ = 0 of S̄_mix under the Givens rotation of columns p, q of the
/// completed basis (columns ≥ Σn_i lie in the orthogonal complement): e_p' = e_q, e_q' = −e_p.
inline double smix_directional_derivative(const CurvatureAtPoint& curv, const SubspaceConfig& c, int p, int q) {
  detail::require_orthonormal(curv.metric, c.basis);
  const Matrix B = detail::complete_basis(curv.metric, c.basis);
  const int m = c.total_rank();
  const int N = static_cast<int>(B.rows());
  if (p < 0 || q < 0 || p >= N || q >= N || p == q) throw Error(ErrorKind::DimensionMismatch, "bad rotation pair");
  auto velocity = [&](int a) -> Vector {
    if (a == p) return B.col(q);
    if (a == q) return -B.col(p);
    return Vector::Zero(N);
  };
  const auto lab = c.labels();
  double s = 0;
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b) {
      if (lab[a] == lab[b]) continue;
      const Vector u = B.col(a), v = B.col(b);
      s += 2 * curv.riemann(velocity(a), v, u, v) + 2 * curv.riemann(u, velocity(b), u, v);
    }
  return s;
}

/// The configuration rotated by θ in the (p, q) plane of the completed basis.
inline SubspaceConfig rotate_config(const Matrix& g, const SubspaceConfig& c, int p, int q, double theta) {
  Matrix B = detail::complete_basis(g, c.basis);
  const Vector bp = B.col(p), bq = B.col(q);
  B.col(p) = std::cos(theta) * bp + std::sin(theta) * bq;
  B.col(q) = -std::sin(theta) * bp + std::cos(theta) * bq;
  SubspaceConfig out = c;
  out.basis = B.leftCols(c.total_rank());
  return out;
}

/// Haar-random configuration of the given ranks at x.
inline SubspaceConfig random_config(const Matrix& g, const Vector& x, std::vector<int> ranks, std::uint64_t seed) {
  const int N = static_cast<int>(g.rows());
  SubspaceConfig c;
  c.point = x;
  c.ranks = std::move(ranks);
  const Matrix O = detail::random_orthogonal(N, seed);
  c.basis = g_orthonormal_basis(g) * O.leftCols(c.total_rank());
  return c;
}

// ---------------------------------------------------------------------------
// ascent

namespace detail {

/// One sample point of a maximization problem, expressed in a ḡ-orthonormal working basis.
struct PointProblem {
  Vector point;
  Matrix working;         // N×N, columns ḡ-orthonormal
  Tensor4 R;              // curvature in the working basis
  std::vector<int> group; // rotations only mix columns of the same group
  std::vector<int> label; // subspace of each column, or −1
  ObjectiveKind kind = ObjectiveKind::SMIX;

  double weight(int i, int j) const {
    if (i < 0 || j < 0) return 0.0;
    if (kind == ObjectiveKind::NEG_SUM_BLOCK_TAU) return i == j ? -2.0 : 0.0;
    return i != j ? 1.0 : 0.0;
  }
};

/// S_a(i,k) = Σ_{j,l} R(i,j,k,l) o_j o_l, so K(u, o) = uᵀ S u for orthonormal u ⟂ o.
inline Matrix sandwich(const Tensor4& R, const Vector& o) {
  const int N = R.dim();
  Matrix S = Matrix::Zero(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      if (o[j] == 0.0) continue;
      for (int k = 0; k < N; ++k) {
        double acc = 0;
        for (int l = 0; l < N; ++l) acc += R(i, j, k, l) * o[l];
        S(i, k) += o[j] * acc;
      }
    }
  return S;
}

inline double objective_value(const PointProblem& pb, const Matrix& O) {
  const int N = static_cast<int>(O.cols());
  double f = 0;
  for (int a = 0; a < N; ++a)
    for (int b = a + 1; b < N; ++b) {
      const double w = pb.weight(pb.label[a], pb.label[b]);
      if (w != 0.0) f += w * pb.R.contract(O.col(a), O.col(b), O.col(a), O.col(b));
    }
  return f;
}

struct AscentOutcome {
  double value = 0;
  Matrix O;
  int sweeps = 0;
  std::vector<double> trace;
};

inline AscentOutcome ascend(const PointProblem& pb, Matrix O, const OptimizerParams& params) {
  const int N = static_cast<int>(O.cols());
  std::vector<std::pair<int, int>> pairs;
  for (int p = 0; p < N; ++p)
    for (int q = p + 1; q < N; ++q)
      if (pb.group[p] == pb.group[q] && pb.label[p] != pb.label[q]) pairs.emplace_back(p, q);

  std::vector<Matrix> S(N);
  for (int a = 0; a < N; ++a)
    if (pb.label[a] >= 0) S[a] = sandwich(pb.R, O.col(a));

  AscentOutcome out;
  double f = objective_value(pb, O);
  if (params.record_traces) out.trace.push_back(f);
  constexpr double armijo = 1e-4;
  for (int sweep = 0; sweep < params.max_iters; ++sweep) {
    const double f_start = f;
    double max_slope = 0;
    for (const auto& [p, q] : pairs) {
      const Vector u = O.col(p), w = O.col(q);
      // along the rotation the objective is f + α(cos2θ − 1) + β sin2θ
      double alpha = 0, beta = 0;
      for (int b = 0; b < N; ++b) {
        if (b == p || b == q || pb.label[b] < 0) continue;
        const double dw = pb.weight(pb.label[p], pb.label[b]) - pb.weight(pb.label[q], pb.label[b]);
        if (dw == 0.0) continue;
        const Vector Su = S[b] * u;
        alpha += dw * 0.5 * (u.dot(Su) - w.dot(S[b] * w));
        beta += dw * w.dot(Su);
      }
      const double slope = 2 * beta;
      max_slope = std::max(max_slope, std::abs(slope));
      if (std::abs(slope) < 1e-14) continue;
      const double dir = slope > 0 ? 1.0 : -1.0;
      auto gain = [&](double t) { return alpha * (std::cos(2 * dir * t) - 1) + beta * std::sin(2 * dir * t); };
      double t = params.rotation_step0;
      bool first_try = true;
      while (gain(t) < armijo * t * std::abs(slope)) {
        t *= 0.5;
        first_try = false;
        if (t < 1e-14) break;
      }
      if (t < 1e-14) continue;
      if (first_try)
        while (2 * t <= std::numbers::pi / 2 && gain(2 * t) > gain(t) && gain(2 * t) >= armijo * 2 * t * std::abs(slope))
          t *= 2;
      const double g = gain(t);
      if (!(g > 0)) continue;
      const double th = dir * t, c = std::cos(th), s = std::sin(th);
      O.col(p) = c * u + s * w;
      O.col(q) = -s * u + c * w;
      if (pb.label[p] >= 0) S[p] = sandwich(pb.R, O.col(p));
      if (pb.label[q] >= 0) S[q] = sandwich(pb.R, O.col(q));
      f += g;
    }
    // resynchronize with the exact objective so rounding never accumulates
    const double exact = objective_value(pb, O);
    out.sweeps = sweep + 1;
    if (params.record_traces) out.trace.push_back(exact);
    f = exact;
    if (exact - f_start <= params.ascent_tol || max_slope < 1e-10) break;
  }
  out.value = f;
  out.O = std::move(O);
  return out;
}

inline std::vector<Vector> region_points(const ChartManifold& ambient, const OptimizerParams& params) {
  if (params.points) {
    if (params.points->empty()) throw Error(ErrorKind::EmptyRegion, "no sample points");
    return *params.points;
  }
  const int N = ambient.dim;
  std::vector<Interval> box = params.region ? *params.region : ambient.domain;
  if (static_cast<int>(box.size()) != N) box.resize(N);
  if (params.grid_per_axis < 1 || params.max_points < 1) throw Error(ErrorKind::EmptyRegion, "grid has no points");
  int g = params.grid_per_axis;
  auto total = [N](int per) {
    double t = 1;
    for (int i = 0; i < N; ++i) t *= per;
    return t;
  };
  while (g > 1 && total(g) > params.max_points) --g;
  std::vector<std::vector<double>> axes(N);
  for (int i = 0; i < N; ++i) {
    double lo = box[i].lower, hi = box[i].upper;
    if (!std::isfinite(lo) && !std::isfinite(hi)) lo = -1, hi = 1;
    else if (!std::isfinite(lo)) lo = hi - 2;
    else if (!std::isfinite(hi)) hi = lo + 2;
    if (!(hi > lo)) throw Error(ErrorKind::EmptyRegion, "axis " + ambient.coord_name(i) + " is empty");
    for (int j = 0; j < g; ++j) axes[i].push_back(lo + (j + 0.5) * (hi - lo) / g);
  }
  std::vector<Vector> pts;
  std::vector<int> idx(N, 0);
  for (;;) {
    Vector x(N);
    for (int i = 0; i < N; ++i) x[i] = axes[i][idx[i]];
    pts.push_back(x);
    int i = N - 1;
    while (i >= 0 && ++idx[i] == g) idx[i--] = 0;
    if (i < 0) break;
  }
  return pts;
}

inline void check_ranks(const std::vector<int>& ranks, int N, std::size_t min_blocks) {
  if (ranks.size() < min_blocks) throw Error(ErrorKind::InfeasibleRanks, "need at least " + std::to_string(min_blocks) + " subspaces");
  int s = 0;
  for (int r : ranks) {
    if (r < 1) throw Error(ErrorKind::InfeasibleRanks, "ranks must be positive");
    s += r;
  }
  if (s > N)
    throw Error(ErrorKind::InfeasibleRanks, "ranks sum to " + std::to_string(s) + " > dimension " + std::to_string(N));
}

inline PointProblem make_problem(const ChartManifold& ambient, const CurvatureAtPoint& curv, const std::vector<int>& ranks,
                                 const Objective& obj) {
  const int N = ambient.dim;
  PointProblem pb;
  pb.point = curv.point;
  pb.kind = obj.kind;
  pb.label.assign(N, -1);
  pb.group.assign(N, 0);
  if (obj.kind == ObjectiveKind::SMIX_CONSTRAINED) {
    const DistributionSet& d = *obj.distributions;
    const AdaptedFrame f = adapted_frame(d, curv.point);
    pb.working = f.vectors;
    for (int i = 0; i < d.k(); ++i) {
      if (ranks[i] > f.rank(i))
        throw Error(ErrorKind::RanksExceedDistribution, "rank " + std::to_string(ranks[i]) + " requested inside a distribution of rank " +
                                                            std::to_string(f.rank(i)));
      for (int a = f.block_start[i]; a < f.block_start[i + 1]; ++a) {
        pb.group[a] = i;
        if (a - f.block_start[i] < ranks[i]) pb.label[a] = i;
      }
    }
  } else {
    pb.working = g_orthonormal_basis(curv.metric);
    int col = 0;
    for (int i = 0; i < static_cast<int>(ranks.size()); ++i)
      for (int r = 0; r < ranks[i]; ++r) pb.label[col++] = i;
  }
  pb.R = curv.riemann_lowered.transformed(pb.working);
  return pb;
}

inline Matrix initial_rotation(const PointProblem& pb, std::uint64_t seed) {
  const int N = static_cast<int>(pb.group.size());
  Matrix O = Matrix::Identity(N, N);
  const int groups = *std::max_element(pb.group.begin(), pb.group.end()) + 1;
  for (int gi = 0; gi < groups; ++gi) {
    std::vector<int> cols;
    for (int a = 0; a < N; ++a)
      if (pb.group[a] == gi) cols.push_back(a);
    const int q = static_cast<int>(cols.size());
    if (q < 2) continue;
    const Matrix Q = random_orthogonal(q, counter_seed(seed, static_cast<std::uint64_t>(gi), 77));
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j) O(cols[i], cols[j]) = Q(i, j);
  }
  return O;
}

struct PointOutcome {
  double value = -std::numeric_limits<double>::infinity();
  SubspaceConfig best;
  int sweeps = 0;
  std::vector<double> restart_values;
  std::vector<std::vector<double>> traces;
};

/// Random-restart ascent at one point; `post` maps (curvature, best objective) to the reported value.
template <class Post>
PointOutcome solve_point(const ChartManifold& ambient, const Vector& x, std::size_t point_index, const std::vector<int>& ranks,
                         const Objective& obj, const OptimizerParams& params, const Post& post) {
  const CurvatureAtPoint curv = curvature_at(ambient, x, params.diff);
  const PointProblem pb = make_problem(ambient, curv, ranks, obj);
  PointOutcome out;
  double best_raw = -std::numeric_limits<double>::infinity();
  Matrix best_O;
  for (int r = 0; r < params.restarts; ++r) {
    const auto seed = counter_seed(params.seed, point_index, static_cast<std::uint64_t>(r));
    AscentOutcome a = ascend(pb, initial_rotation(pb, seed), params);
    out.sweeps += a.sweeps;
    out.restart_values.push_back(post(curv, a.value));
    if (params.record_traces) out.traces.push_back(std::move(a.trace));
    if (a.value > best_raw) {
      best_raw = a.value;
      best_O = std::move(a.O);
    }
  }
  out.value = post(curv, best_raw);
  out.best.point = x;
  out.best.ranks = ranks;
  const Matrix cols = pb.working * best_O;
  std::vector<int> sel;
  for (int i = 0; i < static_cast<int>(ranks.size()); ++i)
    for (int a = 0; a < static_cast<int>(pb.label.size()); ++a)
      if (pb.label[a] == i) sel.push_back(a);
  out.best.basis.resize(ambient.dim, static_cast<int>(sel.size()));
  for (std::size_t j = 0; j < sel.size(); ++j) out.best.basis.col(static_cast<int>(j)) = cols.col(sel[j]);
  return out;
}

template <class Post>
ExtremalResult run_region(const ChartManifold& ambient, const std::vector<int>& ranks, const Objective& obj,
                          const OptimizerParams& params, const Post& post) {
  if (params.restarts < 1 || params.max_iters < 1 || !(params.rotation_step0 > 0) || !(params.ascent_tol > 0))
    throw Error(ErrorKind::ValidationError, "optimizer parameters must be positive");
  const auto pts = region_points(ambient, params);
  std::vector<PointOutcome> slots(pts.size());
  parallel_for(
      pts.size(), [&](std::size_t i) { slots[i] = solve_point(ambient, pts[i], i, ranks, obj, params, post); },
      params.threads);
  ExtremalResult res;
  res.value = -std::numeric_limits<double>::infinity();
  std::size_t best = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    res.per_point_field.push_back({pts[i], slots[i].value});
    res.iterations += slots[i].sweeps;
    res.restarts_used += params.restarts;
    res.restart_values.push_back(std::move(slots[i].restart_values));
    if (params.record_traces) res.traces.push_back(std::move(slots[i].traces));
    if (slots[i].value > res.value) {
      res.value = slots[i].value;
      best = i;
    }
  }
  res.argmax = std::move(slots[best].best);
  return res;
}

inline double identity_post(const CurvatureAtPoint&, double v) { return v; }

}  // namespace detail

/// Maximizes the chosen objective over configurations at every sample point; the
/// result is the largest value found (a lower bound of the supremum).
inline ExtremalResult optimize_config(const ChartManifold& ambient, std::vector<int> ranks, const Objective& obj,
                                      const OptimizerParams& params = {}) {
  const int N = ambient.dim;
  switch (obj.kind) {
    case ObjectiveKind::QRICCI:
      if (obj.q < 1 || obj.q > N - 1) throw Error(ErrorKind::InfeasibleRanks, "q must lie in [1, dim-1]");
      ranks = {1, obj.q};
      break;
    case ObjectiveKind::SMIX_CONSTRAINED:
      if (!obj.distributions) throw Error(ErrorKind::PrerequisiteNotMet, "constrained objective needs distributions");
      if (obj.distributions->manifold.dim != N) throw Error(ErrorKind::DimensionMismatch, "distributions live on another chart");
      if (static_cast<int>(ranks.size()) != obj.distributions->k())
        throw Error(ErrorKind::DimensionMismatch, "one rank per ambient distribution is required");
      break;
    default: break;
  }
  detail::check_ranks(ranks, N, obj.kind == ObjectiveKind::NEG_SUM_BLOCK_TAU ? 1 : 2);
  return detail::run_region(ambient, ranks, obj, params, detail::identity_post);
}

/// c·Σ_{i<j} n_i n_j for a space form of curvature c.
inline double space_form_delta_mix(double c, const std::vector<int>& ranks) {
  double s = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i)
    for (std::size_t j = i + 1; j < ranks.size(); ++j) s += static_cast<double>(ranks[i]) * ranks[j];
  return c * s;
}

/// δ̄_mix(n_1,…,n_k). Space forms use the closed form, cross-checked by the
/// optimizer at the first sample point.
inline ExtremalResult delta_mix(const ChartManifold& ambient, const std::vector<int>& ranks, const OptimizerParams& params = {}) {
  if (!ambient.constant_curvature) return optimize_config(ambient, ranks, Objective::smix(), params);
  detail::check_ranks(ranks, ambient.dim, 2);
  OptimizerParams one = params;
  one.points = std::vector<Vector>{detail::region_points(ambient, params).front()};
  ExtremalResult res = optimize_config(ambient, ranks, Objective::smix(), one);
  res.cross_check = res.value;
  res.value = space_form_delta_mix(*ambient.constant_curvature, ranks);
  res.closed_form = true;
  return res;
}

/// δ̂_mix: subspaces constrained inside the ambient distributions.
inline ExtremalResult hat_delta_mix(const DistributionSet& ambient_distributions, const std::vector<int>& ranks,
                                    const OptimizerParams& params = {}) {
  return optimize_config(ambient_distributions.manifold, ranks, Objective::constrained(ambient_distributions), params);
}

/// Chen's invariant in half-trace bookkeeping: τ_h = τ/2, δ = τ_h − inf Σ τ_h(V_i),
/// maximized over the sample region.
inline ExtremalResult chen_delta_result(const ChartManifold& ambient, const std::vector<int>& ranks,
                                        const OptimizerParams& params = {}) {
  detail::check_ranks(ranks, ambient.dim, 1);
  // the objective is −Σ τ(V_i) in full-trace units
  auto post = [](const CurvatureAtPoint& curv, double neg_sum_tau) { return 0.5 * curv.tau + 0.5 * neg_sum_tau; };
  return detail::run_region(ambient, ranks, Objective::neg_sum_block_tau(), params, post);
}

inline double chen_delta(const ChartManifold& ambient, const std::vector<int>& ranks, const OptimizerParams& params = {}) {
  return chen_delta_result(ambient, ranks, params).value;
}

/// r̄_q = sup Σ_{i=1}^q K̄(E_0, E_i) = δ̄_mix(1, q).
inline double qth_ricci_sup(const ChartManifold& ambient, int q, const OptimizerParams& params = {}) {
  return optimize_config(ambient, {}, Objective::qricci(q), params).value;
}

}  // namespace mixedcurv
