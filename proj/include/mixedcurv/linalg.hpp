#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace mixedcurv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Dense rank-3 array, index (a,b,c) with a slowest.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(int n) : n_(n), data_(static_cast<std::size_t>(n) * n * n, 0.0) {}

  int dim() const { return n_; }
  double& operator()(int a, int b, int c) { return data_[(static_cast<std::size_t>(a) * n_ + b) * n_ + c]; }
  double operator()(int a, int b, int c) const { return data_[(static_cast<std::size_t>(a) * n_ + b) * n_ + c]; }
  const std::vector<double>& data() const { return data_; }

 private:
  int n_ = 0;
  std::vector<double> data_;
};

/// Dense rank-4 array, index (a,b,c,d) with a slowest.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(int n) : n_(n), data_(static_cast<std::size_t>(n) * n * n * n, 0.0) {}

  int dim() const { return n_; }
  double& operator()(int a, int b, int c, int d) { return data_[idx(a, b, c, d)]; }
  double operator()(int a, int b, int c, int d) const { return data_[idx(a, b, c, d)]; }
  const std::vector<double>& data() const { return data_; }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  /// Full contraction T(u,v,w,z).
  double contract(const Vector& u, const Vector& v, const Vector& w, const Vector& z) const {
    double s = 0.0;
    for (int a = 0; a < n_; ++a) {
      if (u[a] == 0.0) continue;
      for (int b = 0; b < n_; ++b) {
        const double ub = u[a] * v[b];
        if (ub == 0.0) continue;
        for (int c = 0; c < n_; ++c) {
          const double ubc = ub * w[c];
          if (ubc == 0.0) continue;
          const double* row = &data_[idx(a, b, c, 0)];
          for (int d = 0; d < n_; ++d) s += ubc * row[d] * z[d];
        }
      }
    }
    return s;
  }

  /// Change of basis: result(p,q,r,s) = T(B_p, B_q, B_r, B_s) for the columns of B.
  Tensor4 transformed(const Matrix& B) const {
    const int m = static_cast<int>(B.cols());
    // one index at a time keeps this O(n^5)
    Tensor4 out(m);
    std::vector<double> t1(static_cast<std::size_t>(m) * n_ * n_ * n_, 0.0);
    for (int p = 0; p < m; ++p)
      for (int a = 0; a < n_; ++a) {
        const double w = B(a, p);
        if (w == 0.0) continue;
        for (std::size_t r = 0; r < static_cast<std::size_t>(n_) * n_ * n_; ++r)
          t1[p * static_cast<std::size_t>(n_) * n_ * n_ + r] += w * data_[a * static_cast<std::size_t>(n_) * n_ * n_ + r];
      }
    std::vector<double> t2(static_cast<std::size_t>(m) * m * n_ * n_, 0.0);
    for (int p = 0; p < m; ++p)
      for (int q = 0; q < m; ++q)
        for (int b = 0; b < n_; ++b) {
          const double w = B(b, q);
          if (w == 0.0) continue;
          for (std::size_t r = 0; r < static_cast<std::size_t>(n_) * n_; ++r)
            t2[(static_cast<std::size_t>(p) * m + q) * n_ * n_ + r] +=
                w * t1[(static_cast<std::size_t>(p) * n_ + b) * n_ * n_ + r];
        }
    std::vector<double> t3(static_cast<std::size_t>(m) * m * m * n_, 0.0);
    for (int pq = 0; pq < m * m; ++pq)
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < n_; ++c) {
          const double w = B(c, r);
          if (w == 0.0) continue;
          for (int d = 0; d < n_; ++d)
            t3[(static_cast<std::size_t>(pq) * m + r) * n_ + d] += w * t2[(static_cast<std::size_t>(pq) * n_ + c) * n_ + d];
        }
    for (int pqr = 0; pqr < m * m * m; ++pqr)
      for (int s = 0; s < m; ++s) {
        double acc = 0.0;
        for (int d = 0; d < n_; ++d) acc += B(d, s) * t3[static_cast<std::size_t>(pqr) * n_ + d];
        out.data_[static_cast<std::size_t>(pqr) * m + s] = acc;
      }
    return out;
  }

 private:
  std::size_t idx(int a, int b, int c, int d) const {
    return ((static_cast<std::size_t>(a) * n_ + b) * n_ + c) * n_ + d;
  }

  int n_ = 0;
  std::vector<double> data_;
};

inline double g_inner(const Matrix& g, const Vector& u, const Vector& v) { return u.dot(g * v); }

inline double g_norm_sq(const Matrix& g, const Vector& u) { return u.dot(g * u); }

/// Modified Gram-Schmidt of `v` against the g-orthonormal columns already in `basis`.
/// Returns the unnormalized remainder.
inline Vector g_orthogonalize(const Matrix& g, const std::vector<Vector>& basis, Vector v) {
  for (const auto& e : basis) v -= g_inner(g, e, v) * e;
  // second pass keeps the frame orthonormal to ~1e-15 on nearly parallel inputs
  for (const auto& e : basis) v -= g_inner(g, e, v) * e;
  return v;
}

/// A basis whose columns are g-orthonormal: B^T g B = I.
inline Matrix g_orthonormal_basis(const Matrix& g) {
  Eigen::LLT<Matrix> llt(g);
  const Matrix L = llt.matrixL();
  return L.transpose().triangularView<Eigen::Upper>().solve(Matrix::Identity(g.rows(), g.cols()));
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for work unit (a, b) under a master seed; independent of evaluation order.
inline std::uint64_t counter_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(master ^ splitmix64(a * 0x632BE59BD9B4E019ULL + splitmix64(b + 0x1234567ULL)));
}

/// Runs f(i) for i in [0, count); each index writes only its own result slot,
/// so output is identical for any thread count.
template <class F>
void parallel_for(std::size_t count, F&& f, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) f(i);
        } catch (...) {
          errors[t] = std::current_exception();
          next.store(count);
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace mixedcurv
