#pragma once

// Dense row-major double matrices and the deterministic product kernels used
// by training and evaluation. Every output element is accumulated as a single
// fused-multiply-add chain over the inner index in ascending order, written
// with explicit std::fma so block and remainder paths round identically.
// Results are therefore bit-stable across runs and across worker counts.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace actprobe {

class ShapeMismatch : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major, rows*cols

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double* row(std::size_t i) { return values.data() + i * cols; }
  const double* row(std::size_t i) const { return values.data() + i * cols; }

  double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
};

/// Worker count for internal parallelism. Defaults to ACTPROBE_WORKERS or,
/// failing that, the hardware concurrency. Never affects numeric results.
inline int& worker_count_ref() {
  static int count = [] {
    if (const char* env = std::getenv("ACTPROBE_WORKERS")) {
      const int parsed = std::atoi(env);
      if (parsed >= 1) return parsed;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
  }();
  return count;
}

inline int worker_count() { return worker_count_ref(); }
inline void set_worker_count(int n) { worker_count_ref() = n < 1 ? 1 : n; }

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t.values[j * a.rows + i] = a.values[i * a.cols + j];
  return t;
}

namespace detail {

// Runs body(lo, hi) over a partition of [0, count). Partitioning decides who
// computes an element, never what it sums.
template <typename F>
void parallel_ranges(std::size_t count, F&& body) {
  const int workers = worker_count();
  if (workers <= 1 || count < 64) {
    body(std::size_t{0}, count);
    return;
  }
  const std::size_t chunks = static_cast<std::size_t>(workers);
  const std::size_t step = (count + chunks - 1) / chunks;
  std::vector<std::thread> threads;
  threads.reserve(chunks);
  for (std::size_t lo = 0; lo < count; lo += step) {
    const std::size_t hi = lo + step < count ? lo + step : count;
    threads.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& t : threads) t.join();
}

// Rows [i0,i1) of C(n,m) = A(n,k) * B(k,m). Register-blocked 4 rows x 2 t
// steps; every path reduces to fma(a[t], b[t][j], acc) with t ascending.
inline void mm_nn_rows(const double* A, const double* B, double* C, std::size_t i0,
                       std::size_t i1, std::size_t k, std::size_t m) {
  std::size_t i = i0;
  for (; i + 4 <= i1; i += 4) {
    const double* a0 = A + i * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    double* c0 = C + i * m;
    double* c1 = c0 + m;
    double* c2 = c1 + m;
    double* c3 = c2 + m;
    for (std::size_t j = 0; j < m; ++j) c0[j] = c1[j] = c2[j] = c3[j] = 0.0;
    std::size_t t = 0;
    for (; t + 2 <= k; t += 2) {
      const double* b0 = B + t * m;
      const double* b1 = b0 + m;
      const double p0 = a0[t], p1 = a0[t + 1];
      const double q0 = a1[t], q1 = a1[t + 1];
      const double r0 = a2[t], r1 = a2[t + 1];
      const double s0 = a3[t], s1 = a3[t + 1];
      for (std::size_t j = 0; j < m; ++j) {
        const double v0 = b0[j], v1 = b1[j];
        c0[j] = std::fma(p1, v1, std::fma(p0, v0, c0[j]));
        c1[j] = std::fma(q1, v1, std::fma(q0, v0, c1[j]));
        c2[j] = std::fma(r1, v1, std::fma(r0, v0, c2[j]));
        c3[j] = std::fma(s1, v1, std::fma(s0, v0, c3[j]));
      }
    }
    for (; t < k; ++t) {
      const double* b = B + t * m;
      const double p = a0[t], q = a1[t], r = a2[t], s = a3[t];
      for (std::size_t j = 0; j < m; ++j) {
        const double v = b[j];
        c0[j] = std::fma(p, v, c0[j]);
        c1[j] = std::fma(q, v, c1[j]);
        c2[j] = std::fma(r, v, c2[j]);
        c3[j] = std::fma(s, v, c3[j]);
      }
    }
  }
  for (; i < i1; ++i) {
    const double* a = A + i * k;
    double* c = C + i * m;
    for (std::size_t j = 0; j < m; ++j) c[j] = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = a[t];
      const double* b = B + t * m;
      for (std::size_t j = 0; j < m; ++j) c[j] = std::fma(av, b[j], c[j]);
    }
  }
}

// Column slice [j0,j1) of C(m,p) = A(n,m)^T * B(n,p). The t loop stays
// outermost so A and B stream along contiguous rows while C stays hot.
inline void mm_tn_cols(const double* A, const double* B, double* C, std::size_t j0,
                       std::size_t j1, std::size_t n, std::size_t m, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    double* c = C + i * p;
    for (std::size_t j = j0; j < j1; ++j) c[j] = 0.0;
  }
  std::size_t t = 0;
  for (; t + 4 <= n; t += 4) {
    const double* a0 = A + t * m;
    const double* b0 = B + t * p;
    const double* b1 = b0 + p;
    const double* b2 = b1 + p;
    const double* b3 = b2 + p;
    for (std::size_t i = 0; i < m; ++i) {
      const double u0 = a0[i], u1 = a0[m + i], u2 = a0[2 * m + i], u3 = a0[3 * m + i];
      double* c = C + i * p;
      for (std::size_t j = j0; j < j1; ++j) {
        c[j] = std::fma(
            u3, b3[j], std::fma(u2, b2[j], std::fma(u1, b1[j], std::fma(u0, b0[j], c[j]))));
      }
    }
  }
  for (; t < n; ++t) {
    const double* arow = A + t * m;
    const double* brow = B + t * p;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* c = C + i * p;
      for (std::size_t j = j0; j < j1; ++j) c[j] = std::fma(av, brow[j], c[j]);
    }
  }
}

}  // namespace detail

/// a(n,k) * b(k,m). Throws ShapeMismatch when inner dimensions disagree.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw ShapeMismatch("matmul: " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                        " * " + std::to_string(b.rows) + "x" + std::to_string(b.cols));
  Matrix c(a.rows, b.cols);
  detail::parallel_ranges(a.rows, [&](std::size_t lo, std::size_t hi) {
    detail::mm_nn_rows(a.values.data(), b.values.data(), c.values.data(), lo, hi, a.cols,
                       b.cols);
  });
  return c;
}

/// a(n,k) * b(m,k)^T. b is transposed up front (it is the small operand in
/// every call site), so the summation order matches matmul exactly.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols)
    throw ShapeMismatch("matmul_nt: " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                        " * (" + std::to_string(b.rows) + "x" + std::to_string(b.cols) + ")^T");
  const Matrix bt = transpose(b);
  Matrix c(a.rows, bt.cols);
  detail::parallel_ranges(a.rows, [&](std::size_t lo, std::size_t hi) {
    detail::mm_nn_rows(a.values.data(), bt.values.data(), c.values.data(), lo, hi, a.cols,
                       bt.cols);
  });
  return c;
}

/// a(n,m)^T * b(n,p).
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows)
    throw ShapeMismatch("matmul_tn: (" + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                        ")^T * " + std::to_string(b.rows) + "x" + std::to_string(b.cols));
  Matrix c(a.cols, b.cols);
  detail::parallel_ranges(b.cols, [&](std::size_t lo, std::size_t hi) {
    detail::mm_tn_cols(a.values.data(), b.values.data(), c.values.data(), lo, hi, a.rows,
                       a.cols, b.cols);
  });
  return c;
}

}  // namespace actprobe
