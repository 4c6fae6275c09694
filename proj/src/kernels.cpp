#include "eeikd/kernels.hpp"

#include <cmath>
#include <cstdint>

namespace eeikd::kernels {

namespace {

inline void matmul_row(const double* a, const double* b, double* out, std::size_t k, std::size_t p) {
  for (std::size_t j = 0; j < p; ++j) out[j] = 0.0;
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double av = a[kk];
    const double* brow = b + kk * p;
    for (std::size_t j = 0; j < p; ++j) out[j] += av * brow[j];
  }
}

inline void matmul_add_bt_row(const double* a, const double* b, double* out, std::size_t k,
                              std::size_t p) {
  for (std::size_t j = 0; j < p; ++j) {
    const double* brow = b + j * k;
    double acc = 0.0;
    for (std::size_t kk = 0; kk < k; ++kk) acc += a[kk] * brow[kk];
    out[j] += acc;
  }
}

inline void pairwise_row(const double* x, double* out, std::size_t i, std::size_t n, std::size_t d) {
  const double* xi = x + i * d;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      out[j] = 0.0;
      continue;
    }
    const double* xj = x + j * d;
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = xi[c] - xj[c];
      acc += diff * diff;
    }
    out[j] = std::sqrt(acc);
  }
}

}  // namespace

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t m, std::size_t k, std::size_t p) {
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) if (m * k * p >= kParallelThreshold)
  for (std::int64_t i = 0; i < rows; ++i)
    matmul_row(a.data() + i * k, b.data(), out.data() + i * p, k, p);
}

void matmul_add_bt(std::span<const double> a, std::span<const double> b, std::span<double> out,
                   std::size_t m, std::size_t k, std::size_t p) {
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) if (m * k * p >= kParallelThreshold)
  for (std::int64_t i = 0; i < rows; ++i)
    matmul_add_bt_row(a.data() + i * k, b.data(), out.data() + i * p, k, p);
}

void matmul_add_at(std::span<const double> a, std::span<const double> b, std::span<double> out,
                   std::size_t m, std::size_t k, std::size_t p) {
  // Parallel over output rows; each output element still sums over i in order.
  const auto out_rows = static_cast<std::int64_t>(k);
#pragma omp parallel for schedule(static) if (m * k * p >= kParallelThreshold)
  for (std::int64_t kk = 0; kk < out_rows; ++kk) {
    double* orow = out.data() + kk * p;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * k + kk];
      const double* brow = b.data() + i * p;
      for (std::size_t j = 0; j < p; ++j) orow[j] += av * brow[j];
    }
  }
}

void pairwise_l2(std::span<const double> x, std::span<double> out, std::size_t n, std::size_t d) {
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (n * n * d >= kParallelThreshold)
  for (std::int64_t i = 0; i < rows; ++i) pairwise_row(x.data(), out.data() + i * n, i, n, d);
}

namespace reference {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t m, std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += a[i * k + kk] * b[kk * p + j];
      out[i * p + j] = acc;
    }
}

void matmul_add_bt(std::span<const double> a, std::span<const double> b, std::span<double> out,
                   std::size_t m, std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += a[i * k + kk] * b[j * k + kk];
      out[i * p + j] += acc;
    }
}

void matmul_add_at(std::span<const double> a, std::span<const double> b, std::span<double> out,
                   std::size_t m, std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t kk = 0; kk < k; ++kk)
      for (std::size_t j = 0; j < p; ++j) out[kk * p + j] += a[i * k + kk] * b[i * p + j];
}

void pairwise_l2(std::span<const double> x, std::span<double> out, std::size_t n, std::size_t d) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = x[i * d + c] - x[j * d + c];
        acc += diff * diff;
      }
      out[i * n + j] = (i == j) ? 0.0 : std::sqrt(acc);
    }
}

}  // namespace reference

}  // namespace eeikd::kernels
