#pragma once

#include <cstddef>
#include <span>

// Data-parallel inner loops. The functions in eeikd::kernels are OpenMP
// parallel; eeikd::kernels::reference holds the plain serial loops they are
// tested and benchmarked against. Both accumulate every output element in the
// same order, so their results are bitwise identical.
namespace eeikd::kernels {

/// out[m x p] = a[m x k] * b[k x p]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t m, std::size_t k, std::size_t p);

/// out[m x p] += a[m x k] * b[p x k]^T
void matmul_add_bt(std::span<const double> a, std::span<const double> b, std::span<double> out,
                   std::size_t m, std::size_t k, std::size_t p);

/// out[k x p] += a[m x k]^T * b[m x p]
void matmul_add_at(std::span<const double> a, std::span<const double> b, std::span<double> out,
                   std::size_t m, std::size_t k, std::size_t p);

/// out[n x n] with out(i,j) = ||x_i - x_j||_2 and a zero diagonal.
void pairwise_l2(std::span<const double> x, std::span<double> out, std::size_t n, std::size_t d);

namespace reference {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t m, std::size_t k, std::size_t p);
void matmul_add_bt(std::span<const double> a, std::span<const double> b, std::span<double> out,
                   std::size_t m, std::size_t k, std::size_t p);
void matmul_add_at(std::span<const double> a, std::span<const double> b, std::span<double> out,
                   std::size_t m, std::size_t k, std::size_t p);
void pairwise_l2(std::span<const double> x, std::span<double> out, std::size_t n, std::size_t d);

}  // namespace reference

// Work below this many multiply-adds stays on the calling thread.
inline constexpr std::size_t kParallelThreshold = 1u << 16;

}  // namespace eeikd::kernels
