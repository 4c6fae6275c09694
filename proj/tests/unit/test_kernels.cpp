#include <random>
#include <vector>

#include "doctest.h"
#include "eeikd/kernels.hpp"
#include "eeikd/nets.hpp"
#include "eeikd/selection.hpp"
#include "oracles/naive.hpp"

using namespace eeikd;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

}  // namespace

// Sizes straddle the parallel threshold so both code paths run.
TEST_CASE("parallel matmul kernels equal the serial reference bitwise") {
  for (auto [m, k, p] : {std::tuple{3, 4, 5}, std::tuple{70, 50, 40}, std::tuple{256, 64, 64}}) {
    const auto a = random_values(m * k, 1), b = random_values(k * p, 2), bt = random_values(p * k, 3),
               c = random_values(m * p, 4);
    std::vector<double> x(m * p), y(m * p);
    kernels::matmul(a, b, x, m, k, p);
    kernels::reference::matmul(a, b, y, m, k, p);
    CHECK(x == y);

    x = c, y = c;
    kernels::matmul_add_bt(a, bt, x, m, k, p);
    kernels::reference::matmul_add_bt(a, bt, y, m, k, p);
    CHECK(x == y);

    std::vector<double> u(k * p, 0.5), w(k * p, 0.5);
    kernels::matmul_add_at(a, c, u, m, k, p);
    kernels::reference::matmul_add_at(a, c, w, m, k, p);
    CHECK(u == w);
  }
}

TEST_CASE("reference matmul agrees with the naive oracle") {
  const std::size_t m = 5, k = 7, p = 3;
  const auto a = random_values(m * k, 5), b = random_values(k * p, 6);
  std::vector<double> out(m * p);
  kernels::reference::matmul(a, b, out, m, k, p);
  oracle::Matrix na(m, std::vector<double>(k)), nb(k, std::vector<double>(p));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) na[i][j] = a[i * k + j];
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < p; ++j) nb[i][j] = b[i * p + j];
  const auto e = oracle::matmul(na, nb);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) CHECK(out[i * p + j] == doctest::Approx(e[i][j]).epsilon(1e-13));
}

TEST_CASE("pairwise_l2 parallel equals reference and the oracle") {
  for (std::size_t n : {4u, 300u}) {
    const std::size_t d = 8;
    const auto x = random_values(n * d, 7);
    std::vector<double> a(n * n), b(n * n);
    kernels::pairwise_l2(x, a, n, d);
    kernels::reference::pairwise_l2(x, b, n, d);
    CHECK(a == b);
    for (std::size_t i = 0; i < n; i += n / 4) {
      CHECK(a[i * n + i] == 0.0);
      for (std::size_t j = 0; j < n; j += n / 4) {
        const std::vector<double> xi(x.begin() + i * d, x.begin() + (i + 1) * d);
        const std::vector<double> xj(x.begin() + j * d, x.begin() + (j + 1) * d);
        CHECK(a[i * n + j] == doctest::Approx(oracle::distance(xi, xj)).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("parallel pool scoring equals the serial reference") {
  auto net = nets::Network::initialize(nets::NetworkSpec::mlp(6, {16, 8, 16}, 4), 12);
  net.set_mode(nets::Mode::eval);
  const auto v = random_values(2000 * 6, 8);
  const Tensor pool = Tensor::matrix(2000, 6, v);
  CHECK(selection::score_pool(net, pool, 128) == selection::reference::score_pool(net, pool, 128));
  CHECK(selection::score_pool(net, pool, 128) == selection::score_pool(net, pool, 2000));
}
