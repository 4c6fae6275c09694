#pragma once

// Straight-line reimplementations used as test oracles. Nothing here calls
// into the library.

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) out[i][j] += a[i][k] * b[k][j];
  return out;
}

inline double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

struct Relation {
  std::vector<double> psi;
  double xi = 0.0;
};

inline Relation relation(const Matrix& rows) {
  const std::size_t n = rows.size();
  Relation r;
  r.psi.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) r.psi[i] += distance(rows[i], rows[j]);
    r.psi[i] /= static_cast<double>(n - 1);
  }
  for (double p : r.psi) r.xi += p;
  r.xi /= static_cast<double>(n);
  return r;
}

inline double huber(double a, double b, double delta) {
  const double d = std::abs(a - b);
  return d <= delta ? 0.5 * d * d : delta * (d - 0.5 * delta);
}

// Mean over rows of the Huber penalty between normalized relation values.
inline double relation_loss(const Matrix& t, const Matrix& s, double delta, double eps) {
  const Relation rt = relation(t), rs = relation(s);
  const double xt = std::max(rt.xi, eps), xs = std::max(rs.xi, eps);
  double total = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) total += huber(rt.psi[i] / xt, rs.psi[i] / xs, delta);
  return total / static_cast<double>(t.size());
}

inline std::vector<double> softmax(const std::vector<double>& z, double tau = 1.0) {
  double hi = -INFINITY;
  for (double v : z) hi = std::max(hi, v);
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::isinf(z[i]) ? 0.0 : std::exp((z[i] - hi) / tau);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

inline double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) s += p[i] * std::log(p[i] / q[i]);
  return s;
}

}  // namespace oracle
