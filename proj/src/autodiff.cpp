#include "eeikd/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "eeikd/errors.hpp"
#include "eeikd/kernels.hpp"

namespace eeikd::ad {

const Tensor& Var::value() const { return tape_->value(*this); }
const Tensor& Var::grad() const { return tape_->grad(*this); }
bool Var::requires_grad() const { return tape_->requires_grad(*this); }

Var Tape::constant(Tensor value) { return record(std::move(value), {}, nullptr); }

Var Tape::parameter(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

const Tensor& Tape::value(Var v) const { return nodes_.at(v.id_).value; }

const Tensor& Tape::grad(Var v) const {
  const Node& node = nodes_.at(v.id_);
  if (!node.has_grad && node.grad.shape() != node.value.shape())
    node.grad = Tensor(node.value.shape(), 0.0);
  return node.grad;
}

bool Tape::requires_grad(Var v) const { return nodes_.at(v.id_).requires_grad; }

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  if (backward_done_) throw TapeError("cannot record onto a tape after backward()");
  Node node;
  node.value = std::move(value);
  for (Var p : parents) {
    if (p.tape_ != this) throw TapeError("operands belong to different tapes");
    node.requires_grad = node.requires_grad || nodes_[p.id_].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor& Tape::grad_buffer(Var v) {
  Node& node = nodes_[v.id_];
  if (!node.has_grad) {
    node.grad = Tensor(node.value.shape(), 0.0);
    node.has_grad = true;
  }
  return node.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw TapeError("loss does not belong to this tape");
  if (backward_done_) throw TapeError("backward() already ran on this tape");
  if (value(loss).size() != 1)
    throw RankError("backward() needs a scalar loss, got shape " + shape_string(value(loss).shape()));
  backward_done_ = true;
  if (!nodes_[loss.id_].requires_grad) return;
  grad_buffer(loss)[0] = 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.has_grad && node.backward) node.backward(*this, node.grad);
  }
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw TapeError("operation on an unbound Var");
  return *a.tape();
}

bool is_row_broadcast(const Tensor& a, const Tensor& b) {
  return a.rank() == 2 && b.size() == a.cols() && (b.rank() == 1 || (b.rank() == 2 && b.rows() == 1));
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2)
    throw DimensionError("matmul: operands must be matrices, got " + shape_string(av.shape()) + " and " +
                         shape_string(bv.shape()));
  if (av.cols() != bv.rows())
    throw DimensionError("matmul: inner extents differ, " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()));
  const std::size_t m = av.rows(), k = av.cols(), p = bv.cols();
  Tensor out(Shape{m, p});
  kernels::matmul(av.values(), bv.values(), out.values(), m, k, p);
  return tape.record(std::move(out), {a, b}, [a, b, m, k, p](Tape& t, const Tensor& g) {
    if (t.requires_grad(a))
      kernels::matmul_add_bt(g.values(), t.value(b).values(), t.grad_buffer(a).values(), m, p, k);
    if (t.requires_grad(b))
      kernels::matmul_add_at(t.value(a).values(), g.values(), t.grad_buffer(b).values(), m, k, p);
  });
}

Var add(Var a, Var b) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool broadcast = av.shape() != bv.shape() && is_row_broadcast(av, bv);
  if (!broadcast) require_same_shape(av, bv, "add");
  Tensor out = av;
  const std::size_t cols = av.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += broadcast ? bv[i % cols] : bv[i];
  return tape.record(std::move(out), {a, b}, [a, b, broadcast, cols](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[broadcast ? i % cols : i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of(a);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of(a);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a);
      const Tensor& bv = t.value(b);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      const Tensor& av = t.value(a);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (auto& v : out.values()) v *= factor;
  return tape.record(std::move(out), {a}, [a, factor](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Var relu(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  return tape.record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(a);
    const Tensor& av = t.value(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (av[i] > 0.0) ga[i] += g[i];
  });
}

Var operator+(Var a, Var b) { return add(a, b); }
Var operator-(Var a, Var b) { return sub(a, b); }
Var operator*(Var a, Var b) { return mul(a, b); }
Var operator*(Var a, double factor) { return scale(a, factor); }
Var operator*(double factor, Var a) { return scale(a, factor); }

Var batch_norm(Var x, Var gamma, Var beta, const BatchNormBuffers& buffers, bool training) {
  Tape& tape = tape_of(x);
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw DimensionError("batch_norm: input must be [batch x features]");
  const std::size_t batch = xv.rows(), features = xv.cols();
  if (gamma.value().size() != features || beta.value().size() != features ||
      buffers.running_mean.size() != features || buffers.running_var.size() != features)
    throw DimensionError("batch_norm: parameter width does not match " + std::to_string(features) +
                         " features");
  if (training && batch < 2)
    throw StatisticsError("batch_norm: training-mode statistics need a batch of at least 2");

  std::vector<double> inv_std(features);
  Tensor xhat(xv.shape());
  if (training) {
    for (std::size_t f = 0; f < features; ++f) {
      double mu = 0.0;
      for (std::size_t r = 0; r < batch; ++r) mu += xv.at(r, f);
      mu /= static_cast<double>(batch);
      double var = 0.0;
      for (std::size_t r = 0; r < batch; ++r) {
        const double d = xv.at(r, f) - mu;
        var += d * d;
      }
      var /= static_cast<double>(batch);
      inv_std[f] = 1.0 / std::sqrt(var + buffers.epsilon);
      for (std::size_t r = 0; r < batch; ++r) xhat.at(r, f) = (xv.at(r, f) - mu) * inv_std[f];
      const double unbiased = var * static_cast<double>(batch) / static_cast<double>(batch - 1);
      buffers.running_mean[f] = buffers.momentum * buffers.running_mean[f] + (1.0 - buffers.momentum) * mu;
      buffers.running_var[f] = buffers.momentum * buffers.running_var[f] + (1.0 - buffers.momentum) * unbiased;
    }
  } else {
    for (std::size_t f = 0; f < features; ++f) {
      inv_std[f] = 1.0 / std::sqrt(buffers.running_var[f] + buffers.epsilon);
      for (std::size_t r = 0; r < batch; ++r)
        xhat.at(r, f) = (xv.at(r, f) - buffers.running_mean[f]) * inv_std[f];
    }
  }

  Tensor out(xv.shape());
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t f = 0; f < features; ++f) out.at(r, f) = gv[f] * xhat.at(r, f) + bv[f];

  return tape.record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, training, batch, features, inv_std = std::move(inv_std),
       xhat = std::move(xhat)](Tape& t, const Tensor& g) {
        std::vector<double> sum_g(features, 0.0), sum_gx(features, 0.0);
        for (std::size_t r = 0; r < batch; ++r)
          for (std::size_t f = 0; f < features; ++f) {
            sum_g[f] += g.at(r, f);
            sum_gx[f] += g.at(r, f) * xhat.at(r, f);
          }
        if (t.requires_grad(gamma)) {
          Tensor& gg = t.grad_buffer(gamma);
          for (std::size_t f = 0; f < features; ++f) gg[f] += sum_gx[f];
        }
        if (t.requires_grad(beta)) {
          Tensor& gb = t.grad_buffer(beta);
          for (std::size_t f = 0; f < features; ++f) gb[f] += sum_g[f];
        }
        if (t.requires_grad(x)) {
          Tensor& gx = t.grad_buffer(x);
          const Tensor& gv = t.value(gamma);
          const double nb = static_cast<double>(batch);
          for (std::size_t r = 0; r < batch; ++r)
            for (std::size_t f = 0; f < features; ++f) {
              const double scale = gv[f] * inv_std[f];
              if (training)
                gx.at(r, f) += scale / nb * (nb * g.at(r, f) - sum_g[f] - xhat.at(r, f) * sum_gx[f]);
              else
                gx.at(r, f) += scale * g.at(r, f);
            }
        }
      });
}

namespace {

// Fills probs with the row softmax of z / temperature; returns per-row log of
// the normaliser (after max subtraction) and the row max.
void softmax_rows(const Tensor& z, double temperature, Tensor& probs, std::vector<double>* row_max,
                  std::vector<double>* row_log_norm) {
  if (!(temperature > 0.0)) throw ConfigError("softmax: temperature must be positive");
  const std::size_t rows = z.rows(), cols = z.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    auto zr = z.row(r);
    double m = kMasked;
    for (double v : zr)
      if (v / temperature > m) m = v / temperature;
    if (m == kMasked) throw DegenerateDistributionError("softmax: every entry of a row is masked");
    double total = 0.0;
    auto pr = probs.row(r);
    for (std::size_t c = 0; c < cols; ++c) {
      pr[c] = std::exp(zr[c] / temperature - m);
      total += pr[c];
    }
    for (auto& v : pr) v /= total;
    if (row_max) (*row_max)[r] = m;
    if (row_log_norm) (*row_log_norm)[r] = std::log(total);
  }
}

}  // namespace

Tensor softmax_values(const Tensor& z, double temperature) {
  Tensor probs(z.shape());
  softmax_rows(z, temperature, probs, nullptr, nullptr);
  return probs;
}

Var softmax(Var z, double temperature) {
  Tape& tape = tape_of(z);
  Tensor probs = softmax_values(z.value(), temperature);
  Tensor saved = probs;
  return tape.record(std::move(probs), {z},
                     [z, temperature, y = std::move(saved)](Tape& t, const Tensor& g) {
                       Tensor& gz = t.grad_buffer(z);
                       const std::size_t cols = y.cols();
                       for (std::size_t r = 0; r < y.rows(); ++r) {
                         auto yr = y.row(r);
                         double dot = 0.0;
                         for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * yr[c];
                         for (std::size_t c = 0; c < cols; ++c)
                           gz[r * cols + c] += yr[c] * (g[r * cols + c] - dot) / temperature;
                       }
                     });
}

Var log_softmax(Var z, double temperature) {
  Tape& tape = tape_of(z);
  const Tensor& zv = z.value();
  Tensor probs(zv.shape());
  std::vector<double> row_max(zv.rows()), row_log_norm(zv.rows());
  softmax_rows(zv, temperature, probs, &row_max, &row_log_norm);
  Tensor out(zv.shape());
  const std::size_t cols = zv.cols();
  for (std::size_t r = 0; r < zv.rows(); ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = zv[r * cols + c];
      out[r * cols + c] = v == kMasked ? kMasked : v / temperature - row_max[r] - row_log_norm[r];
    }
  return tape.record(std::move(out), {z},
                     [z, temperature, y = std::move(probs)](Tape& t, const Tensor& g) {
                       Tensor& gz = t.grad_buffer(z);
                       const Tensor& zv = t.value(z);
                       const std::size_t cols = y.cols();
                       for (std::size_t r = 0; r < y.rows(); ++r) {
                         double total = 0.0;
                         for (std::size_t c = 0; c < cols; ++c)
                           if (zv[r * cols + c] != kMasked) total += g[r * cols + c];
                         for (std::size_t c = 0; c < cols; ++c) {
                           const std::size_t i = r * cols + c;
                           if (zv[i] != kMasked) gz[i] += (g[i] - y[i] * total) / temperature;
                         }
                       }
                     });
}

Var mask_logits(Var z, const Tensor& mask) {
  Tape& tape = tape_of(z);
  require_same_shape(z.value(), mask, "mask_logits");
  Tensor out = z.value();
  for (std::size_t i = 0; i < out.size(); ++i)
    if (mask[i] == 0.0) out[i] = kMasked;
  return tape.record(std::move(out), {z}, [z, mask](Tape& t, const Tensor& g) {
    Tensor& gz = t.grad_buffer(z);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (mask[i] != 0.0) gz[i] += g[i];
  });
}

Var sum(Var a) {
  Tape& tape = tape_of(a);
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return tape.record(Tensor::scalar(total), {a}, [a](Tape& t, const Tensor& g) {
    for (auto& v : t.grad_buffer(a).values()) v += g[0];
  });
}

Var mean(Var a) {
  Tape& tape = tape_of(a);
  const double n = static_cast<double>(a.value().size());
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return tape.record(Tensor::scalar(total / n), {a}, [a, n](Tape& t, const Tensor& g) {
    for (auto& v : t.grad_buffer(a).values()) v += g[0] / n;
  });
}

Var sum_rows(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (double v : av.row(r)) total += v;
    out[r] = total;
  }
  return tape.record(std::move(out), {a}, [a, cols](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i / cols];
  });
}

Var clamp_min(Var a, double floor) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (auto& v : out.values()) v = std::max(v, floor);
  return tape.record(std::move(out), {a}, [a, floor](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(a);
    const Tensor& av = t.value(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (av[i] >= floor) ga[i] += g[i];
  });
}

Var div_scalar(Var a, Var s) {
  Tape& tape = tape_of(a);
  if (s.value().size() != 1) throw RankError("div_scalar: divisor must be a scalar");
  const double sv = s.value()[0];
  Tensor out = a.value();
  for (auto& v : out.values()) v /= sv;
  return tape.record(std::move(out), {a, s}, [a, s, sv](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(a);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / sv;
    }
    if (t.requires_grad(s)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
      t.grad_buffer(s)[0] -= acc / (sv * sv);
    }
  });
}

Var kl_divergence(Var p, Var q) {
  Tape& tape = tape_of(p);
  const Tensor& pv = p.value();
  const Tensor& qv = q.value();
  require_same_shape(pv, qv, "kl_divergence");
  double total = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (pv[i] <= 0.0) continue;
    if (qv[i] <= 0.0) throw InfiniteDivergenceError("kl_divergence: q is zero where p is positive");
    total += pv[i] * std::log(pv[i] / qv[i]);
  }
  return tape.record(Tensor::scalar(total), {p, q}, [p, q](Tape& t, const Tensor& g) {
    const Tensor& pv = t.value(p);
    const Tensor& qv = t.value(q);
    if (t.requires_grad(p)) {
      Tensor& gp = t.grad_buffer(p);
      for (std::size_t i = 0; i < pv.size(); ++i)
        if (pv[i] > 0.0) gp[i] += g[0] * (std::log(pv[i] / qv[i]) + 1.0);
    }
    if (t.requires_grad(q)) {
      Tensor& gq = t.grad_buffer(q);
      for (std::size_t i = 0; i < pv.size(); ++i)
        if (pv[i] > 0.0) gq[i] -= g[0] * pv[i] / qv[i];
    }
  });
}

namespace {

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

Var l1_distance(Var a, Var b) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "l1_distance");
  double total = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) total += std::abs(av[i] - bv[i]);
  return tape.record(Tensor::scalar(total), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < av.size(); ++i) ga[i] += g[0] * sign(av[i] - bv[i]);
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < av.size(); ++i) gb[i] -= g[0] * sign(av[i] - bv[i]);
    }
  });
}

Var huber(Var a, Var b, double delta) {
  Tape& tape = tape_of(a);
  if (!(delta > 0.0)) throw ConfigError("huber: delta must be positive");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "huber");
  double total = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    total += std::abs(d) <= delta ? 0.5 * d * d : delta * (std::abs(d) - 0.5 * delta);
  }
  return tape.record(Tensor::scalar(total), {a, b}, [a, b, delta](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    const bool need_a = t.requires_grad(a), need_b = t.requires_grad(b);
    for (std::size_t i = 0; i < av.size(); ++i) {
      const double d = av[i] - bv[i];
      const double slope = std::abs(d) <= delta ? d : delta * sign(d);
      if (need_a) t.grad_buffer(a)[i] += g[0] * slope;
      if (need_b) t.grad_buffer(b)[i] -= g[0] * slope;
    }
  });
}

Var pairwise_distances(Var x) {
  Tape& tape = tape_of(x);
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw DimensionError("pairwise_distances: input must be [N x d]");
  const std::size_t n = xv.rows(), d = xv.cols();
  Tensor out(Shape{n, n});
  kernels::pairwise_l2(xv.values(), out.values(), n, d);
  Tensor dist = out;
  return tape.record(std::move(out), {x}, [x, n, d, dist = std::move(dist)](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(x);
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j || dist.at(i, j) == 0.0) continue;
        const double coef = (g.at(i, j) + g.at(j, i)) / dist.at(i, j);
        for (std::size_t c = 0; c < d; ++c) gx.at(i, c) += coef * (xv.at(i, c) - xv.at(j, c));
      }
  });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  Tape& tape = tape_of(logits);
  const Tensor& zv = logits.value();
  if (zv.rows() != labels.size()) throw DimensionError("cross_entropy: label count differs from batch");
  Tensor probs(zv.shape());
  std::vector<double> row_max(zv.rows()), row_log_norm(zv.rows());
  softmax_rows(zv, 1.0, probs, &row_max, &row_log_norm);
  const std::size_t cols = zv.cols();
  double total = 0.0;
  for (std::size_t r = 0; r < zv.rows(); ++r) {
    const auto label = static_cast<std::size_t>(labels[r]);
    if (labels[r] < 0 || label >= cols) throw DimensionError("cross_entropy: label out of range");
    total -= zv.at(r, label) - row_max[r] - row_log_norm[r];
  }
  const double batch = static_cast<double>(zv.rows());
  std::vector<int> saved(labels.begin(), labels.end());
  return tape.record(Tensor::scalar(total / batch), {logits},
                     [logits, batch, cols, y = std::move(probs), saved = std::move(saved)](
                         Tape& t, const Tensor& g) {
                       Tensor& gz = t.grad_buffer(logits);
                       for (std::size_t i = 0; i < y.size(); ++i) {
                         const double onehot =
                             static_cast<std::size_t>(saved[i / cols]) == i % cols ? 1.0 : 0.0;
                         gz[i] += g[0] * (y[i] - onehot) / batch;
                       }
                     });
}

std::vector<std::size_t> argmax_rows(const Tensor& t) {
  std::vector<std::size_t> out(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    out[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

std::vector<double> max_rows(const Tensor& t) {
  std::vector<double> out(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    out[r] = *std::max_element(row.begin(), row.end());
  }
  return out;
}

}  // namespace eeikd::ad
