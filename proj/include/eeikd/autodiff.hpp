#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "eeikd/tensor.hpp"

// Reverse-mode automatic differentiation over whole tensors.
//
// A Tape records nodes in creation order, which is a topological order of the
// computation graph, so backward() is a single reverse sweep. Leaves added
// with constant() never receive gradient. A tape supports exactly one
// backward(); a second call throws TapeError.
namespace eeikd::ad {

inline constexpr double kMasked = -std::numeric_limits<double>::infinity();

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  std::uint32_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

class Tape {
 public:
  // Receives the gradient of the node's output and pushes it to the parents.
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Tensor value);

  const Tensor& value(Var v) const;
  // Zero tensor of the right shape when nothing flowed into v.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;

  void backward(Var loss);
  bool backward_done() const noexcept { return backward_done_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Used by op implementations.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Tensor& grad_buffer(Var v);

 private:
  struct Node {
    Tensor value;
    mutable Tensor grad;
    mutable bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Structural ops.
Var matmul(Var a, Var b);
// b may match a's shape, or be a row vector [cols] broadcast over a's rows.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var relu(Var a);

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator*(Var a, double factor);
Var operator*(double factor, Var a);

// Batch normalization over rows of x [batch x features].
struct BatchNormBuffers {
  std::span<double> running_mean;
  std::span<double> running_var;
  double momentum = 0.9;  // weight kept on the old running value
  double epsilon = 1e-5;
};
Var batch_norm(Var x, Var gamma, Var beta, const BatchNormBuffers& buffers, bool training);

// Row-wise softmax of z / temperature. kMasked entries map to exactly 0.
Var softmax(Var z, double temperature = 1.0);
Var log_softmax(Var z, double temperature = 1.0);
// Replaces entries where mask == 0 by kMasked; gradient passes through kept entries.
Var mask_logits(Var z, const Tensor& mask);

// Reductions.
Var sum(Var a);
Var mean(Var a);
Var sum_rows(Var a);  // [rows x cols] -> [rows]
Var clamp_min(Var a, double floor);
Var div_scalar(Var a, Var s);  // a / s with s a scalar node

// Losses.
Var kl_divergence(Var p, Var q);  // sum of p ln(p/q) over all entries
Var l1_distance(Var a, Var b);    // sum |a - b|
Var huber(Var a, Var b, double delta);  // sum of elementwise Huber penalties
Var pairwise_distances(Var x);   // [N x d] -> [N x N]
Var cross_entropy(Var logits, std::span<const int> labels);  // mean NLL

// Non-differentiable helpers on plain tensors.
std::vector<std::size_t> argmax_rows(const Tensor& t);
std::vector<double> max_rows(const Tensor& t);
Tensor softmax_values(const Tensor& z, double temperature = 1.0);

}  // namespace eeikd::ad
