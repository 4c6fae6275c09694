#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eeikd/autodiff.hpp"
#include "eeikd/tensor.hpp"

// Fully connected classifiers with two feature taps:
//   front tap: output of the first hidden layer's batch normalization,
//   back tap:  last hidden activation, i.e. the input of the final linear layer.
// Hidden block = Linear -> [BatchNorm] -> ReLU.
namespace eeikd::nets {

enum class Mode { train, eval };

struct NetworkSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;
  std::size_t classes = 0;
  std::vector<bool> normalize;  // one flag per hidden layer; normalize[0] must be set

  static NetworkSpec mlp(std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t classes);

  void validate() const;
  std::size_t front_width() const { return hidden.front(); }
  std::size_t back_width() const { return hidden.back(); }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

// Teacher/student pairs must agree on both tap widths and on input/class counts.
void require_compatible(const NetworkSpec& teacher, const NetworkSpec& student);

struct DenseLayer {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
};

struct NormLayer {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
};

struct HiddenBlock {
  DenseLayer dense;
  std::optional<NormLayer> norm;
};

inline constexpr double kNormMomentum = 0.9;
inline constexpr double kNormEpsilon = 1e-5;

struct ForwardResult {
  ad::Var logits;  // [batch x classes]
  ad::Var front;   // [batch x hidden.front()]
  ad::Var back;    // [batch x hidden.back()]
  std::vector<ad::Var> parameters;  // same order as Network::parameters()
  // Smallest |input| seen by any ReLU; gradient checks stay away from kinks.
  double relu_margin = 0.0;
};

struct ForwardValues {
  Tensor logits;
  Tensor front;
  Tensor back;
};

class Network {
 public:
  static Network initialize(const NetworkSpec& spec, std::uint64_t seed);
  static Network zeros(const NetworkSpec& spec);

  const NetworkSpec& spec() const noexcept { return spec_; }
  Mode mode() const noexcept { return mode_; }
  void set_mode(Mode mode) noexcept { mode_ = mode; }

  // Records the pass on the tape. With trainable, parameters enter as
  // gradient-tracking leaves. Train mode updates batch-norm running stats.
  ForwardResult forward(ad::Tape& tape, const Tensor& batch, bool trainable = true);

  // Eval-mode inference; never touches running statistics.
  ForwardValues infer(const Tensor& batch) const;

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::size_t parameter_count() const;
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> values);

  void collect_gradients(const ad::Tape& tape, const ForwardResult& result);
  bool has_gradients() const noexcept { return has_gradients_; }
  const std::vector<Tensor>& gradients() const noexcept { return gradients_; }
  void clear_gradients() noexcept;

  const std::vector<HiddenBlock>& blocks() const noexcept { return blocks_; }
  const DenseLayer& head() const noexcept { return head_; }

  friend bool operator==(const Network& a, const Network& b) {
    return a.spec_ == b.spec_ && a.mode_ == b.mode_ && a.state_values() == b.state_values();
  }

 private:
  friend std::string serialize_checkpoint(const Network&);
  friend Network parse_checkpoint(std::string_view);

  explicit Network(NetworkSpec spec);
  ForwardResult run(ad::Tape& tape, const Tensor& batch, bool trainable, bool training);
  std::vector<double> state_values() const;

  NetworkSpec spec_;
  std::vector<HiddenBlock> blocks_;
  DenseLayer head_;
  Mode mode_ = Mode::train;
  std::vector<Tensor> gradients_;
  bool has_gradients_ = false;
};

// Classical momentum SGD with L2 weight decay folded into the gradient:
//   g <- grad + weight_decay * w;  v <- momentum * v + g;  w <- w - lr * v
class SgdOptimizer {
 public:
  SgdOptimizer(double momentum, double weight_decay);

  // Consumes the network's gradients; throws NotReadyError when none are held.
  void step(Network& net, double lr);

 private:
  double momentum_;
  double weight_decay_;
  std::vector<Tensor> velocity_;
};

// Step schedule: lr * factor^(number of milestone fractions m with epoch >= floor(m * epochs)).
double scheduled_lr(double base_lr, std::size_t epoch, std::size_t total_epochs,
                    std::span<const double> milestones, double factor);

std::string serialize_checkpoint(const Network& net);
Network parse_checkpoint(std::string_view bytes);
void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace eeikd::nets
