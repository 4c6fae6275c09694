#include "eeikd/nets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eeikd/errors.hpp"
#include "eeikd/io.hpp"
#include "eeikd/rng.hpp"

namespace eeikd::nets {

NetworkSpec NetworkSpec::mlp(std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t classes) {
  NetworkSpec spec;
  spec.input_dim = input_dim;
  spec.normalize.assign(hidden.size(), true);
  spec.hidden = std::move(hidden);
  spec.classes = classes;
  return spec;
}

void NetworkSpec::validate() const {
  if (input_dim == 0) throw ConfigError("network input dimension must be positive");
  if (hidden.size() < 2) throw ConfigError("network needs at least two hidden layers");
  for (auto h : hidden)
    if (h == 0) throw ConfigError("hidden widths must be positive");
  if (classes < 2) throw ConfigError("network needs at least two classes");
  if (normalize.size() != hidden.size()) throw ConfigError("one normalization flag per hidden layer");
  if (!normalize.front()) throw ConfigError("the first hidden layer must be batch-normalized (front tap)");
}

void require_compatible(const NetworkSpec& teacher, const NetworkSpec& student) {
  teacher.validate();
  student.validate();
  if (teacher.input_dim != student.input_dim) throw ConfigError("teacher and student input widths differ");
  if (teacher.classes != student.classes) throw ConfigError("teacher and student class counts differ");
  if (teacher.front_width() != student.front_width())
    throw ConfigError("front tap widths differ: teacher " + std::to_string(teacher.front_width()) +
                      ", student " + std::to_string(student.front_width()));
  if (teacher.back_width() != student.back_width())
    throw ConfigError("back tap widths differ: teacher " + std::to_string(teacher.back_width()) +
                      ", student " + std::to_string(student.back_width()));
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t in = spec_.input_dim;
  for (std::size_t i = 0; i < spec_.hidden.size(); ++i) {
    const std::size_t out = spec_.hidden[i];
    HiddenBlock block{DenseLayer{Tensor(Shape{in, out}), Tensor(Shape{out})}, std::nullopt};
    if (spec_.normalize[i])
      block.norm = NormLayer{Tensor(Shape{out}, 1.0), Tensor(Shape{out}), Tensor(Shape{out}),
                             Tensor(Shape{out}, 1.0)};
    blocks_.push_back(std::move(block));
    in = out;
  }
  head_ = DenseLayer{Tensor(Shape{in, spec_.classes}), Tensor(Shape{spec_.classes})};
}

Network Network::zeros(const NetworkSpec& spec) { return Network(spec); }

Network Network::initialize(const NetworkSpec& spec, std::uint64_t seed) {
  Network net(spec);
  Rng rng(seed);
  auto fill = [&rng](DenseLayer& layer) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.rows()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : layer.weight.values()) w = dist(rng);
    for (auto& b : layer.bias.values()) b = dist(rng);
  };
  for (auto& block : net.blocks_) fill(block.dense);
  fill(net.head_);
  return net;
}

ForwardResult Network::forward(ad::Tape& tape, const Tensor& batch, bool trainable) {
  return run(tape, batch, trainable, mode_ == Mode::train);
}

ForwardValues Network::infer(const Tensor& batch) const {
  ad::Tape tape;
  // Eval-mode batch norm only reads the running statistics.
  auto result = const_cast<Network*>(this)->run(tape, batch, false, false);
  return {result.logits.value(), result.front.value(), result.back.value()};
}

ForwardResult Network::run(ad::Tape& tape, const Tensor& batch, bool trainable, bool training) {
  if (batch.rank() != 2 || batch.cols() != spec_.input_dim)
    throw DimensionError("network expects [batch x " + std::to_string(spec_.input_dim) + "] input, got " +
                         shape_string(batch.shape()));
  ForwardResult result;
  result.relu_margin = std::numeric_limits<double>::infinity();
  auto leaf = [&](const Tensor& t) {
    ad::Var v = trainable ? tape.parameter(t) : tape.constant(t);
    result.parameters.push_back(v);
    return v;
  };

  ad::Var h = tape.constant(batch);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    HiddenBlock& block = blocks_[i];
    ad::Var w = leaf(block.dense.weight);
    ad::Var b = leaf(block.dense.bias);
    h = ad::add(ad::matmul(h, w), b);
    if (block.norm) {
      ad::Var gamma = leaf(block.norm->gamma);
      ad::Var beta = leaf(block.norm->beta);
      ad::BatchNormBuffers buffers{block.norm->running_mean.values(), block.norm->running_var.values(),
                                   kNormMomentum, kNormEpsilon};
      h = ad::batch_norm(h, gamma, beta, buffers, training);
    }
    if (i == 0) result.front = h;
    for (double v : h.value().values()) result.relu_margin = std::min(result.relu_margin, std::abs(v));
    h = ad::relu(h);
  }
  result.back = h;
  ad::Var w = leaf(head_.weight);
  ad::Var b = leaf(head_.bias);
  result.logits = ad::add(ad::matmul(h, w), b);
  return result;
}

std::vector<Tensor*> Network::parameters() {
  std::vector<Tensor*> out;
  for (auto& block : blocks_) {
    out.push_back(&block.dense.weight);
    out.push_back(&block.dense.bias);
    if (block.norm) {
      out.push_back(&block.norm->gamma);
      out.push_back(&block.norm->beta);
    }
  }
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  return out;
}

std::vector<const Tensor*> Network::parameters() const {
  auto mutable_params = const_cast<Network*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* p : parameters()) n += p->size();
  return n;
}

std::vector<double> Network::flat_parameters() const {
  std::vector<double> out;
  for (const Tensor* p : parameters()) out.insert(out.end(), p->values().begin(), p->values().end());
  return out;
}

void Network::set_flat_parameters(std::span<const double> values) {
  if (values.size() != parameter_count()) throw DimensionError("flat parameter vector has wrong length");
  std::size_t offset = 0;
  for (Tensor* p : parameters()) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), p->size(), p->values().begin());
    offset += p->size();
  }
}

std::vector<double> Network::state_values() const {
  std::vector<double> out = flat_parameters();
  for (const auto& block : blocks_)
    if (block.norm) {
      out.insert(out.end(), block.norm->running_mean.values().begin(), block.norm->running_mean.values().end());
      out.insert(out.end(), block.norm->running_var.values().begin(), block.norm->running_var.values().end());
    }
  return out;
}

void Network::collect_gradients(const ad::Tape& tape, const ForwardResult& result) {
  auto params = parameters();
  if (result.parameters.size() != params.size())
    throw DimensionError("forward result does not belong to this network");
  gradients_.clear();
  for (std::size_t i = 0; i < params.size(); ++i) gradients_.push_back(tape.grad(result.parameters[i]));
  has_gradients_ = true;
}

void Network::clear_gradients() noexcept {
  gradients_.clear();
  has_gradients_ = false;
}

SgdOptimizer::SgdOptimizer(double momentum, double weight_decay)
    : momentum_(momentum), weight_decay_(weight_decay) {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
}

void SgdOptimizer::step(Network& net, double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!net.has_gradients()) throw NotReadyError("sgd step without gradients; run backward first");
  auto params = net.parameters();
  const auto& grads = net.gradients();
  if (velocity_.empty())
    for (const Tensor* p : params) velocity_.emplace_back(p->shape(), 0.0);
  if (velocity_.size() != params.size()) throw DimensionError("optimizer bound to a different network");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i]->values();
    auto g = grads[i].values();
    auto v = velocity_[i].values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double step = g[j] + weight_decay_ * w[j];
      v[j] = momentum_ * v[j] + step;
      w[j] -= lr * v[j];
    }
  }
  net.clear_gradients();
}

double scheduled_lr(double base_lr, std::size_t epoch, std::size_t total_epochs,
                    std::span<const double> milestones, double factor) {
  double lr = base_lr;
  for (double m : milestones) {
    const auto boundary = static_cast<std::size_t>(std::floor(m * static_cast<double>(total_epochs)));
    if (epoch >= boundary) lr *= factor;
  }
  return lr;
}

namespace {

constexpr std::string_view kCheckpointMagic = "EEIKDNET";
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint8_t kDenseKind = 1;
constexpr std::uint8_t kNormKind = 2;

}  // namespace

// Layout: magic, version, input_dim, classes, mode, layer count, then one
// (kind, in, out) record per layer, then every layer's arrays in layer order
// (dense: weight, bias; norm: gamma, beta, running_mean, running_var).
std::string serialize_checkpoint(const Network& net) {
  io::ByteWriter w;
  w.put_bytes(kCheckpointMagic);
  w.put(kCheckpointVersion);
  w.put<std::uint64_t>(net.spec_.input_dim);
  w.put<std::uint64_t>(net.spec_.classes);
  w.put<std::uint8_t>(net.mode_ == Mode::train ? 0 : 1);
  std::uint64_t layers = 1;
  for (const auto& block : net.blocks_) layers += block.norm ? 2 : 1;
  w.put(layers);
  std::size_t in = net.spec_.input_dim;
  for (const auto& block : net.blocks_) {
    const std::size_t out = block.dense.bias.size();
    w.put(kDenseKind);
    w.put<std::uint64_t>(in);
    w.put<std::uint64_t>(out);
    if (block.norm) {
      w.put(kNormKind);
      w.put<std::uint64_t>(out);
      w.put<std::uint64_t>(out);
    }
    in = out;
  }
  w.put(kDenseKind);
  w.put<std::uint64_t>(in);
  w.put<std::uint64_t>(net.spec_.classes);
  for (const auto& block : net.blocks_) {
    w.put_doubles(block.dense.weight.values());
    w.put_doubles(block.dense.bias.values());
    if (block.norm) {
      w.put_doubles(block.norm->gamma.values());
      w.put_doubles(block.norm->beta.values());
      w.put_doubles(block.norm->running_mean.values());
      w.put_doubles(block.norm->running_var.values());
    }
  }
  w.put_doubles(net.head_.weight.values());
  w.put_doubles(net.head_.bias.values());
  return w.take();
}

Network parse_checkpoint(std::string_view bytes) {
  io::ByteReader r(bytes);
  if (r.get_bytes(kCheckpointMagic.size()) != kCheckpointMagic) throw FormatError("not a network checkpoint");
  if (auto version = r.get<std::uint32_t>(); version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  NetworkSpec spec;
  spec.input_dim = r.get<std::uint64_t>();
  spec.classes = r.get<std::uint64_t>();
  const auto mode = r.get<std::uint8_t>() == 0 ? Mode::train : Mode::eval;
  const auto layers = r.get<std::uint64_t>();
  std::size_t expected_in = spec.input_dim;
  for (std::uint64_t i = 0; i < layers; ++i) {
    const auto kind = r.get<std::uint8_t>();
    const auto in = r.get<std::uint64_t>();
    const auto out = r.get<std::uint64_t>();
    if (kind == kDenseKind) {
      if (in != expected_in) throw FormatError("checkpoint layer widths do not chain");
      if (i + 1 == layers) {
        if (out != spec.classes) throw FormatError("checkpoint head width differs from class count");
      } else {
        spec.hidden.push_back(out);
        spec.normalize.push_back(false);
      }
      expected_in = out;
    } else if (kind == kNormKind) {
      if (spec.hidden.empty() || in != out || out != spec.hidden.back())
        throw FormatError("checkpoint normalization layer is misplaced");
      spec.normalize.back() = true;
    } else {
      throw FormatError("unknown checkpoint layer kind");
    }
  }
  Network net(spec);
  net.mode_ = mode;
  for (auto& block : net.blocks_) {
    r.get_doubles(block.dense.weight.values());
    r.get_doubles(block.dense.bias.values());
    if (block.norm) {
      r.get_doubles(block.norm->gamma.values());
      r.get_doubles(block.norm->beta.values());
      r.get_doubles(block.norm->running_mean.values());
      r.get_doubles(block.norm->running_var.values());
    }
  }
  r.get_doubles(net.head_.weight.values());
  r.get_doubles(net.head_.bias.values());
  if (!r.at_end()) throw FormatError("trailing bytes after checkpoint");
  return net;
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_checkpoint(net));
}

Network load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(io::read_file(path)); }

}  // namespace eeikd::nets
