#include "eeikd/distill.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "eeikd/errors.hpp"
#include "eeikd/rng.hpp"

namespace eeikd::distill {

void DistillConfig::validate(std::size_t classes) const {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (class_dropping) kept_classes(classes, alpha);
  if (!(lambda_feature >= 0.0) || !(lambda_relation >= 0.0)) throw ConfigError("loss weights must be non-negative");
  if (!(huber_delta > 0.0)) throw ConfigError("huber delta must be positive");
  if (!(xi_epsilon > 0.0)) throw ConfigError("xi epsilon must be positive");
  if (batch_size < 2) throw BatchSizeError("distillation batch size must be at least 2");
  if (!(optimizer.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(optimizer.momentum >= 0.0 && optimizer.momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(optimizer.weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
}

std::size_t kept_classes(std::size_t classes, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("class-dropping rate must lie in [0, 1)");
  // The small offset keeps e.g. (1 - 0.9) * 10 = 0.99999... at K = 1.
  const double raw = (1.0 - alpha) * static_cast<double>(classes);
  const auto k = static_cast<std::size_t>(std::floor(raw + 1e-9));
  if (k < 1)
    throw ConfigError("class-dropping rate " + std::to_string(alpha) + " keeps no class out of " +
                      std::to_string(classes));
  return k;
}

Tensor class_drop_mask(const Tensor& probabilities, double alpha) {
  const std::size_t n = probabilities.cols();
  const std::size_t k = kept_classes(n, alpha);
  Tensor mask(probabilities.shape(), 0.0);
  std::vector<std::size_t> order(n);
  for (std::size_t r = 0; r < probabilities.rows(); ++r) {
    auto p = probabilities.row(r);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return p[a] != p[b] ? p[a] > p[b] : a < b; });
    auto m = mask.row(r);
    for (std::size_t i = 0; i < k; ++i) m[order[i]] = 1.0;
  }
  return mask;
}

MaskedPrediction apply_mask(const Tensor& logits, const Tensor& mask, double temperature) {
  if (logits.shape() != mask.shape()) throw DimensionError("mask shape differs from logits");
  MaskedPrediction out;
  out.mask = mask;
  out.masked_logits = logits;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i] == 0.0) out.masked_logits[i] = ad::kMasked;
  out.distribution = ad::softmax_values(out.masked_logits, temperature);
  return out;
}

ad::Var student_distribution(const MaskedPrediction& teacher, ad::Var student_logits, double temperature,
                             bool mask_student) {
  ad::Var z = mask_student ? ad::mask_logits(student_logits, teacher.mask) : student_logits;
  return ad::softmax(z, temperature);
}

ad::Var kd_loss(const MaskedPrediction& teacher, ad::Var student_logits, double temperature,
                bool mask_student) {
  if (student_logits.value().shape() != teacher.distribution.shape())
    throw DimensionError("student logits and teacher prediction differ in shape");
  ad::Tape& tape = *student_logits.tape();
  ad::Var q = student_distribution(teacher, student_logits, temperature, mask_student);
  ad::Var p = tape.constant(teacher.distribution);
  const double rows = static_cast<double>(teacher.distribution.rows());
  return ad::scale(ad::kl_divergence(p, q), temperature * temperature / rows);
}

FeatureLoss feature_loss(const Tensor& teacher_front, const Tensor& teacher_back, ad::Var student_front,
                         ad::Var student_back) {
  if (teacher_front.shape() != student_front.value().shape() ||
      teacher_back.shape() != student_back.value().shape())
    throw DimensionError("teacher and student tap shapes differ");
  ad::Tape& tape = *student_front.tape();
  auto term = [&tape](const Tensor& teacher, ad::Var student) {
    const double norm = static_cast<double>(teacher.rows() * teacher.cols());
    return ad::scale(ad::l1_distance(tape.constant(teacher), student), 1.0 / norm);
  };
  FeatureLoss out;
  out.front = term(teacher_front, student_front);
  out.back = term(teacher_back, student_back);
  out.total = ad::add(out.front, out.back);
  return out;
}

RelationStats relation_stats(ad::Var predictions) {
  const Tensor& v = predictions.value();
  if (v.rank() != 2 || v.rows() < 2)
    throw BatchSizeError("relation statistics need a batch of at least 2 rows");
  const double others = static_cast<double>(v.rows() - 1);
  RelationStats out;
  out.psi = ad::scale(ad::sum_rows(ad::pairwise_distances(predictions)), 1.0 / others);
  out.xi = ad::mean(out.psi);
  return out;
}

ad::Var relation_loss(ad::Var teacher_predictions, ad::Var student_predictions, double huber_delta,
                      double xi_epsilon) {
  if (teacher_predictions.value().shape() != student_predictions.value().shape())
    throw DimensionError("teacher and student predictions differ in shape");
  auto normalized = [xi_epsilon](ad::Var preds) {
    RelationStats stats = relation_stats(preds);
    return ad::div_scalar(stats.psi, ad::clamp_min(stats.xi, xi_epsilon));
  };
  const double rows = static_cast<double>(teacher_predictions.value().rows());
  ad::Var penalty = ad::huber(normalized(teacher_predictions), normalized(student_predictions), huber_delta);
  return ad::scale(penalty, 1.0 / rows);
}

ad::Var total_loss(const LossParts& parts, double lambda_feature, double lambda_relation) {
  return ad::add(ad::add(parts.kd, ad::scale(parts.feature, lambda_feature)),
                 ad::scale(parts.relation, lambda_relation));
}

TeacherTargets teacher_targets(const nets::Network& teacher, const Tensor& inputs) {
  if (teacher.mode() != nets::Mode::eval) throw ConfigError("teacher must be in eval mode");
  auto values = teacher.infer(inputs);
  return {std::move(values.logits), std::move(values.front), std::move(values.back)};
}

double accuracy(const nets::Network& net, const datagen::SourceDataset& data) {
  if (data.size() == 0) return 0.0;
  const auto predicted = ad::argmax_rows(net.infer(data.samples).logits);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == static_cast<std::size_t>(data.labels[i])) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::size_t epochs_to_threshold(const std::vector<double>& accuracies, double fraction) {
  if (accuracies.empty()) return 0;
  const double target = fraction * accuracies.back();
  for (std::size_t i = 0; i < accuracies.size(); ++i)
    if (accuracies[i] >= target) return i + 1;
  return accuracies.size();
}

DistillRun distill_student(const nets::Network& teacher, nets::Network student, const Tensor& train_inputs,
                           const datagen::SourceDataset& test, const DistillConfig& config,
                           std::uint64_t seed) {
  const std::size_t classes = teacher.spec().classes;
  config.validate(classes);
  nets::require_compatible(teacher.spec(), student.spec());
  if (train_inputs.rank() != 2 || train_inputs.rows() == 0) throw ConfigError("training set is empty");
  if (config.epochs == 0) return {std::move(student), {}};

  const TeacherTargets targets = teacher_targets(teacher, train_inputs);
  const Tensor mask = config.class_dropping
                          ? class_drop_mask(ad::softmax_values(targets.logits, 1.0), config.alpha)
                          : Tensor(targets.logits.shape(), 1.0);
  const auto teacher_top = ad::argmax_rows(targets.logits);

  student.set_mode(nets::Mode::train);
  nets::SgdOptimizer optimizer(config.optimizer.momentum, config.optimizer.weight_decay);
  Rng rng(seed);
  const std::size_t count = train_inputs.rows();
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);

  DistillRun run{std::move(student), {}};
  nets::Network& net = run.student;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    EpochMetrics m;
    m.epoch = epoch + 1;
    m.lr = nets::scheduled_lr(config.optimizer.lr, epoch, config.epochs, config.optimizer.milestones,
                              config.optimizer.decay);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t seen = 0, agree = 0;
    for (std::size_t begin = 0; begin < count; begin += config.batch_size) {
      const std::size_t end = std::min(count, begin + config.batch_size);
      if (end - begin < 2) break;  // batch statistics and relations need two rows
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const double weight = static_cast<double>(rows.size());

      MaskedPrediction teacher_pred;
      const Tensor batch_logits = targets.logits.gather_rows(rows);
      if (config.class_dropping) {
        teacher_pred = apply_mask(batch_logits, mask.gather_rows(rows), config.temperature);
      } else {
        teacher_pred.mask = Tensor(batch_logits.shape(), 1.0);
        teacher_pred.masked_logits = batch_logits;
        teacher_pred.distribution = ad::softmax_values(batch_logits, config.temperature);
      }

      ad::Tape tape;
      nets::ForwardResult fr = net.forward(tape, train_inputs.gather_rows(rows));
      const bool mask_student = config.class_dropping && config.mask_student;
      ad::Var kd = kd_loss(teacher_pred, fr.logits, config.temperature, mask_student);
      FeatureLoss feat =
          feature_loss(targets.front.gather_rows(rows), targets.back.gather_rows(rows), fr.front, fr.back);
      ad::Var student_pred = student_distribution(teacher_pred, fr.logits, config.temperature, mask_student);
      ad::Var rel = relation_loss(tape.constant(teacher_pred.distribution), student_pred, config.huber_delta,
                                  config.xi_epsilon);
      ad::Var total = total_loss({kd, feat.total, rel}, config.lambda_feature, config.lambda_relation);
      tape.backward(total);
      net.collect_gradients(tape, fr);
      optimizer.step(net, m.lr);

      m.loss_kd += weight * kd.value().item();
      m.loss_at_front += weight * feat.front.value().item();
      m.loss_at_back += weight * feat.back.value().item();
      m.loss_at += weight * feat.total.value().item();
      m.loss_d += weight * rel.value().item();
      m.loss_total += weight * total.value().item();
      const auto student_top = ad::argmax_rows(fr.logits.value());
      for (std::size_t i = 0; i < rows.size(); ++i) agree += student_top[i] == teacher_top[rows[i]];
      seen += rows.size();
    }
    if (seen > 0) {
      const double s = static_cast<double>(seen);
      for (double* v : {&m.loss_kd, &m.loss_at_front, &m.loss_at_back, &m.loss_at, &m.loss_d, &m.loss_total})
        *v /= s;
      m.train_agreement = static_cast<double>(agree) / s;
    }
    m.test_accuracy = accuracy(net, test);
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    run.metrics.push_back(m);
  }
  net.set_mode(nets::Mode::eval);
  return run;
}

std::string metrics_jsonl(const std::vector<EpochMetrics>& metrics) {
  std::string out;
  std::vector<double> accuracies;
  for (const auto& m : metrics) {
    nlohmann::ordered_json row;
    row["epoch"] = m.epoch;
    row["lr"] = m.lr;
    row["loss_kd"] = m.loss_kd;
    row["loss_at_front"] = m.loss_at_front;
    row["loss_at_back"] = m.loss_at_back;
    row["loss_at"] = m.loss_at;
    row["loss_d"] = m.loss_d;
    row["loss_total"] = m.loss_total;
    row["train_agreement"] = m.train_agreement;
    row["test_acc"] = m.test_accuracy;
    out += row.dump() + "\n";
    accuracies.push_back(m.test_accuracy);
  }
  nlohmann::ordered_json summary;
  summary["summary"] = true;
  summary["epochs"] = metrics.size();
  summary["final_test_acc"] = accuracies.empty() ? 0.0 : accuracies.back();
  summary["best_test_acc"] = accuracies.empty() ? 0.0 : *std::max_element(accuracies.begin(), accuracies.end());
  summary["epochs_to_threshold"] = epochs_to_threshold(accuracies);
  out += summary.dump() + "\n";
  return out;
}

std::string timing_jsonl(const std::vector<EpochMetrics>& metrics) {
  std::string out;
  for (const auto& m : metrics) {
    nlohmann::ordered_json row;
    row["epoch"] = m.epoch;
    row["wall_time_s"] = m.wall_seconds;
    out += row.dump() + "\n";
  }
  return out;
}

}  // namespace eeikd::distill
